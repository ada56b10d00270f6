"""Staged fact-checked-claim retrieval: retrieve, re-rank, fuse, evaluate."""

__version__ = "0.1.0"

from .records import (  # noqa: F401
    CROSSLINGUAL_KEY,
    LANGUAGE_ORDER,
    CompositionPlan,
    FactCheck,
    LangTuple,
    PairSet,
    Post,
    TaskEntry,
    TaskSplit,
)
from .corpus import (  # noqa: F401
    Corpus,
    LanguageView,
    language_view,
    parse_fact_checks,
    parse_pairs,
    parse_posts,
    parse_tasks,
)
from .compose import compose_fact_check_text, compose_post_text  # noqa: F401
from .embedder import (  # noqa: F401
    BaselineVectorizer,
    BaselineVectorizerConfig,
    EmbeddingStore,
    Namespace,
    l2_normalize,
    load_embeddings,
    save_embeddings,
)
from .retriever import Index, RankedList, batch_retrieve, build_index, top_k  # noqa: F401
from .reranker import LexicalScorer, RerankerSpec, ScoreTable, lexical_overlap_score, load_scores, rerank  # noqa: F401
from .fusion import ModelWeight, VoteTally, compute_weights, fuse_run, weighted_vote  # noqa: F401
from .evaluation import (  # noqa: F401
    EvaluationReport,
    PredictionSet,
    ReportRow,
    improvement,
    macro_average,
    render_report,
    success_at_k,
)
from .pipeline import (  # noqa: F401
    EmbedderSpec,
    ExperimentConfig,
    FusionSpec,
    Runner,
    crosslingual_mode,
    load_config,
    run_full_pipeline,
    run_retrieval_experiment,
)
