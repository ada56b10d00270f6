"""Experiment orchestration: compose -> embed -> retrieve -> rerank -> fuse -> eval.

A run is fully described by an :class:`ExperimentConfig`; the canonical hash
of that config names the run directory, and identical hashes are guaranteed
to produce byte-identical artifacts. Stage artifacts persist under

    <out>/<hash>/stage1/<key>.jsonl          retrieval candidates (top-K)
    <out>/<hash>/stage2/<model>/<key>.jsonl  reranked Top-10 per model
    <out>/<hash>/stage3/<key>.jsonl          fused Top-10
    <out>/<hash>/<track>_predictions.json    submission file
    <out>/<hash>/report.{txt,json}           rendered evaluation
    <out>/<hash>/manifest.json               config hash, paths, timings

so any later stage can be re-run from the persisted output of the previous
one (the CLI exposes exactly that).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .compose import compose_fact_check_text, compose_post_text
from .corpus import Corpus, LanguageView, language_view, parse_fact_checks, parse_pairs, parse_posts, parse_tasks
from .embedder import (
    BaselineVectorizer,
    BaselineVectorizerConfig,
    EmbeddingStore,
    Namespace,
    load_embeddings,
)
from .errors import ConfigError, StageError, ValidationError
from .evaluation import (
    TRACK_CROSSLINGUAL,
    TRACK_MONOLINGUAL,
    TRACKS,
    EvaluationReport,
    PredictionSet,
    ReportRow,
    render_report,
    report_to_json_dict,
    success_at_k,
    write_submission,
)
from .fusion import SCHEMES, compute_weights, fuse_run
from .records import CROSSLINGUAL_KEY, CompositionPlan, PairSet, TaskSplit
from .remote import RemoteEmbedder, RemoteEmbedderConfig
from .reranker import LexicalScorer, RerankerSpec, load_scores, rerank
from .retriever import (
    Index,
    RankedList,
    batch_retrieve,
    build_index,
    read_candidates,
    write_candidates,
)

log = logging.getLogger(__name__)

REMOTE_URL_ENV = "CLAIMSTAGE_REMOTE_EMBED_URL"
DEFAULT_K = 100
BASELINE_LABEL = "baseline-tfidf"


@dataclass(frozen=True)
class EmbedderSpec:
    """Which vector source stage 1 uses."""

    kind: str                       # "baseline" | "file" | "remote"
    ngram_min: int = 3              # baseline
    ngram_max: int = 5
    hash_dim: int = 2**18
    path: str | None = None        # file
    endpoint: str | None = None    # remote
    model: str | None = None
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.kind not in ("baseline", "file", "remote"):
            raise ConfigError(f"unknown embedder kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("file embedder needs a path")
        if self.kind == "remote" and (not self.endpoint or not self.model):
            raise ConfigError("remote embedder needs endpoint and model")

    @property
    def label(self) -> str:
        if self.kind == "baseline":
            return BASELINE_LABEL
        if self.kind == "file":
            return f"file:{self.path}"
        return f"remote:{self.endpoint}+{self.model}"


@dataclass(frozen=True)
class FusionSpec:
    """Voting scheme and where model weights come from."""

    scheme: str = "borda"
    weight_source: str = "dev"                      # "dev" | "external"
    external_weights: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown fusion scheme {self.scheme!r}")
        if self.weight_source not in ("dev", "external"):
            raise ConfigError(f"unknown weight source {self.weight_source!r}")
        if self.weight_source == "external" and not self.external_weights:
            raise ConfigError("external weight source needs external_weights")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run's outputs (plus the workers knob)."""

    track: str
    plan: CompositionPlan
    posts_path: str
    fact_checks_path: str
    pairs_path: str
    tasks_path: str
    out_dir: str
    embedder: EmbedderSpec = EmbedderSpec(kind="baseline")
    rerankers: tuple[RerankerSpec, ...] = ()
    fusion: FusionSpec = FusionSpec()
    languages: tuple[str, ...] | None = None
    k: int = DEFAULT_K
    retrieval_only: bool = False
    strict_plan: bool = False
    missing_score: str = "fail"     # "fail" | "fallback" for external score gaps
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.track not in TRACKS:
            raise ConfigError(f"track must be one of {TRACKS}, got {self.track!r}")
        if self.missing_score not in ("fail", "fallback"):
            raise ConfigError(f"missing_score must be 'fail' or 'fallback', got {self.missing_score!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.rerankers and not self.retrieval_only:
            raise ConfigError("configure at least one reranker or set retrieval_only")
        for spec in self.rerankers:
            if spec.top_n > self.k:
                raise ConfigError(
                    f"reranker {spec.model_name!r} top_n={spec.top_n} exceeds K={self.k}"
                )
        names = [spec.model_name for spec in self.rerankers]
        if len(names) != len(set(names)):
            raise ConfigError("reranker model names must be unique")

    def canonical_dict(self) -> dict[str, Any]:
        """Hash payload; excludes out_dir and workers (execution details)."""
        return {
            "track": self.track,
            "plan": self.plan.value,
            "paths": {
                "posts": self.posts_path,
                "fact_checks": self.fact_checks_path,
                "pairs": self.pairs_path,
                "tasks": self.tasks_path,
            },
            "embedder": {
                "kind": self.embedder.kind,
                "ngram_min": self.embedder.ngram_min,
                "ngram_max": self.embedder.ngram_max,
                "hash_dim": self.embedder.hash_dim,
                "path": self.embedder.path,
                "endpoint": self.embedder.endpoint,
                "model": self.embedder.model,
                "batch_size": self.embedder.batch_size,
            },
            "rerankers": [
                {
                    "kind": spec.kind,
                    "model_name": spec.model_name,
                    "path": spec.path,
                    "top_n": spec.top_n,
                }
                for spec in self.rerankers
            ],
            "fusion": {
                "scheme": self.fusion.scheme,
                "weight_source": self.fusion.weight_source,
                "external_weights": [list(w) for w in self.fusion.external_weights],
            },
            "languages": list(self.languages) if self.languages is not None else None,
            "k": self.k,
            "retrieval_only": self.retrieval_only,
            "strict_plan": self.strict_plan,
            "missing_score": self.missing_score,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True, ensure_ascii=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.config_hash()[:12]


def _read_config_payload(path: Path) -> dict[str, Any]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    """Read a TOML/JSON config file; keyword overrides replace file values.

    Relative paths are resolved against the config file's directory. The
    ``CLAIMSTAGE_REMOTE_EMBED_URL`` environment variable overrides a remote
    embedder's endpoint.
    """
    path = Path(path)
    try:
        payload = _read_config_payload(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must be a table/object")
    effective = {k: v for k, v in overrides.items() if v is not None}
    out_override = effective.pop("out", None)
    if out_override is not None:
        payload.setdefault("paths", {})["out"] = out_override
    top_n_override = effective.pop("top_n", None)
    if top_n_override is not None:
        payload["rerankers"] = [
            {**entry, "top_n": top_n_override} for entry in payload.get("rerankers", [])
        ]
    payload.update(effective)
    return config_from_dict(payload, base_dir=path.parent)


def config_from_dict(payload: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    base = Path(base_dir) if base_dir is not None else Path(".")

    def resolve(p: Any, name: str) -> str:
        if not isinstance(p, str) or not p:
            raise ConfigError(f"paths.{name} must be a non-empty string")
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else (base / candidate))

    try:
        paths = payload["paths"]
        posts = resolve(paths["posts"], "posts")
        fact_checks = resolve(paths["fact_checks"], "fact_checks")
        pairs = resolve(paths["pairs"], "pairs")
        tasks = resolve(paths["tasks"], "tasks")
        out = resolve(paths.get("out", "runs"), "out")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"config is missing path entries: {exc}") from None

    emb = dict(payload.get("embedder", {"kind": "baseline"}))
    if emb.get("kind") == "remote":
        override = os.environ.get(REMOTE_URL_ENV)
        if override:
            emb["endpoint"] = override
    if emb.get("kind") == "file" and emb.get("path"):
        emb["path"] = resolve(emb["path"], "embedder.path")
    embedder = EmbedderSpec(
        kind=emb.get("kind", "baseline"),
        ngram_min=int(emb.get("ngram_min", 3)),
        ngram_max=int(emb.get("ngram_max", 5)),
        hash_dim=int(emb.get("hash_dim", 2**18)),
        path=emb.get("path"),
        endpoint=emb.get("endpoint"),
        model=emb.get("model"),
        batch_size=int(emb.get("batch_size", 64)),
    )

    rerankers = []
    for entry in payload.get("rerankers", []):
        spec_path = entry.get("path")
        rerankers.append(
            RerankerSpec(
                kind=entry.get("kind", "lexical_baseline"),
                model_name=entry.get("model_name", entry.get("kind", "lexical-3gram")),
                path=resolve(spec_path, "reranker.path") if spec_path else None,
                top_n=int(entry.get("top_n", 10)),
            )
        )

    fusion_payload = payload.get("fusion", {})
    external = tuple(
        sorted((str(name), float(value))
               for name, value in dict(fusion_payload.get("external_weights", {})).items())
    )
    fusion = FusionSpec(
        scheme=fusion_payload.get("scheme", "borda"),
        weight_source=fusion_payload.get("weight_source", "dev"),
        external_weights=external,
    )

    languages = payload.get("languages")
    try:
        plan = CompositionPlan.parse(str(payload.get("plan", "OT")))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(
        track=payload.get("track", TRACK_MONOLINGUAL),
        plan=plan,
        posts_path=posts,
        fact_checks_path=fact_checks,
        pairs_path=pairs,
        tasks_path=tasks,
        out_dir=out,
        embedder=embedder,
        rerankers=tuple(rerankers),
        fusion=fusion,
        languages=tuple(languages) if languages is not None else None,
        k=int(payload.get("k", DEFAULT_K)),
        retrieval_only=bool(payload.get("retrieval_only", False)),
        strict_plan=bool(payload.get("strict_plan", False)),
        missing_score=payload.get("missing_score", "fail"),
        seed=int(payload.get("seed", 0)),
        workers=int(payload.get("workers", 1)),
    )


@dataclass
class RunManifest:
    """What a run produced; identical configs yield identical config hashes."""

    config_hash: str
    version: str
    config: dict[str, Any]
    artifacts: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def save(self, path: Path) -> None:
        payload = {
            "config_hash": self.config_hash,
            "version": self.version,
            "config": self.config,
            "artifacts": self.artifacts,
            "timings": self.timings,
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


class Runner:
    """Loads inputs once and executes/reloads individual stages for one config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.run_dir = config.run_dir
        self.manifest = RunManifest(
            config_hash=config.config_hash(),
            version=__version__,
            config=config.canonical_dict(),
        )
        self._timer_start: float | None = None
        try:
            with open(config.posts_path, encoding="utf-8") as fh:
                posts = parse_posts(fh)
            with open(config.fact_checks_path, encoding="utf-8") as fh:
                fact_checks = parse_fact_checks(fh)
            with open(config.pairs_path, encoding="utf-8") as fh:
                self.pairs: PairSet = parse_pairs(fh)
            with open(config.tasks_path, encoding="utf-8") as fh:
                self.split: TaskSplit = parse_tasks(fh)
            self.corpus = Corpus(posts, fact_checks)
        except (OSError, ValidationError) as exc:
            raise StageError("ingest", exc) from exc
        self.keys = self._view_keys()
        self._views: dict[str, LanguageView] = {}
        self._texts: dict[str, tuple[dict[int, str], dict[int, str]]] = {}

    # -- plumbing ------------------------------------------------------------

    def _view_keys(self) -> list[str]:
        cfg = self.config
        if cfg.track == TRACK_CROSSLINGUAL:
            if cfg.plan is CompositionPlan.OTV:
                raise ConfigError("the crosslingual track supports plans O, T, and OT only")
            if self.split.crosslingual is None:
                raise ConfigError("task split has no crosslingual entry")
            return [CROSSLINGUAL_KEY]
        available = self.split.languages()
        if not available:
            raise ConfigError("task split has no monolingual entries")
        if cfg.languages is None:
            return available
        unknown = sorted(set(cfg.languages) - set(available))
        if unknown:
            raise ConfigError(f"languages not in task split: {', '.join(unknown)}")
        return sorted(cfg.languages)

    def view(self, key: str) -> LanguageView:
        if key not in self._views:
            self._views[key] = language_view(self.corpus, self.split, key)
        return self._views[key]

    def texts(self, key: str) -> tuple[dict[int, str], dict[int, str]]:
        """Composed (query_texts, doc_texts) for one view, cached."""
        if key not in self._texts:
            view = self.view(key)
            plan, strict = self.config.plan, self.config.strict_plan
            queries = {
                p.post_id: compose_post_text(p, plan, strict_plan=strict)
                for p in view.posts_dev
            }
            docs = {
                fc.fact_check_id: compose_fact_check_text(fc, plan, strict_plan=strict)
                for fc in view.fact_check_pool
            }
            empty = sum(1 for t in queries.values() if not t)
            if empty:
                log.warning("%s: %d post(s) compose to empty queries under plan %s",
                            key, empty, plan.value)
            self._texts[key] = (queries, docs)
        return self._texts[key]

    def _begin(self) -> None:
        self._timer_start = time.perf_counter()

    def _end(self, stage: str) -> None:
        assert self._timer_start is not None
        self.manifest.timings[stage] = time.perf_counter() - self._timer_start
        self._timer_start = None

    # -- stage 1 ---------------------------------------------------------------

    def _index_and_queries(self, key: str) -> tuple[Index, dict[int, Any]]:
        spec = self.config.embedder
        view = self.view(key)
        pool_ids = sorted(fc.fact_check_id for fc in view.fact_check_pool)
        queries_text, docs_text = self.texts(key)
        if spec.kind == "baseline":
            vec_config = BaselineVectorizerConfig(
                ngram_min=spec.ngram_min, ngram_max=spec.ngram_max, hash_dim=spec.hash_dim
            )
            vectorizer = BaselineVectorizer.fit(
                (docs_text[i] for i in pool_ids), vec_config
            )
            matrix = vectorizer.embed_texts(docs_text[i] for i in pool_ids)
            index = Index.from_vectors(ids=pool_ids, matrix=matrix)
            post_ids = sorted(queries_text)
            q_matrix = vectorizer.embed_texts(queries_text[p] for p in post_ids)
            queries = {p: q_matrix[row] for row, p in enumerate(post_ids)}
            return index, queries
        if spec.kind == "file":
            store = load_embeddings(spec.path)
            index = build_index(store, pool_ids)
            queries = {p: store.get(Namespace.POST, p) for p in sorted(queries_text)}
            return index, queries
        client = RemoteEmbedder(
            RemoteEmbedderConfig(endpoint=spec.endpoint, model=spec.model,
                                 batch_size=spec.batch_size)
        )
        doc_vectors = client.embed_all([docs_text[i] for i in pool_ids])
        store = EmbeddingStore(dim=doc_vectors.shape[1], provenance=client.provenance)
        for row, fc_id in enumerate(pool_ids):
            store.add(Namespace.FACT_CHECK, fc_id, doc_vectors[row])
        post_ids = sorted(queries_text)
        query_vectors = client.embed_all([queries_text[p] for p in post_ids])
        for row, post_id in enumerate(post_ids):
            store.add(Namespace.POST, post_id, query_vectors[row])
        index = build_index(store, pool_ids)
        queries = {p: store.get(Namespace.POST, p) for p in post_ids}
        return index, queries

    def retrieve(self) -> dict[str, dict[int, RankedList]]:
        """Stage 1: top-K candidates per post per view; persisted as JSONL."""
        self._begin()
        try:
            stage_dir = self.run_dir / "stage1"
            stage_dir.mkdir(parents=True, exist_ok=True)
            candidates: dict[str, dict[int, RankedList]] = {}
            for key in self.keys:
                index, queries = self._index_and_queries(key)
                result = batch_retrieve(index, queries, self.config.k,
                                        workers=self.config.workers)
                candidates[key] = result
                path = stage_dir / f"{_safe_name(key)}.jsonl"
                write_candidates(result.values(), path)
                self.manifest.artifacts.setdefault("stage1", {})[key] = str(path)
                log.info("stage1 %s: %d posts x top-%d over %d docs",
                         key, len(result), self.config.k, len(index))
        except Exception as exc:
            raise StageError("retrieval", exc) from exc
        self._end("retrieval")
        return candidates

    def load_stage1(self) -> dict[str, dict[int, RankedList]]:
        out: dict[str, dict[int, RankedList]] = {}
        for key in self.keys:
            path = self.run_dir / "stage1" / f"{_safe_name(key)}.jsonl"
            if not path.exists():
                raise StageError("rerank", FileNotFoundError(
                    f"stage-1 candidates missing: {path}; run `claimstage retrieve` first"))
            out[key] = read_candidates(path)
        return out

    # -- stage 2 ---------------------------------------------------------------

    def _lexical_scorer(self, spec: RerankerSpec, key: str) -> LexicalScorer:
        queries_text, docs_text = self.texts(key)
        return LexicalScorer(queries_text, docs_text, model_name=spec.model_name)

    def rerank_stage(
        self, candidates: dict[str, dict[int, RankedList]], *, missing: str | None = None
    ) -> dict[str, dict[str, dict[int, RankedList]]]:
        """Stage 2: per-model Top-10 lists, persisted under stage2/<model>/."""
        if missing is None:
            missing = self.config.missing_score
        self._begin()
        try:
            if not self.config.rerankers:
                raise ConfigError("no rerankers configured")
            per_model: dict[str, dict[str, dict[int, RankedList]]] = {}
            score_tables: dict[str, Any] = {}
            for spec in sorted(self.config.rerankers, key=lambda s: s.model_name):
                if spec.kind == "score_file" and spec.model_name not in score_tables:
                    with open(spec.path, encoding="utf-8") as fh:
                        score_tables[spec.model_name] = load_scores(fh, spec.model_name)
                by_key: dict[str, dict[int, RankedList]] = {}
                for key in self.keys:
                    scorer = (score_tables[spec.model_name]
                              if spec.kind == "score_file" else self._lexical_scorer(spec, key))
                    reranked = {
                        post_id: rerank(rl, scorer, spec.top_n, missing=missing)
                        for post_id, rl in sorted(candidates[key].items())
                    }
                    by_key[key] = reranked
                    model_dir = self.run_dir / "stage2" / _safe_name(spec.model_name)
                    model_dir.mkdir(parents=True, exist_ok=True)
                    path = model_dir / f"{_safe_name(key)}.jsonl"
                    write_candidates(reranked.values(), path)
                    self.manifest.artifacts.setdefault("stage2", {}).setdefault(
                        spec.model_name, {}
                    )[key] = str(path)
                per_model[spec.model_name] = by_key
        except Exception as exc:
            raise StageError("rerank", exc) from exc
        self._end("rerank")
        return per_model

    def load_stage2(self) -> dict[str, dict[str, dict[int, RankedList]]]:
        out: dict[str, dict[str, dict[int, RankedList]]] = {}
        for spec in self.config.rerankers:
            by_key: dict[str, dict[int, RankedList]] = {}
            for key in self.keys:
                path = (self.run_dir / "stage2" / _safe_name(spec.model_name)
                        / f"{_safe_name(key)}.jsonl")
                if not path.exists():
                    raise StageError("fuse", FileNotFoundError(
                        f"stage-2 output missing: {path}; run `claimstage rerank` first"))
                by_key[key] = read_candidates(path, default_stage="rerank")
            out[spec.model_name] = by_key
        return out

    # -- evaluation helpers ------------------------------------------------------

    def _eval_by_key(self, by_key: Mapping[str, Mapping[int, RankedList]], k: int = 10
                     ) -> dict[str, float]:
        """S@k per view key, as fractions in [0, 1]."""
        out: dict[str, float] = {}
        for key in self.keys:
            predictions = PredictionSet.from_ranked(dict(by_key[key]))
            out[key] = success_at_k(predictions, self.pairs, k)
        return out

    def dev_weights(self, per_model: Mapping[str, Mapping[str, Mapping[int, RankedList]]]
                    ) -> dict[str, float]:
        """Voting weights per the configured source; single model short-circuits to 1."""
        spec = self.config.fusion
        model_names = sorted(per_model)
        if spec.weight_source == "external":
            weights = dict(spec.external_weights)
            missing = sorted(set(model_names) - set(weights))
            if missing:
                raise ConfigError(f"external weights missing models: {', '.join(missing)}")
            return {m: weights[m] for m in model_names}
        if len(model_names) == 1:
            # Fusion over one model is the identity; a weight of 1 keeps the
            # run well-defined even when its dev S@10 is 0.
            return {model_names[0]: 1.0}
        dev_scores = {
            m: sum(scores.values()) / len(scores)
            for m, scores in ((m, self._eval_by_key(per_model[m])) for m in model_names)
        }
        return {w.model_name: w.weight for w in compute_weights(dev_scores)}

    # -- stage 3 ---------------------------------------------------------------

    def fuse_stage(
        self,
        per_model: dict[str, dict[str, dict[int, RankedList]]],
        weights: Mapping[str, float] | None = None,
    ) -> dict[str, dict[int, RankedList]]:
        """Stage 3: weighted voting per view; writes stage3 JSONL + submission."""
        self._begin()
        try:
            weight_map = dict(weights) if weights is not None else self.dev_weights(per_model)
            voting_models = sorted(set(per_model) & set(weight_map))
            if not voting_models:
                raise ValidationError("no weighted models left to fuse")
            fused: dict[str, dict[int, RankedList]] = {}
            stage_dir = self.run_dir / "stage3"
            stage_dir.mkdir(parents=True, exist_ok=True)
            for key in self.keys:
                fused[key] = fuse_run(
                    {m: per_model[m][key] for m in voting_models},
                    {m: weight_map[m] for m in voting_models},
                    scheme=self.config.fusion.scheme,
                )
                path = stage_dir / f"{_safe_name(key)}.jsonl"
                write_candidates(fused[key].values(), path)
                self.manifest.artifacts.setdefault("stage3", {})[key] = str(path)
            submission: dict[int, tuple[int, ...]] = {}
            for key in self.keys:
                for post_id, rl in fused[key].items():
                    submission[post_id] = rl.ids()
            sub_path = self.run_dir / f"{self.config.track}_predictions.json"
            write_submission(PredictionSet(submission), sub_path)
            self.manifest.artifacts["submission"] = str(sub_path)
            self.manifest.artifacts["weights"] = {m: weight_map[m] for m in voting_models}
        except Exception as exc:
            raise StageError("fuse", exc) from exc
        self._end("fuse")
        return fused

    # -- reports -----------------------------------------------------------------

    def _report_rows(self, label_values: list[tuple[str, dict[str, float]]]) -> EvaluationReport:
        rows = []
        for label, by_key in label_values:
            percents = {key: 100.0 * value for key, value in by_key.items()}
            if self.config.track == TRACK_CROSSLINGUAL:
                rows.append(ReportRow(model=label, plan=self.config.plan.value,
                                      avg=percents[CROSSLINGUAL_KEY]))
            else:
                rows.append(ReportRow(model=label, plan=self.config.plan.value,
                                      by_language=percents))
        return EvaluationReport(track=self.config.track, rows=tuple(rows))

    def write_report(self, report: EvaluationReport) -> None:
        text_path = self.run_dir / "report.txt"
        json_path = self.run_dir / "report.json"
        text_path.write_text(render_report(report), encoding="utf-8")
        json_path.write_text(
            json.dumps(report_to_json_dict(report), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        self.manifest.artifacts["report_txt"] = str(text_path)
        self.manifest.artifacts["report_json"] = str(json_path)

    def write_manifest(self) -> Path:
        path = self.run_dir / "manifest.json"
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest.save(path)
        return path


def run_retrieval_experiment(config: ExperimentConfig) -> EvaluationReport:
    """Stage 1 only: per-language S@10 of the top-10 retrieval prefix."""
    runner = Runner(config)
    candidates = runner.retrieve()
    top10 = {
        key: {p: rl.top(10) for p, rl in candidates[key].items()}
        for key in runner.keys
    }
    try:
        values = runner._eval_by_key(top10)
    except Exception as exc:
        raise StageError("eval", exc) from exc
    report = runner._report_rows([(config.embedder.label, values)])
    runner.write_report(report)
    runner.write_manifest()
    return report


def run_full_pipeline(config: ExperimentConfig) -> tuple[EvaluationReport, RunManifest]:
    """All three stages plus evaluation, submission files, and the manifest."""
    runner = Runner(config)
    candidates = runner.retrieve()
    per_model = runner.rerank_stage(candidates)
    fused = runner.fuse_stage(per_model)
    try:
        labelled: list[tuple[str, dict[str, float]]] = []
        for model in sorted(per_model):
            labelled.append((model, runner._eval_by_key(per_model[model])))
        labelled.append(("Voting", runner._eval_by_key(fused)))
    except Exception as exc:
        raise StageError("eval", exc) from exc
    report = runner._report_rows(labelled)
    runner.write_report(report)
    runner.write_manifest()
    return report, runner.manifest


def crosslingual_mode(config: ExperimentConfig) -> EvaluationReport:
    """Crosslingual runs: single shared pool, single-Avg-column report."""
    if config.track != TRACK_CROSSLINGUAL:
        raise ConfigError(f"crosslingual_mode requires track={TRACK_CROSSLINGUAL!r}, "
                          f"got {config.track!r}")
    if config.retrieval_only:
        return run_retrieval_experiment(config)
    report, _ = run_full_pipeline(config)
    return report
