"""Stage 2: re-score the stage-1 candidates and keep the Top-10.

Scorers are pluggable: external neural rerankers hand over TSV score files
(:func:`load_scores`), and a deterministic character-3-gram Jaccard baseline
covers runs without any external model. Re-ranking never touches the full
pool, only the candidate window from stage 1.
"""

from __future__ import annotations

import csv
import logging
import math
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol

from .errors import MissingScoreError, RecordError, ScoreCoverageError, ValidationError
from .retriever import STAGE_RERANK, RankedList

log = logging.getLogger(__name__)

SCORE_COLUMNS = ("post_id", "fact_check_id", "score")

MISSING_FAIL = "fail"
MISSING_FALLBACK = "fallback"


class Scorer(Protocol):
    """Anything that can score a (post, fact-check) pair."""

    model_name: str

    def score(self, post_id: int, fact_check_id: int) -> float: ...


@dataclass(frozen=True)
class RerankerSpec:
    """How one reranker is realized: an external score file or the baseline."""

    kind: str                      # "score_file" | "lexical_baseline"
    model_name: str
    path: str | None = None        # score_file only
    top_n: int = 10

    def __post_init__(self) -> None:
        if self.kind not in ("score_file", "lexical_baseline"):
            raise ValidationError(f"unknown reranker kind {self.kind!r}")
        if self.kind == "score_file" and not self.path:
            raise ValidationError(f"reranker {self.model_name!r}: score_file needs a path")
        if self.top_n < 1:
            raise ValidationError(f"top_n must be >= 1, got {self.top_n}")


class ScoreTable:
    """Immutable (post_id, fact_check_id) -> score map for one model."""

    def __init__(self, model_name: str, scores: Mapping[tuple[int, int], float],
                 duplicate_count: int = 0):
        self.model_name = model_name
        self._scores = dict(scores)
        self.duplicate_count = duplicate_count
        for key, value in self._scores.items():
            if not math.isfinite(value):
                raise ValidationError(f"non-finite score for pair {key}")

    def score(self, post_id: int, fact_check_id: int) -> float:
        try:
            return self._scores[(post_id, fact_check_id)]
        except KeyError:
            raise MissingScoreError(
                f"{self.model_name}: no score for post {post_id}, fact-check {fact_check_id}"
            ) from None

    def __len__(self) -> int:
        return len(self._scores)


def load_scores(stream: Iterable[str], model_name: str) -> ScoreTable:
    """Parse a TSV score file; duplicate keys keep the last row, with a warning."""
    reader = csv.reader(stream, delimiter="\t")
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{model_name}: empty score stream, no header") from None
    if tuple(h.strip() for h in header) != SCORE_COLUMNS:
        raise ValidationError(
            f"{model_name}: bad score header {header!r}, want {list(SCORE_COLUMNS)}"
        )
    scores: dict[tuple[int, int], float] = {}
    duplicates = 0
    for line_no, row in enumerate(reader, 2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise RecordError(line_no, "row", "\t".join(row), f"expected 3 columns, got {len(row)}")
        try:
            post_id = int(row[0])
            fc_id = int(row[1])
        except ValueError:
            raise RecordError(line_no, "post_id/fact_check_id", "\t".join(row[:2]),
                              "ids must be integers") from None
        if post_id < 0 or fc_id < 0:
            raise RecordError(line_no, "post_id/fact_check_id", "\t".join(row[:2]),
                              "ids must be non-negative")
        try:
            value = float(row[2])
        except ValueError:
            raise RecordError(line_no, "score", row[2], "not a number") from None
        if not math.isfinite(value):
            raise RecordError(line_no, "score", row[2], "score must be finite")
        key = (post_id, fc_id)
        if key in scores:
            duplicates += 1
        scores[key] = value
    if duplicates:
        log.warning("%s: %d duplicate (post, fact-check) rows, last value wins",
                    model_name, duplicates)
    return ScoreTable(model_name, scores, duplicate_count=duplicates)


def _char_3grams(text: str) -> frozenset[str]:
    folded = unicodedata.normalize("NFKC", text).lower()
    return frozenset(folded[i : i + 3] for i in range(len(folded) - 2))


def lexical_overlap_score(query_text: str, doc_text: str) -> float:
    """Jaccard similarity of character 3-gram sets (NFKC + lowercase), in [0, 1]."""
    q = _char_3grams(query_text)
    d = _char_3grams(doc_text)
    union = len(q | d)
    if union == 0:
        return 0.0
    return len(q & d) / union


class LexicalScorer:
    """Deterministic overlap baseline over composed query/document texts."""

    def __init__(self, query_texts: Mapping[int, str], doc_texts: Mapping[int, str],
                 model_name: str = "lexical-3gram"):
        self.model_name = model_name
        self._query_texts = query_texts
        self._doc_texts = doc_texts
        self._query_grams: dict[int, frozenset[str]] = {}
        self._doc_grams: dict[int, frozenset[str]] = {}

    def _grams(self, cache: dict, texts: Mapping[int, str], key: int, what: str) -> frozenset[str]:
        grams = cache.get(key)
        if grams is None:
            if key not in texts:
                raise MissingScoreError(f"{self.model_name}: no {what} text for id {key}")
            grams = _char_3grams(texts[key])
            cache[key] = grams
        return grams

    def score(self, post_id: int, fact_check_id: int) -> float:
        q = self._grams(self._query_grams, self._query_texts, post_id, "query")
        d = self._grams(self._doc_grams, self._doc_texts, fact_check_id, "document")
        union = len(q | d)
        return len(q & d) / union if union else 0.0


def rerank(
    candidates: RankedList,
    scorer: Scorer,
    top_n: int = 10,
    *,
    missing: str = MISSING_FAIL,
) -> RankedList:
    """Reorder stage-1 candidates by scorer score and truncate to ``top_n``.

    ``missing`` picks the policy for pairs the scorer cannot score:
    ``"fail"`` raises (the default, surfacing incomplete score files early);
    ``"fallback"`` keeps the retrieval score for that pair and warns.
    """
    if top_n < 1:
        raise ValidationError(f"top_n must be >= 1, got {top_n}")
    if missing not in (MISSING_FAIL, MISSING_FALLBACK):
        raise ValidationError(f"unknown missing-score policy {missing!r}")
    rescored: list[tuple[int, float]] = []
    fallbacks = 0
    for fc_id, retrieval_score in candidates.entries:
        try:
            value = scorer.score(candidates.post_id, fc_id)
        except MissingScoreError:
            if missing == MISSING_FAIL:
                raise ScoreCoverageError(
                    f"{scorer.model_name}: candidate pair "
                    f"({candidates.post_id}, {fc_id}) has no score"
                ) from None
            value = retrieval_score
            fallbacks += 1
        if not math.isfinite(value):
            raise ValidationError(
                f"{scorer.model_name}: non-finite score for ({candidates.post_id}, {fc_id})"
            )
        rescored.append((fc_id, value))
    if fallbacks:
        log.warning("post %d: %d candidate(s) kept their retrieval score (no rerank score)",
                    candidates.post_id, fallbacks)
    rescored.sort(key=lambda item: (-item[1], item[0]))
    return RankedList(
        post_id=candidates.post_id,
        entries=tuple(rescored[:top_n]),
        stage=STAGE_RERANK,
    )
