"""Success@K scoring, macro averaging, and report rendering.

All internal math is full precision; values are rounded half-up to two
decimals only when rendered (or when an operation is documented to return a
rendered value). Half-up rounding goes through :mod:`decimal` because binary
floats make ``round()``/``format()`` unreliable at the .xx5 boundaries the
published tables sit on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping

from .errors import EvalError, ValidationError
from .records import LANGUAGE_ORDER, PairSet
from .retriever import RankedList

TRACK_MONOLINGUAL = "monolingual"
TRACK_CROSSLINGUAL = "crosslingual"
TRACKS = (TRACK_MONOLINGUAL, TRACK_CROSSLINGUAL)


def round_half_up(value: float, places: int = 2) -> float:
    """Round half away from zero at ``places`` decimals, via exact decimal math."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def fmt2(value: float) -> str:
    """Render a percent value with exactly two decimals, half-up."""
    return str(Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


class PredictionSet:
    """Validated post_id -> ordered prediction lists (no duplicates within a list)."""

    def __init__(self, by_post: Mapping[int, Iterable[int]]):
        cleaned: dict[int, tuple[int, ...]] = {}
        for post_id, ids in by_post.items():
            id_tuple = tuple(int(i) for i in ids)
            if len(id_tuple) != len(set(id_tuple)):
                raise ValidationError(f"post {post_id}: duplicate ids in prediction list")
            cleaned[int(post_id)] = id_tuple
        self._by_post = cleaned

    @classmethod
    def from_ranked(cls, lists: Mapping[int, RankedList]) -> "PredictionSet":
        return cls({post_id: rl.ids() for post_id, rl in lists.items()})

    @property
    def by_post(self) -> dict[int, tuple[int, ...]]:
        return dict(self._by_post)

    def __len__(self) -> int:
        return len(self._by_post)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PredictionSet) and self._by_post == other._by_post

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._by_post.items())))


def success_at_k(predictions: PredictionSet, gold: PairSet, k: int = 10) -> float:
    """Fraction of posts whose top-k predictions hit at least one gold fact-check.

    Every predicted post must have gold pairs; a post without any gold does
    not belong in an evaluation split and is reported as an error.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not predictions.by_post:
        raise EvalError("no predictions to evaluate")
    hits = 0
    for post_id in sorted(predictions.by_post):
        golds = gold.golds_for(post_id)
        if not golds:
            raise EvalError(f"post {post_id} has predictions but no gold pairs")
        if any(fc in golds for fc in predictions.by_post[post_id][:k]):
            hits += 1
    return hits / len(predictions.by_post)


def success_curve(
    predictions: PredictionSet, gold: PairSet, ks: Iterable[int] = (1, 3, 5, 10)
) -> dict[int, float]:
    """Diagnostic S@k sweep; monotone non-decreasing in k by construction."""
    return {k: success_at_k(predictions, gold, k) for k in sorted(set(ks))}


def macro_average(per_language: Mapping[str, float]) -> float:
    """Unweighted mean of per-language percents, rendered to two decimals."""
    if not per_language:
        raise ValidationError("macro average over an empty language map")
    total = sum((Decimal(str(v)) for v in per_language.values()), Decimal(0))
    mean = total / Decimal(len(per_language))
    return float(mean.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def improvement(fused: float, best_individual: float) -> float:
    """Percentage-point gain of the fused result over the best single model."""
    delta = Decimal(str(fused)) - Decimal(str(best_individual))
    return float(delta.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ReportRow:
    """One table row: a model (or plan variant) with per-language percents."""

    model: str
    plan: str | None = None
    by_language: Mapping[str, float] = field(default_factory=dict)
    avg: float | None = None     # explicit for single-column (crosslingual) rows

    def average(self) -> float:
        if self.by_language:
            return macro_average(self.by_language)
        if self.avg is None:
            raise ValidationError(f"row {self.model!r} has neither languages nor an avg")
        return round_half_up(self.avg)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-language S@10 values for one track, renderable as a paper-style table."""

    track: str
    rows: tuple[ReportRow, ...]
    k: int = 10

    def __post_init__(self) -> None:
        if self.track not in TRACKS:
            raise ValidationError(f"unknown track {self.track!r}")

    def languages(self) -> list[str]:
        seen: set[str] = set()
        for row in self.rows:
            seen.update(row.by_language)
        known = [lang for lang in LANGUAGE_ORDER if lang in seen]
        extra = sorted(seen - set(LANGUAGE_ORDER))
        return known + extra

    def row(self, model: str) -> ReportRow:
        for candidate in self.rows:
            if candidate.model == model:
                return candidate
        raise ValidationError(f"report has no row for model {model!r}")


def render_report(report: EvaluationReport) -> str:
    """Deterministic fixed-width text table: Avg first, then the paper's language order."""
    languages = report.languages()
    header = ["Model", "Plan", "Avg", *languages]
    body: list[list[str]] = []
    for row in report.rows:
        cells = [row.model, row.plan or "-", fmt2(row.average())]
        for lang in languages:
            value = row.by_language.get(lang)
            cells.append(fmt2(value) if value is not None else "-")
        body.append(cells)
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    sep = "-+-".join("-" * w for w in widths)
    lines = [
        " | ".join(cell.ljust(width) for cell, width in zip(header, widths)),
        sep,
    ]
    for cells in body:
        lines.append(" | ".join(cell.ljust(width) for cell, width in zip(cells, widths)))
    title = f"track: {report.track} (Success@{report.k}, %)"
    return "\n".join([title, *lines]) + "\n"


def report_to_json_dict(report: EvaluationReport) -> dict:
    return {
        "track": report.track,
        "k": report.k,
        "rows": [
            {
                "model": row.model,
                "plan": row.plan,
                "by_language": {lang: row.by_language[lang] for lang in sorted(row.by_language)},
                "avg": row.avg,
                "rendered_avg": fmt2(row.average()),
            }
            for row in report.rows
        ],
    }


def report_from_json_dict(obj: Mapping) -> EvaluationReport:
    rows = tuple(
        ReportRow(
            model=r["model"],
            plan=r.get("plan"),
            by_language=dict(r.get("by_language", {})),
            avg=r.get("avg"),
        )
        for r in obj["rows"]
    )
    return EvaluationReport(track=obj["track"], rows=rows, k=obj.get("k", 10))


# --- submission files --------------------------------------------------------
#
# One JSON object per track: {"<post_id>": [fact_check_id x <=10], ...}
# written with keys in ascending numeric order so identical runs are
# byte-identical.


def write_submission(predictions: PredictionSet, path: str | Path) -> None:
    ordered = {str(post_id): list(predictions.by_post[post_id])
               for post_id in sorted(predictions.by_post)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ordered, fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


def read_submission(path: str | Path) -> PredictionSet:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: submission must be a JSON object")
    try:
        return PredictionSet({int(post): ids for post, ids in obj.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: bad submission payload: {exc}") from None
