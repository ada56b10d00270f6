"""Stage 3: rank-level weighted voting over the rerankers' Top-10 lists.

Default point scheme is weighted Borda over the Top-10 window: a candidate
at 1-based rank r earns weight x (11 - r) points from each model that lists
it. Reciprocal-rank fusion and uniform approval voting are available behind
the ``scheme`` switch for comparison. Weights derive from each model's
dev-set Success@10, proportionally by default.

Votes are always tallied in sorted model-name order, so the output is exactly
invariant under permutation of the input mapping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ContractError, ValidationError, WeightError
from .retriever import STAGE_FUSED, RankedList

log = logging.getLogger(__name__)

VOTE_WINDOW = 10        # the Top-10 window all voting operates on
RRF_K = 60              # standard reciprocal-rank-fusion constant

SCHEME_BORDA = "borda"
SCHEME_RRF = "rrf"
SCHEME_APPROVAL = "approval"
SCHEMES = (SCHEME_BORDA, SCHEME_RRF, SCHEME_APPROVAL)

WEIGHT_PROPORTIONAL = "proportional"
WEIGHT_SOFTMAX = "softmax"


@dataclass(frozen=True)
class ModelWeight:
    """A model's dev-set Success@10 and the voting weight derived from it."""

    model_name: str
    dev_s_at_10: float
    weight: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.dev_s_at_10 <= 1.0:
            raise ValidationError(f"{self.model_name}: dev S@10 {self.dev_s_at_10} outside [0, 1]")
        if not self.weight > 0.0:
            raise ValidationError(f"{self.model_name}: weight must be positive, got {self.weight}")


@dataclass
class VoteTally:
    """Accumulated support for one candidate across models."""

    points: float = 0.0
    supporters: int = 0
    score_sum: float = 0.0


def compute_weights(
    dev_scores: Mapping[str, float],
    scheme: str = WEIGHT_PROPORTIONAL,
    temperature: float = 0.05,
) -> list[ModelWeight]:
    """Turn dev-set S@10 values into voting weights, higher score -> higher weight.

    Proportional weighting drops models whose dev score is exactly zero (they
    would carry no vote anyway); if every score is zero there is no signal to
    weight by and the call fails.
    """
    if not dev_scores:
        raise WeightError("need at least one model to weight")
    for name, score in dev_scores.items():
        if not 0.0 <= score <= 1.0:
            raise WeightError(f"{name}: dev S@10 {score} outside [0, 1]")
    names = sorted(dev_scores)
    if scheme == WEIGHT_PROPORTIONAL:
        total = sum(dev_scores[n] for n in names)
        if total == 0.0:
            raise WeightError("all dev scores are zero; no signal to weight by")
        dropped = [n for n in names if dev_scores[n] == 0.0]
        if dropped:
            log.warning("dropping zero-score model(s) from voting: %s", ", ".join(dropped))
        return [
            ModelWeight(n, dev_scores[n], dev_scores[n] / total)
            for n in names
            if dev_scores[n] > 0.0
        ]
    if scheme == WEIGHT_SOFTMAX:
        if temperature <= 0.0:
            raise WeightError(f"softmax temperature must be positive, got {temperature}")
        peak = max(dev_scores[n] for n in names)
        exps = {n: math.exp((dev_scores[n] - peak) / temperature) for n in names}
        total = sum(exps[n] for n in names)
        return [ModelWeight(n, dev_scores[n], exps[n] / total) for n in names]
    raise WeightError(f"unknown weight scheme {scheme!r}")


def _as_weight_map(weights) -> dict[str, float]:
    if isinstance(weights, Mapping):
        mapping = dict(weights)
    else:
        mapping = {w.model_name: w.weight for w in weights}
    for name, value in mapping.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValidationError(f"model {name!r} has non-positive weight {value!r}")
    return mapping


def _points(scheme: str, weight: float, rank: int) -> float:
    if scheme == SCHEME_BORDA:
        return weight * (VOTE_WINDOW + 1 - rank)
    if scheme == SCHEME_RRF:
        return weight / (RRF_K + rank)
    return weight  # approval


def tally_votes(
    lists: Mapping[str, RankedList],
    weights,
    scheme: str = SCHEME_BORDA,
) -> dict[int, VoteTally]:
    """Accumulate per-candidate points/supporters over all models' lists."""
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown voting scheme {scheme!r}")
    if not lists:
        raise ValidationError("no ranked lists to fuse")
    weight_map = _as_weight_map(weights)
    post_ids = {rl.post_id for rl in lists.values()}
    if len(post_ids) != 1:
        raise ValidationError(f"lists to fuse belong to different posts: {sorted(post_ids)}")
    unknown = sorted(set(lists) - set(weight_map))
    if unknown:
        raise ValidationError(f"no weight for model(s): {', '.join(unknown)}")
    tallies: dict[int, VoteTally] = {}
    for model in sorted(lists):  # canonical order: exact permutation invariance
        ranked = lists[model]
        if len(ranked) > VOTE_WINDOW:
            raise ContractError(
                f"{model}: ranked list has {len(ranked)} entries, voting window is {VOTE_WINDOW}"
            )
        weight = weight_map[model]
        for rank, (fc_id, score) in enumerate(ranked.entries, start=1):
            tally = tallies.setdefault(fc_id, VoteTally())
            tally.points += _points(scheme, weight, rank)
            tally.supporters += 1
            tally.score_sum += score
    return tallies


def weighted_vote(
    lists: Mapping[str, RankedList],
    weights,
    scheme: str = SCHEME_BORDA,
) -> RankedList:
    """Fuse the models' Top-10 lists for one post into a final Top-10.

    Candidates are ordered by total points, then supporter count, then
    ascending fact_check_id.
    """
    tallies = tally_votes(lists, weights, scheme)
    post_id = next(iter(lists.values())).post_id
    order = sorted(
        tallies.items(), key=lambda item: (-item[1].points, -item[1].supporters, item[0])
    )
    entries = tuple((fc_id, tally.points) for fc_id, tally in order[:VOTE_WINDOW])
    return RankedList(post_id=post_id, entries=entries, stage=STAGE_FUSED)


def fuse_run(
    per_model_predictions: Mapping[str, Mapping[int, RankedList]],
    weights,
    scheme: str = SCHEME_BORDA,
) -> dict[int, RankedList]:
    """Apply weighted voting per post across a full run's predictions.

    Every model must cover the same post set; anything else is a wiring error
    upstream and is reported per model.
    """
    if not per_model_predictions:
        raise ValidationError("no model predictions to fuse")
    models = sorted(per_model_predictions)
    post_sets = {m: set(per_model_predictions[m]) for m in models}
    universe = set().union(*post_sets.values())
    problems = []
    for m in models:
        missing = universe - post_sets[m]
        if missing:
            shown = ", ".join(str(p) for p in sorted(missing)[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            problems.append(f"{m} is missing posts: {shown}{more}")
    if problems:
        raise ValidationError("; ".join(problems))
    fused: dict[int, RankedList] = {}
    for post_id in sorted(universe):
        per_post = {m: per_model_predictions[m][post_id] for m in models}
        fused[post_id] = weighted_vote(per_post, weights, scheme)
    return fused
