"""Stage 1: exact brute-force cosine top-K over the fact-check pool.

No approximate search: pools at shared-task scale (≤ ~272k documents) are
tractable exactly, and exactness keeps every downstream number reproducible.
Ties are broken by ascending fact_check_id, never by insertion order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from .embedder import EmbeddingStore, Namespace, l2_normalize, l2_normalize_rows
from .errors import ContractError, IndexBuildError, ValidationError

log = logging.getLogger(__name__)

STAGE_RETRIEVAL = "retrieval"
STAGE_RERANK = "rerank"
STAGE_FUSED = "fused"
_STAGES = (STAGE_RETRIEVAL, STAGE_RERANK, STAGE_FUSED)


@dataclass(frozen=True)
class RankedList:
    """An ordered (fact_check_id, score) list for one post."""

    post_id: int
    entries: tuple[tuple[int, float], ...]
    stage: str = STAGE_RETRIEVAL

    def __post_init__(self) -> None:
        if self.stage not in _STAGES:
            raise ValidationError(f"unknown stage tag {self.stage!r}")
        ids = [fc for fc, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValidationError(f"post {self.post_id}: duplicate ids in ranked list")
        scores = [s for _, s in self.entries]
        for a, b in zip(scores, scores[1:]):
            if b > a:
                raise ValidationError(f"post {self.post_id}: scores increase ({a} -> {b})")

    def ids(self) -> tuple[int, ...]:
        return tuple(fc for fc, _ in self.entries)

    def top(self, n: int) -> "RankedList":
        return RankedList(self.post_id, self.entries[:n], self.stage)

    def __len__(self) -> int:
        return len(self.entries)


class Index:
    """Unit-normalized vector matrix over a fact-check pool, keyed by sorted id."""

    def __init__(self, ids: np.ndarray, matrix, zero_ids: frozenset[int] = frozenset()):
        self.ids = ids
        self.matrix = matrix
        self.zero_ids = zero_ids
        self.dim = matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_vectors(cls, vectors_by_id: Mapping[int, np.ndarray] | None = None, *,
                     ids: Iterable[int] | None = None, matrix=None) -> "Index":
        """Build from an id->vector mapping, or from parallel ids/matrix arrays."""
        if vectors_by_id is not None:
            ordered = sorted(vectors_by_id)
            if not ordered:
                raise IndexBuildError("cannot build an index over an empty pool")
            stacked = np.stack([np.asarray(vectors_by_id[i], dtype=np.float32) for i in ordered])
            return cls._build(np.asarray(ordered, dtype=np.int64), stacked)
        if ids is None or matrix is None:
            raise ValidationError("provide either vectors_by_id or both ids and matrix")
        id_arr = np.asarray(list(ids), dtype=np.int64)
        if len(id_arr) == 0:
            raise IndexBuildError("cannot build an index over an empty pool")
        if len(set(id_arr.tolist())) != len(id_arr):
            raise IndexBuildError("pool ids contain duplicates")
        if matrix.shape[0] != len(id_arr):
            raise ContractError(f"{matrix.shape[0]} rows for {len(id_arr)} ids")
        order = np.argsort(id_arr, kind="stable")
        sorted_matrix = matrix[order] if not sp.issparse(matrix) else matrix[order.tolist()]
        return cls._build(id_arr[order], sorted_matrix)

    @classmethod
    def _build(cls, ids: np.ndarray, matrix) -> "Index":
        normalized, zero_rows = l2_normalize_rows(matrix)
        zero_ids = frozenset(int(ids[r]) for r in zero_rows)
        if zero_ids:
            log.warning("index has %d zero vectors (flagged, never match)", len(zero_ids))
        return cls(ids, normalized, zero_ids)


def build_index(store: EmbeddingStore, pool_ids: Iterable[int]) -> Index:
    """Index exactly ``pool_ids`` out of a store's fact-check namespace."""
    wanted = sorted(set(int(i) for i in pool_ids))
    if not wanted:
        raise IndexBuildError("cannot build an index over an empty pool")
    missing = [i for i in wanted if (Namespace.FACT_CHECK, i) not in store]
    if missing:
        shown = ", ".join(str(i) for i in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise IndexBuildError(f"store is missing fact-check vectors for ids: {shown}{more}")
    matrix = np.stack([store.get(Namespace.FACT_CHECK, i) for i in wanted])
    return Index._build(np.asarray(wanted, dtype=np.int64), matrix)


def _row_top_k(scores: np.ndarray, ids: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Exact top-k of one score row, ties broken by ascending id."""
    n = scores.shape[0]
    if k >= n:
        candidates = np.arange(n)
    else:
        part = np.argpartition(-scores, k - 1)[:k]
        threshold = scores[part].min()
        candidates = np.flatnonzero(scores >= threshold)  # keep the whole tie group
    order = candidates[np.lexsort((ids[candidates], -scores[candidates]))][:k]
    return [(int(ids[j]), float(scores[j])) for j in order]


def _query_matrix(queries: list, dim: int):
    if sp.issparse(queries[0]):
        stacked = sp.vstack(queries, format="csr")
    else:
        stacked = np.stack([np.asarray(q, dtype=np.float32).ravel() for q in queries])
    if stacked.shape[1] != dim:
        raise ContractError(f"query dim {stacked.shape[1]} != index dim {dim}")
    normalized, zero = l2_normalize_rows(stacked)
    if len(zero):
        log.warning("%d quer(ies) are zero vectors; they match nothing meaningfully", len(zero))
    return normalized


def _scores_block(index: Index, queries) -> np.ndarray:
    if sp.issparse(queries):
        if sp.issparse(index.matrix):
            return (queries @ index.matrix.T).toarray().astype(np.float32)
        return np.asarray(queries @ index.matrix.T, dtype=np.float32)
    if sp.issparse(index.matrix):
        return np.ascontiguousarray((index.matrix @ queries.T).T, dtype=np.float32)
    return queries @ index.matrix.T


def top_k(index: Index, query, k: int, *, post_id: int = -1) -> RankedList:
    """Rank the whole pool against one query and keep the best k."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    result = batch_retrieve(index, {post_id: query}, k)
    return result[post_id]


def batch_retrieve(
    index: Index,
    queries: Mapping[int, object],
    k: int,
    *,
    workers: int = 1,
    chunk_size: int = 256,
) -> dict[int, RankedList]:
    """Retrieve top-k for every query; byte-identical output for any worker count.

    The query set is partitioned into fixed chunks independent of ``workers``,
    and BLAS is pinned to one thread, so parallel and serial execution perform
    the exact same float operations.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not queries:
        return {}
    post_ids = sorted(queries)
    q_matrix = _query_matrix([queries[p] for p in post_ids], index.dim)
    chunks = [
        (start, min(start + chunk_size, len(post_ids)))
        for start in range(0, len(post_ids), chunk_size)
    ]

    def run_chunk(bounds: tuple[int, int]) -> list[tuple[int, list[tuple[int, float]]]]:
        start, stop = bounds
        block = q_matrix[start:stop]
        scores = _scores_block(index, block)
        return [
            (post_ids[start + r], _row_top_k(scores[r], index.ids, k))
            for r in range(stop - start)
        ]

    results: dict[int, RankedList] = {}
    with threadpool_limits(limits=1):
        if workers <= 1:
            chunk_outputs = [run_chunk(b) for b in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunk_outputs = list(pool.map(run_chunk, chunks))
    for output in chunk_outputs:
        for post_id, entries in output:
            results[post_id] = RankedList(
                post_id=post_id, entries=tuple(entries), stage=STAGE_RETRIEVAL
            )
    return results


# --- candidate interchange files --------------------------------------------
#
# JSON Lines, one post per line:
#   {"post_id": int, "stage": str, "candidates": [[fact_check_id, score], ...]}


def write_candidates(lists: Iterable[RankedList], path: str | Path) -> None:
    ordered = sorted(lists, key=lambda rl: rl.post_id)
    with open(path, "w", encoding="utf-8") as fh:
        for rl in ordered:
            fh.write(
                json.dumps(
                    {
                        "post_id": rl.post_id,
                        "stage": rl.stage,
                        "candidates": [[fc, score] for fc, score in rl.entries],
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_candidates(path: str | Path, default_stage: str = STAGE_RETRIEVAL) -> dict[int, RankedList]:
    out: dict[int, RankedList] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rl = RankedList(
                    post_id=int(obj["post_id"]),
                    entries=tuple((int(fc), float(s)) for fc, s in obj["candidates"]),
                    stage=obj.get("stage", default_stage),
                )
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad candidate record: {exc}") from None
            out[rl.post_id] = rl
    return out
