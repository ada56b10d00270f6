"""Vector production: hashed n-gram TF-IDF baseline, stores, and file format.

Three vector sources feed the retriever: this module's deterministic
baseline vectorizer (sparse, hashed character n-grams), binary embedding
files written by external neural models, and the remote HTTP client in
:mod:`claimstage.remote`. All vectors are float32.
"""

from __future__ import annotations

import logging
import struct
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from hashlib import blake2b
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, FormatError, StoreLookupError, ValidationError

log = logging.getLogger(__name__)

#: Relative slack accepted as "already unit norm"; keeps normalize exactly
#: idempotent (a re-normalized vector re-enters through this fast path).
_UNIT_TOL = 1e-6


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    """Return the unit-norm copy of ``vec``; zero vectors pass through unchanged."""
    arr = np.asarray(vec, dtype=np.float32)
    norm = float(np.linalg.norm(arr.astype(np.float64)))
    if norm == 0.0 or abs(norm - 1.0) <= _UNIT_TOL:
        return arr
    return (arr / norm).astype(np.float32)


def l2_normalize_rows(matrix):
    """Row-normalize a dense array or CSR matrix; returns (matrix, zero_row_indices).

    Norms are computed in float64 so that already-unit rows reliably hit the
    idempotence fast path.
    """
    if sp.issparse(matrix):
        m = matrix.tocsr()
        m64 = m.astype(np.float64)
        norms = np.sqrt(np.asarray(m64.multiply(m64).sum(axis=1)).ravel())
        zero = np.flatnonzero(norms == 0.0)
        scale = np.ones_like(norms)
        needs = (np.abs(norms - 1.0) > _UNIT_TOL) & (norms != 0.0)
        scale[needs] = 1.0 / norms[needs]
        out = sp.diags(scale).dot(m64).astype(np.float32)
        return out.tocsr(), zero
    m = np.asarray(matrix, dtype=np.float32)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m, dtype=np.float64))
    zero = np.flatnonzero(norms == 0.0)
    scale = np.ones_like(norms)
    needs = (np.abs(norms - 1.0) > _UNIT_TOL) & (norms != 0.0)
    scale[needs] = 1.0 / norms[needs]
    out = (m.astype(np.float64) * scale[:, None]).astype(np.float32)
    out[~needs] = m[~needs]
    return out, zero


def is_zero_vector(vec) -> bool:
    if sp.issparse(vec):
        return vec.nnz == 0
    return not np.any(np.asarray(vec))


@dataclass(frozen=True)
class BaselineVectorizerConfig:
    """Hashed character n-gram TF-IDF settings (stand-in for neural embedders)."""

    ngram_min: int = 3
    ngram_max: int = 5
    hash_dim: int = 2**18

    def __post_init__(self) -> None:
        if self.ngram_min < 1 or self.ngram_min > self.ngram_max:
            raise ValidationError(f"bad n-gram range [{self.ngram_min}, {self.ngram_max}]")
        if self.hash_dim <= 0 or self.hash_dim & (self.hash_dim - 1) != 0:
            raise ValidationError(f"hash_dim must be a power of two, got {self.hash_dim}")


def _fold(text: str) -> str:
    return unicodedata.normalize("NFKC", text).lower()


def _gram_buckets(text: str, config: BaselineVectorizerConfig) -> list[int]:
    """Hash every character n-gram of the folded text into buckets."""
    folded = _fold(text)
    mask = config.hash_dim - 1
    buckets: list[int] = []
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(folded) - n + 1):
            digest = blake2b(folded[i : i + n].encode("utf-8"), digest_size=8).digest()
            buckets.append(int.from_bytes(digest, "little") & mask)
    return buckets


class BaselineVectorizer:
    """TF-IDF over hashed character n-grams; immutable once fitted.

    Sublinear TF (1 + ln tf) and smoothed IDF (ln((1+N)/(1+df)) + 1); unseen
    buckets take the df=0 value of the same formula. Collisions between
    n-grams sharing a bucket are accepted.
    """

    def __init__(self, config: BaselineVectorizerConfig, doc_count: int, df: np.ndarray):
        self.config = config
        self.doc_count = doc_count
        self._df = df
        self._idf = (np.log((1.0 + doc_count) / (1.0 + df)) + 1.0).astype(np.float64)

    @classmethod
    def fit(
        cls, documents: Iterable[str], config: BaselineVectorizerConfig | None = None
    ) -> "BaselineVectorizer":
        """Compute document frequencies over the document pool."""
        config = config or BaselineVectorizerConfig()
        df = np.zeros(config.hash_dim, dtype=np.int64)
        count = 0
        any_grams = False
        for doc in documents:
            count += 1
            buckets = set(_gram_buckets(doc, config))
            if buckets:
                any_grams = True
                df[list(buckets)] += 1
        if count == 0:
            raise ValidationError("cannot fit baseline vectorizer on an empty document list")
        if not any_grams:
            raise ValidationError("all documents are empty after folding; nothing to index")
        return cls(config, count, df)

    @property
    def dim(self) -> int:
        return self.config.hash_dim

    def idf(self, bucket: int) -> float:
        return float(self._idf[bucket])

    def embed_text(self, text: str) -> sp.csr_matrix:
        """One L2-normalized sparse row; texts without n-grams give a zero row."""
        return self.embed_texts([text])

    def embed_texts(self, texts: Iterable[str]) -> sp.csr_matrix:
        """Vectorize texts into an L2-normalized CSR matrix, one row per text."""
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for text in texts:
            counts = Counter(_gram_buckets(text, self.config))
            for bucket in sorted(counts):
                indices.append(bucket)
                data.append((1.0 + np.log(counts[bucket])) * self._idf[bucket])
            indptr.append(len(indices))
        matrix = sp.csr_matrix(
            (np.asarray(data, dtype=np.float64), indices, indptr),
            shape=(len(indptr) - 1, self.dim),
        )
        normalized, zero = l2_normalize_rows(matrix)
        if len(zero):
            log.warning("%d text(s) produced zero vectors (too short or empty)", len(zero))
        return normalized

    def state_digest(self) -> str:
        """Stable fingerprint of the fitted state (config + df table)."""
        h = blake2b(digest_size=16)
        h.update(
            f"{self.config.ngram_min},{self.config.ngram_max},{self.config.hash_dim},"
            f"{self.doc_count}".encode()
        )
        h.update(self._df.tobytes())
        return h.hexdigest()


class Namespace(IntEnum):
    """Record id namespaces inside an embedding store."""

    POST = 0
    FACT_CHECK = 1


@dataclass
class EmbeddingStore:
    """Dense float32 vectors keyed by (namespace, id); immutable by convention.

    Vectors are stored verbatim (no normalization) so that file round-trips
    are lossless; consumers normalize at lookup/index time. Equality compares
    dim and vector content, not provenance.
    """

    dim: int
    provenance: str = "baseline"
    _vectors: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValidationError(f"store dim must be positive, got {self.dim}")

    def add(self, namespace: Namespace, record_id: int, vec: np.ndarray) -> None:
        arr = np.ascontiguousarray(vec, dtype=np.float32)
        if arr.ndim != 1 or arr.shape[0] != self.dim:
            raise ContractError(f"vector for id {record_id} has shape {arr.shape}, want ({self.dim},)")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"vector for id {record_id} has non-finite components")
        key = (int(namespace), int(record_id))
        if key in self._vectors:
            raise ValidationError(f"duplicate vector for namespace={namespace} id={record_id}")
        self._vectors[key] = arr

    def get(self, namespace: Namespace, record_id: int) -> np.ndarray:
        try:
            return self._vectors[(int(namespace), int(record_id))]
        except KeyError:
            raise StoreLookupError(
                f"no vector for namespace={Namespace(namespace).name} id={record_id}"
            ) from None

    def embed(self, namespace: Namespace, record_id: int) -> np.ndarray:
        """L2-normalized lookup."""
        return l2_normalize(self.get(namespace, record_id))

    def ids(self, namespace: Namespace) -> list[int]:
        ns = int(namespace)
        return sorted(i for (n, i) in self._vectors if n == ns)

    def __contains__(self, key: tuple[Namespace, int]) -> bool:
        return (int(key[0]), int(key[1])) in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if self.dim != other.dim or self._vectors.keys() != other._vectors.keys():
            return False
        return all(
            np.array_equal(vec, other._vectors[key]) for key, vec in self._vectors.items()
        )


# --- embedding file format --------------------------------------------------
#
# Little-endian throughout:
#   magic "CSEB" | u32 version=1 | u32 dim | u64 count
#   then `count` records of: u8 namespace (0=post, 1=fact_check) | u64 id |
#   dim float32 components. Bit-exact: load(save(store)) preserves every byte
# of every vector.

MAGIC = b"CSEB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<BQ")


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store to the binary embedding format (records sorted by key)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, store.dim, len(store)))
        for ns, record_id in sorted(store._vectors):
            fh.write(_RECORD_HEAD.pack(ns, record_id))
            fh.write(store._vectors[(ns, record_id)].astype("<f4").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read a binary embedding file; provenance becomes ``file:<path>``."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError(f"{path}: truncated header at byte {len(header)}")
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dim <= 0:
            raise FormatError(f"{path}: non-positive dim {dim}")
        store = EmbeddingStore(dim=dim, provenance=f"file:{path}")
        vec_bytes = dim * 4
        offset = _HEADER.size
        for _ in range(count):
            head = fh.read(_RECORD_HEAD.size)
            if len(head) < _RECORD_HEAD.size:
                raise FormatError(f"{path}: truncated record header at byte {offset + len(head)}")
            ns, record_id = _RECORD_HEAD.unpack(head)
            offset += _RECORD_HEAD.size
            payload = fh.read(vec_bytes)
            if len(payload) < vec_bytes:
                raise FormatError(f"{path}: truncated vector at byte {offset + len(payload)}")
            offset += vec_bytes
            if ns not in (int(Namespace.POST), int(Namespace.FACT_CHECK)):
                raise FormatError(f"{path}: unknown namespace byte {ns}")
            vec = np.frombuffer(payload, dtype="<f4").astype(np.float32)
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}: non-finite components in record id {record_id}")
            store._vectors[(ns, record_id)] = vec
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: {count} records read but trailing bytes remain at byte {offset}")
    return store


def store_from_texts(
    vectorizer_or_fetch,
    texts_by_key: Mapping[tuple[Namespace, int], str],
    provenance: str,
) -> EmbeddingStore:
    """Build a dense store by embedding composed texts (remote or small dims)."""
    keys = sorted(texts_by_key)
    if not keys:
        raise ValidationError("cannot build an embedding store from zero texts")
    texts = [texts_by_key[k] for k in keys]
    vectors = vectorizer_or_fetch(texts)
    vectors = np.asarray(vectors, dtype=np.float32)
    store = EmbeddingStore(dim=vectors.shape[1], provenance=provenance)
    for key, vec in zip(keys, vectors):
        store.add(key[0], key[1], vec)
    return store
