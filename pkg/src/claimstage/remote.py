"""HTTP client for external embedding services.

Protocol: POST ``<endpoint>/embed`` with ``{"model": str, "texts": [str]}``;
the service answers ``{"dim": int, "vectors": [[float], ...]}`` with one
vector per input text, in order. Any embedding server can sit behind this.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from .errors import RemoteContractError, RemoteTransportError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class RemoteEmbedderConfig:
    endpoint: str
    model: str
    batch_size: int = DEFAULT_BATCH_SIZE
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff_base: float = 0.5       # seconds; doubles per retry
    timeout: float = 30.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")


class RemoteEmbedder:
    """Batched, retrying client with an in-flight request cap.

    Instances are safe to share across threads; the semaphore bounds
    concurrent requests against the service.
    """

    def __init__(self, config: RemoteEmbedderConfig):
        self.config = config
        self._gate = threading.BoundedSemaphore(config.max_in_flight)
        self._dim: int | None = None
        self._dim_lock = threading.Lock()

    @property
    def provenance(self) -> str:
        return f"remote:{self.config.endpoint}+{self.config.model}"

    def fetch_batch(self, texts: list[str]) -> np.ndarray:
        """Embed one batch; empty input returns an empty array without a call."""
        if len(texts) > self.config.batch_size:
            raise ValidationError(
                f"batch of {len(texts)} exceeds configured max {self.config.batch_size}"
            )
        if not texts:
            return np.zeros((0, self._dim or 0), dtype=np.float32)
        return self._fetch_with_retries(texts)

    def embed_all(self, texts: list[str]) -> np.ndarray:
        """Embed any number of texts by chunking into batches."""
        if not texts:
            return np.zeros((0, self._dim or 0), dtype=np.float32)
        chunks = [
            self.fetch_batch(texts[i : i + self.config.batch_size])
            for i in range(0, len(texts), self.config.batch_size)
        ]
        return np.vstack(chunks)

    def _fetch_with_retries(self, texts: list[str]) -> np.ndarray:
        """One POST per attempt; transport and contract failures share the retry policy."""
        url = self.config.endpoint.rstrip("/") + "/embed"
        body = {"model": self.config.model, "texts": texts}
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                log.info("retrying embed call in %.2fs (attempt %d)", delay, attempt + 1)
                time.sleep(delay)
            try:
                with self._gate:
                    response = requests.post(url, json=body, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = RemoteTransportError(f"POST {url} failed: {exc}")
                continue
            if response.status_code // 100 != 2:
                last_error = RemoteTransportError(
                    f"POST {url} returned {response.status_code}: {response.text[:200]}"
                )
                continue
            try:
                payload = response.json()
            except ValueError as exc:
                last_error = RemoteContractError(f"non-JSON response from {url}: {exc}")
                continue
            try:
                return self._validate(payload, len(texts))
            except RemoteContractError as exc:
                last_error = exc
                continue
        assert last_error is not None
        raise last_error

    def _validate(self, payload: dict, expected: int) -> np.ndarray:
        if not isinstance(payload, dict) or "dim" not in payload or "vectors" not in payload:
            raise RemoteContractError(f"response missing dim/vectors keys: {list(payload)[:5]}")
        dim = payload["dim"]
        vectors = payload["vectors"]
        if not isinstance(dim, int) or dim <= 0:
            raise RemoteContractError(f"bad dim in response: {dim!r}")
        if not isinstance(vectors, list) or len(vectors) != expected:
            got = len(vectors) if isinstance(vectors, list) else type(vectors).__name__
            raise RemoteContractError(
                f"partial response: expected {expected} vectors, got {got}"
            )
        try:
            arr = np.asarray(vectors, dtype=np.float32)
        except ValueError as exc:
            raise RemoteContractError(f"ragged or non-numeric vector block: {exc}") from None
        if arr.ndim != 2 or arr.shape != (expected, dim):
            raise RemoteContractError(f"vector block has shape {arr.shape}, want ({expected}, {dim})")
        if not np.all(np.isfinite(arr)):
            raise RemoteContractError("response contains non-finite components")
        with self._dim_lock:
            if self._dim is None:
                self._dim = dim
            elif self._dim != dim:
                raise RemoteContractError(
                    f"dim changed across batches: first {self._dim}, now {dim}"
                )
        return arr
