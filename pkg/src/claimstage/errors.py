"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration/validation problems exit
with 1, stage failures during a run exit with 2.
"""

from __future__ import annotations


class ClaimStageError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ClaimStageError):
    """An input value violates a documented invariant."""


class ConfigError(ValidationError):
    """A configuration file or CLI argument is unusable."""


class GrammarError(ValidationError):
    """A tuple-literal field does not match the field grammar."""


class RecordError(ValidationError):
    """A single CSV/TSV row could not be parsed.

    Carries enough context (row number, field, raw text) to locate the
    offending input.
    """

    def __init__(self, row: int, field: str, raw: str, reason: str):
        self.row = row
        self.field = field
        self.raw = raw
        self.reason = reason
        super().__init__(f"row {row}, field {field!r}: {reason} (raw: {raw!r})")


class CorpusError(ValidationError):
    """A corpus-level problem that invalidates the whole parse (e.g. duplicate ids)."""


class CorpusLookupError(ClaimStageError):
    """An id or language was requested that the corpus/split does not contain."""


class StoreLookupError(ClaimStageError):
    """A vector was requested for an id the embedding store does not hold."""


class FormatError(ClaimStageError):
    """An embedding file is corrupt, truncated, or of the wrong version."""


class ContractError(ClaimStageError):
    """Two components disagree on an interchange contract (dims, list sizes, ...)."""


class IndexBuildError(ClaimStageError):
    """The retrieval index could not be built over the requested pool."""


class RemoteError(ClaimStageError):
    """Base class for remote embedding service failures."""


class RemoteTransportError(RemoteError):
    """The remote endpoint could not be reached or kept returning non-2xx."""


class RemoteContractError(RemoteError):
    """The remote endpoint answered, but the payload violates the protocol."""


class MissingScoreError(ClaimStageError):
    """A reranker scorer has no score for a (post, fact-check) pair."""


class ScoreCoverageError(ClaimStageError):
    """An external score table does not cover the candidate set being reranked."""


class WeightError(ValidationError):
    """Model weights could not be derived from the given dev scores."""


class EvalError(ValidationError):
    """Predictions and gold pairs are inconsistent with each other."""


class StageError(ClaimStageError):
    """A pipeline stage failed; wraps the cause and names the stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
