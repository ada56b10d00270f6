"""Typed records for posts, fact-checks, gold pairs, and task splits.

All records are immutable after construction and safe to share across
threads. The normalized JSON form used for round-tripping parsed corpora
lives here as well (``record_to_json`` / ``record_from_json``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import ValidationError

#: Column order used by the paper's tables; report rendering follows it.
LANGUAGE_ORDER = ("eng", "spa", "deu", "por", "fra", "ara", "msa", "tha", "pol", "tur")

#: Key in tasks.json that denotes the shared-pool crosslingual entry.
CROSSLINGUAL_KEY = "crosslingual"


class CompositionPlan(str, Enum):
    """Which field variants are concatenated into model input text."""

    O = "O"           # original text only
    T = "T"           # translation only (falls back to original unless strict)
    OT = "OT"         # original parts, then translation parts
    OTV = "OTV"       # OT plus the post's verdict strings

    @classmethod
    def parse(cls, value: str) -> "CompositionPlan":
        try:
            return cls(value.strip().upper().replace(",", "").replace(" ", ""))
        except ValueError:
            raise ValidationError(
                f"unknown composition plan {value!r}; expected one of O, T, OT, OTV"
            ) from None


@dataclass(frozen=True)
class LangTuple:
    """One (original, translation, language identifiers) field value."""

    original: str
    translation: str | None = None
    languages: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        for code, confidence in self.languages:
            if not code or not code.isascii() or not code.isalpha() or not code.islower():
                raise ValidationError(f"bad language code {code!r}: want non-empty lowercase ASCII")
            if not 0.0 <= confidence <= 1.0:
                raise ValidationError(f"language confidence {confidence!r} outside [0, 1]")


@dataclass(frozen=True)
class Post:
    """A social-media query record."""

    post_id: int
    ocr: tuple[LangTuple, ...] = ()
    text: LangTuple | None = None
    verdicts: tuple[str, ...] = ()
    instances: str = ""

    def __post_init__(self) -> None:
        _check_id(self.post_id, "post_id")

    @property
    def has_content(self) -> bool:
        """False for records with neither ocr nor text; such posts are flagged, not dropped."""
        return bool(self.ocr) or self.text is not None


@dataclass(frozen=True)
class FactCheck:
    """A retrievable fact-checked claim."""

    fact_check_id: int
    claim: LangTuple
    title: LangTuple | None = None
    instances: str = ""

    def __post_init__(self) -> None:
        _check_id(self.fact_check_id, "fact_check_id")


def _check_id(value: int, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValidationError(f"{name} must be a non-negative integer, got {value!r}")


class PairSet:
    """Deduplicated gold (post_id, fact_check_id) pairs; a post may have several golds."""

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        self._pairs = frozenset((int(p), int(f)) for p, f in pairs)
        by_post: dict[int, set[int]] = {}
        for post_id, fc_id in self._pairs:
            by_post.setdefault(post_id, set()).add(fc_id)
        self._by_post = {p: frozenset(s) for p, s in by_post.items()}

    @property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return self._pairs

    def golds_for(self, post_id: int) -> frozenset[int]:
        return self._by_post.get(post_id, frozenset())

    def restrict_to_posts(self, post_ids: Iterable[int]) -> "PairSet":
        wanted = set(post_ids)
        return PairSet(p for p in self._pairs if p[0] in wanted)

    def __len__(self) -> int:
        return len(self._pairs)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return pair in self._pairs

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PairSet) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash(self._pairs)

    def __repr__(self) -> str:
        return f"PairSet({len(self._pairs)} pairs, {len(self._by_post)} posts)"


@dataclass(frozen=True)
class TaskEntry:
    """Id lists for one language (or the crosslingual track)."""

    posts_train: tuple[int, ...] = ()
    posts_dev: tuple[int, ...] = ()
    fact_checks: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        overlap = set(self.posts_train) & set(self.posts_dev)
        if overlap:
            raise ValidationError(
                f"train/dev post lists overlap on {len(overlap)} ids, e.g. {sorted(overlap)[:5]}"
            )


@dataclass(frozen=True)
class TaskSplit:
    """Per-language task entries plus (optionally) one crosslingual entry."""

    entries: Mapping[str, TaskEntry] = field(default_factory=dict)

    def languages(self) -> list[str]:
        """Monolingual language codes, sorted."""
        return sorted(k for k in self.entries if k != CROSSLINGUAL_KEY)

    @property
    def crosslingual(self) -> TaskEntry | None:
        return self.entries.get(CROSSLINGUAL_KEY)

    def entry(self, key: str) -> TaskEntry:
        try:
            return self.entries[key]
        except KeyError:
            raise ValidationError(f"task split has no entry for {key!r}") from None


# --- normalized JSON form -------------------------------------------------
#
# One record per JSON Lines row:
#   {"kind": "post", "post_id": ..., "text": <lt|null>, "ocr": [<lt>...],
#    "verdicts": [...], "instances": "..."}
#   {"kind": "fact_check", "fact_check_id": ..., "claim": <lt>,
#    "title": <lt|null>, "instances": "..."}
# where <lt> is {"original": str, "translation": str|null,
#                "languages": [[code, confidence], ...]}.


def _lang_tuple_to_json(lt: LangTuple | None) -> dict[str, Any] | None:
    if lt is None:
        return None
    return {
        "original": lt.original,
        "translation": lt.translation,
        "languages": [[code, conf] for code, conf in lt.languages],
    }


def _lang_tuple_from_json(obj: Any) -> LangTuple | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValidationError(f"expected language-tuple object, got {type(obj).__name__}")
    return LangTuple(
        original=obj["original"],
        translation=obj.get("translation"),
        languages=tuple((code, float(conf)) for code, conf in obj.get("languages", [])),
    )


def record_to_json(record: Post | FactCheck) -> dict[str, Any]:
    if isinstance(record, Post):
        return {
            "kind": "post",
            "post_id": record.post_id,
            "text": _lang_tuple_to_json(record.text),
            "ocr": [_lang_tuple_to_json(lt) for lt in record.ocr],
            "verdicts": list(record.verdicts),
            "instances": record.instances,
        }
    if isinstance(record, FactCheck):
        return {
            "kind": "fact_check",
            "fact_check_id": record.fact_check_id,
            "claim": _lang_tuple_to_json(record.claim),
            "title": _lang_tuple_to_json(record.title),
            "instances": record.instances,
        }
    raise ValidationError(f"cannot serialize {type(record).__name__}")


def record_from_json(obj: Mapping[str, Any]) -> Post | FactCheck:
    kind = obj.get("kind")
    if kind == "post":
        ocr = [_lang_tuple_from_json(o) for o in obj.get("ocr", [])]
        return Post(
            post_id=int(obj["post_id"]),
            text=_lang_tuple_from_json(obj.get("text")),
            ocr=tuple(lt for lt in ocr if lt is not None),
            verdicts=tuple(obj.get("verdicts", [])),
            instances=obj.get("instances", ""),
        )
    if kind == "fact_check":
        claim = _lang_tuple_from_json(obj["claim"])
        if claim is None:
            raise ValidationError("fact_check record without a claim")
        return FactCheck(
            fact_check_id=int(obj["fact_check_id"]),
            claim=claim,
            title=_lang_tuple_from_json(obj.get("title")),
            instances=obj.get("instances", ""),
        )
    raise ValidationError(f"unknown record kind {kind!r}")
