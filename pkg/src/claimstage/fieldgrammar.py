"""Decoders for the tuple-literal CSV field grammar.

Fields arrive as quoted Python-style literals:

    claim/title/text:  ("original", "translation"[, [("lang", 0.99), ...]])
    ocr:               [<tuple>, <tuple>, ...]        (or empty)
    verdicts:          ["False.", ...]                (or empty)

``ast.literal_eval`` parses exactly this literal family (quoted strings with
backslash escapes, nested tuples/lists, numbers); the shape checks below
reject anything outside the grammar. Empty fields and the literal markers
"nan"/"NaN" denote an absent value.
"""

from __future__ import annotations

import ast
from typing import Any

from .errors import GrammarError, ValidationError
from .records import LangTuple

_ABSENT_MARKERS = frozenset({"", "nan", "NaN"})


def is_absent(raw: str) -> bool:
    """True when a raw CSV field denotes a missing value."""
    return raw is None or raw.strip() in _ABSENT_MARKERS


def _literal(raw: str, what: str) -> Any:
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError) as exc:
        raise GrammarError(f"malformed {what} literal: {exc}") from None


def _as_lang_pairs(obj: Any) -> tuple[tuple[str, float], ...]:
    if not isinstance(obj, (list, tuple)):
        raise GrammarError(f"language list must be a list, got {type(obj).__name__}")
    pairs = []
    for item in obj:
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not isinstance(item[0], str)
            or not isinstance(item[1], (int, float))
            or isinstance(item[1], bool)
        ):
            raise GrammarError(f"language entry must be (code, confidence), got {item!r}")
        pairs.append((item[0], float(item[1])))
    return tuple(pairs)


def _as_lang_tuple(obj: Any) -> LangTuple:
    if not isinstance(obj, tuple) or len(obj) not in (2, 3):
        raise GrammarError(
            f"expected (original, translation[, languages]) tuple, got {obj!r}"
        )
    original, translation = obj[0], obj[1]
    if not isinstance(original, str) or not isinstance(translation, str):
        raise GrammarError(f"tuple text slots must be strings, got {obj!r}")
    languages = _as_lang_pairs(obj[2]) if len(obj) == 3 else ()
    if translation.strip() in _ABSENT_MARKERS:
        translation = None
    try:
        return LangTuple(original=original, translation=translation, languages=languages)
    except ValidationError as exc:
        raise GrammarError(str(exc)) from None


def parse_lang_tuple_field(raw: str) -> LangTuple | None:
    """Decode a claim/title/text field; absent markers give None."""
    if is_absent(raw):
        return None
    return _as_lang_tuple(_literal(raw, "tuple"))


def parse_ocr_field(raw: str) -> tuple[LangTuple, ...]:
    """Decode an ocr field: a bracketed list of tuples, possibly empty."""
    if is_absent(raw):
        return ()
    obj = _literal(raw, "ocr list")
    if not isinstance(obj, (list, tuple)):
        raise GrammarError(f"ocr field must be a list of tuples, got {type(obj).__name__}")
    return tuple(_as_lang_tuple(item) for item in obj)


def parse_verdicts_field(raw: str) -> tuple[str, ...]:
    """Decode a verdicts field: a bracketed list of strings, possibly empty."""
    if is_absent(raw):
        return ()
    obj = _literal(raw, "verdicts list")
    if not isinstance(obj, (list, tuple)):
        raise GrammarError(f"verdicts field must be a list, got {type(obj).__name__}")
    for item in obj:
        if not isinstance(item, str):
            raise GrammarError(f"verdict entries must be strings, got {item!r}")
    return tuple(obj)


def parse_id_field(raw: str, name: str) -> int:
    """Decode an id column: non-negative decimal integer, leading zeros rejected."""
    text = raw.strip() if raw is not None else ""
    if not (text.isascii() and text.isdigit()):
        raise GrammarError(f"{name} must be a non-negative integer, got {raw!r}")
    if len(text) > 1 and text[0] == "0":
        raise GrammarError(f"{name} has leading zeros: {raw!r}")
    return int(text)
