"""Corpus ingestion: shared-task CSV/JSON parsing, task views, JSONL round-trip.

Parsers accept any iterable of text lines (open files, ``io.StringIO``, lists).
Row-level problems either raise immediately or, when a ``rejects`` sink is
passed, are collected as :class:`RowError` entries so callers can report every
bad row while keeping the good ones. Duplicate ids are always fatal.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

from .errors import CorpusError, CorpusLookupError, GrammarError, RecordError, ValidationError
from .fieldgrammar import (
    parse_id_field,
    parse_lang_tuple_field,
    parse_ocr_field,
    parse_verdicts_field,
)
from .records import (
    CROSSLINGUAL_KEY,
    FactCheck,
    PairSet,
    Post,
    TaskEntry,
    TaskSplit,
    record_from_json,
    record_to_json,
)

log = logging.getLogger(__name__)

FACT_CHECK_COLUMNS = ("fact_check_id", "claim", "instances", "title")
POST_COLUMNS = ("post_id", "instances", "ocr", "verdicts", "text")
PAIR_COLUMNS = ("post_id", "fact_check_id")


@dataclass(frozen=True)
class RowError:
    """One rejected CSV row; all rejects are reported, never silently dropped."""

    row: int
    field: str
    raw: str
    reason: str


def _reader(stream: Iterable[str], expected: tuple[str, ...], what: str) -> csv.DictReader:
    csv.field_size_limit(sys.maxsize)  # OCR/claim fields can be very long
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise CorpusError(f"{what}: empty stream, no CSV header")
    missing = [c for c in expected if c not in reader.fieldnames]
    if missing:
        raise CorpusError(f"{what}: header is missing columns {missing}")
    return reader


def _reject(
    rejects: list[RowError] | None, row: int, field: str, raw: str, reason: str
) -> None:
    if rejects is None:
        raise RecordError(row, field, raw, reason)
    rejects.append(RowError(row=row, field=field, raw=raw, reason=reason))


def parse_fact_checks(
    stream: Iterable[str], *, rejects: list[RowError] | None = None
) -> list[FactCheck]:
    """Parse a fact_checks CSV into records; duplicate fact_check_id is fatal."""
    reader = _reader(stream, FACT_CHECK_COLUMNS, "fact_checks")
    records: list[FactCheck] = []
    seen: set[int] = set()
    for row in reader:
        line = reader.line_num
        try:
            fc_id = parse_id_field(row["fact_check_id"] or "", "fact_check_id")
        except GrammarError as exc:
            _reject(rejects, line, "fact_check_id", row["fact_check_id"] or "", str(exc))
            continue
        if fc_id in seen:
            raise CorpusError(f"duplicate fact_check_id {fc_id} at row {line}")
        try:
            claim = parse_lang_tuple_field(row["claim"] or "")
        except GrammarError as exc:
            _reject(rejects, line, "claim", row["claim"] or "", str(exc))
            continue
        try:
            title = parse_lang_tuple_field(row["title"] or "")
        except GrammarError as exc:
            _reject(rejects, line, "title", row["title"] or "", str(exc))
            continue
        if claim is None:
            _reject(rejects, line, "claim", row["claim"] or "", "fact-check without a claim")
            continue
        seen.add(fc_id)
        records.append(
            FactCheck(
                fact_check_id=fc_id,
                claim=claim,
                title=title,
                instances=row["instances"] or "",
            )
        )
    return records


def parse_posts(stream: Iterable[str], *, rejects: list[RowError] | None = None) -> list[Post]:
    """Parse a posts CSV into records; duplicate post_id is fatal."""
    reader = _reader(stream, POST_COLUMNS, "posts")
    records: list[Post] = []
    seen: set[int] = set()
    for row in reader:
        line = reader.line_num
        try:
            post_id = parse_id_field(row["post_id"] or "", "post_id")
        except GrammarError as exc:
            _reject(rejects, line, "post_id", row["post_id"] or "", str(exc))
            continue
        if post_id in seen:
            raise CorpusError(f"duplicate post_id {post_id} at row {line}")
        try:
            ocr = parse_ocr_field(row["ocr"] or "")
        except GrammarError as exc:
            _reject(rejects, line, "ocr", row["ocr"] or "", str(exc))
            continue
        try:
            text = parse_lang_tuple_field(row["text"] or "")
        except GrammarError as exc:
            _reject(rejects, line, "text", row["text"] or "", str(exc))
            continue
        try:
            verdicts = parse_verdicts_field(row["verdicts"] or "")
        except GrammarError as exc:
            _reject(rejects, line, "verdicts", row["verdicts"] or "", str(exc))
            continue
        seen.add(post_id)
        post = Post(
            post_id=post_id,
            ocr=ocr,
            text=text,
            verdicts=verdicts,
            instances=row["instances"] or "",
        )
        if not post.has_content:
            log.warning("post %d has neither ocr nor text", post_id)
        records.append(post)
    return records


def parse_pairs(stream: Iterable[str], *, rejects: list[RowError] | None = None) -> PairSet:
    """Parse a pairs CSV into a deduplicated gold pair set."""
    reader = _reader(stream, PAIR_COLUMNS, "pairs")
    pairs: set[tuple[int, int]] = set()
    for row in reader:
        line = reader.line_num
        try:
            post_id = parse_id_field(row["post_id"] or "", "post_id")
            fc_id = parse_id_field(row["fact_check_id"] or "", "fact_check_id")
        except GrammarError as exc:
            _reject(rejects, line, "post_id/fact_check_id", f"{row!r}", str(exc))
            continue
        pairs.add((post_id, fc_id))
    return PairSet(pairs)


def parse_tasks(stream: IO[str] | str) -> TaskSplit:
    """Parse tasks.json into a validated, deduplicated TaskSplit."""
    text = stream if isinstance(stream, str) else stream.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"tasks.json is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise CorpusError("tasks.json must be an object keyed by track or language")
    entries: dict[str, TaskEntry] = {}
    for key, value in payload.items():
        if not isinstance(value, dict):
            raise CorpusError(f"tasks.json entry {key!r} must be an object")
        unknown = set(value) - {"posts_train", "posts_dev", "fact_checks"}
        if unknown:
            raise CorpusError(f"tasks.json entry {key!r} has unknown fields {sorted(unknown)}")
        entries[key] = TaskEntry(
            posts_train=_id_list(value.get("posts_train", []), f"{key}.posts_train"),
            posts_dev=_id_list(value.get("posts_dev", []), f"{key}.posts_dev"),
            fact_checks=_id_list(value.get("fact_checks", []), f"{key}.fact_checks"),
        )
    return TaskSplit(entries=entries)


def _id_list(value: Any, where: str) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise CorpusError(f"{where} must be a list of integers")
    out: list[int] = []
    seen: set[int] = set()
    for item in value:
        if not isinstance(item, int) or isinstance(item, bool) or item < 0:
            raise CorpusError(f"{where} contains a non-integer id: {item!r}")
        if item not in seen:  # de-duplicate, keep first occurrence
            seen.add(item)
            out.append(item)
    return tuple(out)


class Corpus:
    """Immutable id-keyed container over parsed posts and fact-checks."""

    def __init__(self, posts: Iterable[Post] = (), fact_checks: Iterable[FactCheck] = ()):
        self._posts: dict[int, Post] = {}
        self._fact_checks: dict[int, FactCheck] = {}
        for post in posts:
            if post.post_id in self._posts:
                raise CorpusError(f"duplicate post_id {post.post_id}")
            self._posts[post.post_id] = post
        for fc in fact_checks:
            if fc.fact_check_id in self._fact_checks:
                raise CorpusError(f"duplicate fact_check_id {fc.fact_check_id}")
            self._fact_checks[fc.fact_check_id] = fc

    @property
    def posts(self) -> dict[int, Post]:
        return dict(self._posts)

    @property
    def fact_checks(self) -> dict[int, FactCheck]:
        return dict(self._fact_checks)

    def post(self, post_id: int) -> Post:
        try:
            return self._posts[post_id]
        except KeyError:
            raise CorpusLookupError(f"unknown post_id {post_id}") from None

    def fact_check(self, fc_id: int) -> FactCheck:
        try:
            return self._fact_checks[fc_id]
        except KeyError:
            raise CorpusLookupError(f"unknown fact_check_id {fc_id}") from None

    def __len__(self) -> int:
        return len(self._posts) + len(self._fact_checks)


def validate_split(split: TaskSplit, corpus: Corpus, pairs: PairSet | None = None) -> None:
    """Check that every id referenced by the split (and gold pairs) resolves."""
    for key, entry in split.entries.items():
        for pid in (*entry.posts_train, *entry.posts_dev):
            if pid not in corpus._posts:
                raise ValidationError(f"split {key!r} references unknown post_id {pid}")
        for fid in entry.fact_checks:
            if fid not in corpus._fact_checks:
                raise ValidationError(f"split {key!r} references unknown fact_check_id {fid}")
    if pairs is not None:
        for post_id, fc_id in pairs.pairs:
            if post_id not in corpus._posts:
                raise ValidationError(f"gold pair references unknown post_id {post_id}")
            if fc_id not in corpus._fact_checks:
                raise ValidationError(f"gold pair references unknown fact_check_id {fc_id}")


@dataclass(frozen=True)
class LanguageView:
    """Id-resolved dev posts and fact-check pool for one language or track."""

    language: str
    posts_dev: tuple[Post, ...]
    fact_check_pool: tuple[FactCheck, ...]


def language_view(corpus: Corpus, split: TaskSplit, language: str) -> LanguageView:
    """Materialize the dev posts and fact-check pool for a language.

    Pass :data:`CROSSLINGUAL_KEY` to obtain the shared crosslingual pool.
    """
    if language not in split.entries:
        raise CorpusLookupError(f"language {language!r} not present in task split")
    entry = split.entries[language]
    return LanguageView(
        language=language,
        posts_dev=tuple(corpus.post(pid) for pid in entry.posts_dev),
        fact_check_pool=tuple(corpus.fact_check(fid) for fid in entry.fact_checks),
    )


# --- normalized JSON Lines round-trip --------------------------------------


def write_jsonl(records: Iterable[Post | FactCheck], path: str | Path) -> int:
    """Write records to a JSON Lines file; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[Post | FactCheck]:
    """Stream records back from a normalized JSON Lines file."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{line_no}: bad JSON: {exc}") from None
            yield record_from_json(obj)
