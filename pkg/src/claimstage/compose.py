"""Deterministic composition of model input text from record fields.

Layout: for posts the original parts are [text, each ocr entry] in that
order; translation parts use the same order; the OT plan emits all original
parts then all translation parts; parts are joined by single spaces; the OTV
plan appends the post's verdict strings last. Fact-checks compose claim then
title, and have no verdicts (OTV behaves like OT).

When a plan asks for a translation that is absent, the original is emitted
instead so queries never silently vanish; ``strict_plan=True`` disables that
fallback.
"""

from __future__ import annotations

from .records import CompositionPlan, FactCheck, LangTuple, Post


def _original_parts(tuples: tuple[LangTuple, ...]) -> list[str]:
    return [t.original for t in tuples if t.original]


def _translation_parts(tuples: tuple[LangTuple, ...], strict: bool) -> list[str]:
    parts = []
    for t in tuples:
        value = t.translation
        if value is None and not strict:
            value = t.original
        if value:
            parts.append(value)
    return parts


def _compose(
    tuples: tuple[LangTuple, ...],
    verdicts: tuple[str, ...],
    plan: CompositionPlan,
    strict_plan: bool,
) -> str:
    if plan is CompositionPlan.O:
        parts = _original_parts(tuples)
    elif plan is CompositionPlan.T:
        parts = _translation_parts(tuples, strict_plan)
    else:  # OT and OTV share the O-then-T layout
        parts = _original_parts(tuples) + _translation_parts(tuples, strict_plan)
    if plan is CompositionPlan.OTV:
        parts += [v for v in verdicts if v]
    return " ".join(parts)


def compose_post_text(post: Post, plan: CompositionPlan, *, strict_plan: bool = False) -> str:
    """Compose a post's query text; an empty result flags an empty query."""
    tuples = ((post.text,) if post.text is not None else ()) + post.ocr
    return _compose(tuples, post.verdicts, plan, strict_plan)


def compose_fact_check_text(
    fc: FactCheck, plan: CompositionPlan, *, strict_plan: bool = False
) -> str:
    """Compose a fact-check's document text (claim then title; no verdicts)."""
    tuples = (fc.claim,) + ((fc.title,) if fc.title is not None else ())
    effective = CompositionPlan.OT if plan is CompositionPlan.OTV else plan
    return _compose(tuples, (), effective, strict_plan)
