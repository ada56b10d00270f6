"""Synthetic corpus builders shared by pipeline, CLI, and acceptance tests.

The "related" corpus duplicates each post's text as its gold fact-check's
claim, so exact-match retrieval must put the gold first. The "unrelated"
variant rewrites gold claims over a disjoint alphabet while filler claims
keep a marker word shared with every post, so gold can never reach the
Top-10.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path

#: every post and every filler claim contains this, so fillers always
#: outscore an unrelated gold claim (whose similarity is exactly zero).
MARKER_WORD = "mamamark"

_POST_ALPHABET = "abcdefghijklm"
_UNRELATED_ALPHABET = "nopqrstuvwxyz"


@dataclass(frozen=True)
class SynthCorpus:
    root: Path
    posts_csv: Path
    fact_checks_csv: Path
    pairs_csv: Path
    tasks_json: Path
    languages: tuple[str, ...]
    gold: dict[int, int]            # post_id -> gold fact_check_id
    posts_by_language: dict[str, tuple[int, ...]]
    fact_checks_by_language: dict[str, tuple[int, ...]]


def _word(rng: random.Random, alphabet: str) -> str:
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(4, 8)))


def _sentence(rng: random.Random, vocab: list[str], n_words: int) -> str:
    return " ".join(rng.choice(vocab) for _ in range(n_words)) + " " + MARKER_WORD


def build_synthetic_corpus(
    root: Path,
    *,
    n_languages: int = 8,
    posts_per_language: int = 50,
    fact_checks_per_language: int = 250,
    related: bool = True,
    with_translations: bool = False,
    seed: int = 1234,
) -> SynthCorpus:
    rng = random.Random(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    languages = tuple(f"l{chr(ord('a') + i)}{chr(ord('a') + i)}" for i in range(n_languages))

    posts_rows: list[tuple[int, str, str, str, str]] = []
    fc_rows: list[tuple[int, str, str, str]] = []
    pair_rows: list[tuple[int, int]] = []
    tasks: dict[str, dict[str, list[int]]] = {}
    gold: dict[int, int] = {}
    posts_by_language: dict[str, tuple[int, ...]] = {}
    fcs_by_language: dict[str, tuple[int, ...]] = {}

    next_post = 0
    next_fc = 0
    for lang in languages:
        vocab = [_word(rng, _POST_ALPHABET) for _ in range(50)]
        post_ids = list(range(next_post, next_post + posts_per_language))
        next_post += posts_per_language
        fc_ids = list(range(next_fc, next_fc + fact_checks_per_language))
        next_fc += fact_checks_per_language
        gold_ids = rng.sample(fc_ids, posts_per_language)
        claim_texts: dict[int, str] = {}
        for post_id, gold_id in zip(post_ids, gold_ids):
            text = _sentence(rng, vocab, 8)
            translation = text.upper() if with_translations else ""
            posts_rows.append((
                post_id,
                f"instances-{post_id}",
                "[]",
                "['False.']" if post_id % 3 == 0 else "[]",
                _tuple_literal(text, translation, lang),
            ))
            if related:
                claim_texts[gold_id] = text
            else:
                claim_texts[gold_id] = " ".join(
                    _word(rng, _UNRELATED_ALPHABET) for _ in range(8)
                )
            gold[post_id] = gold_id
            pair_rows.append((post_id, gold_id))
        for fc_id in fc_ids:
            claim = claim_texts.get(fc_id) or _sentence(rng, vocab, 8)
            translation = claim.upper() if with_translations else ""
            fc_rows.append((
                fc_id,
                _tuple_literal(claim, translation, lang),
                f"instances-{fc_id}",
                "",
            ))
        tasks[lang] = {
            "posts_train": [],
            "posts_dev": post_ids,
            "fact_checks": fc_ids,
        }
        posts_by_language[lang] = tuple(post_ids)
        fcs_by_language[lang] = tuple(fc_ids)

    tasks["crosslingual"] = {
        "posts_train": [],
        "posts_dev": [p for lang in languages for p in tasks[lang]["posts_dev"]],
        "fact_checks": [f for lang in languages for f in tasks[lang]["fact_checks"]],
    }

    posts_csv = root / "posts.csv"
    with open(posts_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "instances", "ocr", "verdicts", "text"])
        writer.writerows(posts_rows)
    fact_checks_csv = root / "fact_checks.csv"
    with open(fact_checks_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fact_check_id", "claim", "instances", "title"])
        writer.writerows(fc_rows)
    pairs_csv = root / "pairs.csv"
    with open(pairs_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "fact_check_id"])
        writer.writerows(pair_rows)
    tasks_json = root / "tasks.json"
    tasks_json.write_text(json.dumps(tasks), encoding="utf-8")

    return SynthCorpus(
        root=root,
        posts_csv=posts_csv,
        fact_checks_csv=fact_checks_csv,
        pairs_csv=pairs_csv,
        tasks_json=tasks_json,
        languages=languages,
        gold=gold,
        posts_by_language=posts_by_language,
        fact_checks_by_language=fcs_by_language,
    )


def _tuple_literal(original: str, translation: str, lang: str) -> str:
    return f'("{original}", "{translation}", [("{lang}", 1.0)])'


def write_config_json(
    corpus: SynthCorpus,
    path: Path,
    *,
    track: str = "monolingual",
    plan: str = "O",
    k: int = 100,
    rerankers: list[dict] | None = None,
    retrieval_only: bool = False,
    out: str = "runs",
    **extra,
) -> Path:
    payload = {
        "track": track,
        "plan": plan,
        "k": k,
        "retrieval_only": retrieval_only,
        "paths": {
            "posts": str(corpus.posts_csv),
            "fact_checks": str(corpus.fact_checks_csv),
            "pairs": str(corpus.pairs_csv),
            "tasks": str(corpus.tasks_json),
            "out": out,
        },
        "embedder": {"kind": "baseline"},
        "rerankers": rerankers
        if rerankers is not None
        else [{"kind": "lexical_baseline", "model_name": "lexical-3gram", "top_n": 10}],
    }
    payload.update(extra)
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
