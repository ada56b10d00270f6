"""Command line interface.

    claimstage ingest    parse CSVs into normalized JSON Lines, report rejects
    claimstage embed     fetch remote embeddings into a binary embedding file
    claimstage retrieve  stage 1: top-K candidates per post
    claimstage rerank    stage 2: re-score persisted candidates per model
    claimstage fuse      stage 3: weighted voting + submission file
    claimstage eval      score a submission file against the gold pairs
    claimstage run       the full pipeline end to end

Exit codes: 0 success, 1 validation/config error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import RowError, parse_fact_checks, parse_pairs, parse_posts, write_jsonl
from .embedder import EmbeddingStore, Namespace, save_embeddings
from .errors import ClaimStageError, ConfigError, StageError, ValidationError
from .evaluation import (
    PredictionSet,
    read_submission,
    render_report,
    report_to_json_dict,
    success_at_k,
)
from .pipeline import (
    Runner,
    load_config,
    run_full_pipeline,
    run_retrieval_experiment,
)
from .remote import RemoteEmbedder, RemoteEmbedderConfig

log = logging.getLogger("claimstage")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STAGE = 2


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="TOML or JSON experiment config")
    parser.add_argument("--plan", choices=["O", "T", "OT", "OTV"], help="override composition plan")
    parser.add_argument("--k", type=int, help="override candidate count K")
    parser.add_argument("--top-n", type=int, dest="top_n", help="override reranker Top-N")
    parser.add_argument("--track", choices=["monolingual", "crosslingual"], help="override track")
    parser.add_argument("--out", help="override output directory")


def _config_from_args(args: argparse.Namespace):
    return load_config(
        args.config,
        plan=args.plan,
        k=args.k,
        top_n=args.top_n,
        track=args.track,
        out=args.out,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="claimstage", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse CSVs into normalized JSON Lines")
    p_ingest.add_argument("--posts", help="posts CSV")
    p_ingest.add_argument("--fact-checks", dest="fact_checks", help="fact-checks CSV")
    p_ingest.add_argument("--pairs", help="gold pairs CSV (validated, not serialized)")
    p_ingest.add_argument("--out", required=True, help="output directory for JSONL files")

    p_embed = sub.add_parser("embed", help="fetch remote embeddings into a binary file")
    _add_config_options(p_embed)
    p_embed.add_argument("--embeddings-out", dest="embeddings_out",
                         help="target .cseb file (default <out>/<hash>/embeddings.cseb)")

    for name, helptext in [
        ("retrieve", "stage 1: retrieve top-K candidates"),
        ("rerank", "stage 2: rerank persisted stage-1 candidates"),
        ("fuse", "stage 3: weighted voting over persisted stage-2 lists"),
        ("run", "full pipeline"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_config_options(p)

    p_eval = sub.add_parser("eval", help="score a submission against gold pairs")
    _add_config_options(p_eval)
    p_eval.add_argument("--predictions", help="submission JSON (default: the run's own)")

    return parser


def _cmd_ingest(args: argparse.Namespace) -> int:
    if not args.posts and not args.fact_checks:
        raise ConfigError("ingest needs --posts and/or --fact-checks")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    total_rejects: list[RowError] = []
    if args.posts:
        rejects: list[RowError] = []
        with open(args.posts, encoding="utf-8") as fh:
            posts = parse_posts(fh, rejects=rejects)
        written = write_jsonl(posts, out_dir / "posts.jsonl")
        print(f"posts: {written} records -> {out_dir / 'posts.jsonl'} ({len(rejects)} rejected)")
        total_rejects.extend(rejects)
    if args.fact_checks:
        rejects = []
        with open(args.fact_checks, encoding="utf-8") as fh:
            fact_checks = parse_fact_checks(fh, rejects=rejects)
        written = write_jsonl(fact_checks, out_dir / "fact_checks.jsonl")
        print(f"fact_checks: {written} records -> {out_dir / 'fact_checks.jsonl'} "
              f"({len(rejects)} rejected)")
        total_rejects.extend(rejects)
    if args.pairs:
        with open(args.pairs, encoding="utf-8") as fh:
            pairs = parse_pairs(fh)
        print(f"pairs: {len(pairs)} unique gold pairs")
    for reject in total_rejects:
        print(f"  rejected row {reject.row} field {reject.field}: {reject.reason}",
              file=sys.stderr)
    return EXIT_OK


def _cmd_embed(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if config.embedder.kind != "remote":
        raise ConfigError(
            "`claimstage embed` materializes remote embeddings; the baseline "
            "vectorizer is fitted per run and file stores already exist"
        )
    runner = Runner(config)
    client = RemoteEmbedder(RemoteEmbedderConfig(
        endpoint=config.embedder.endpoint,
        model=config.embedder.model,
        batch_size=config.embedder.batch_size,
    ))
    texts: dict[tuple[int, int], str] = {}
    for key in runner.keys:
        queries_text, docs_text = runner.texts(key)
        for post_id, text in queries_text.items():
            texts[(int(Namespace.POST), post_id)] = text
        for fc_id, text in docs_text.items():
            texts[(int(Namespace.FACT_CHECK), fc_id)] = text
    keys = sorted(texts)
    vectors = client.embed_all([texts[k] for k in keys])
    store = EmbeddingStore(dim=vectors.shape[1], provenance=client.provenance)
    for (ns, record_id), vec in zip(keys, vectors):
        store.add(Namespace(ns), record_id, vec)
    target = Path(args.embeddings_out) if args.embeddings_out else (
        runner.run_dir / "embeddings.cseb")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(store, target)
    print(f"embeddings: {len(store)} vectors (dim {store.dim}) -> {target}")
    return EXIT_OK


def _cmd_retrieve(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    runner = Runner(config)
    candidates = runner.retrieve()
    runner.write_manifest()
    for key in runner.keys:
        print(f"stage1 {key}: {len(candidates[key])} posts, top-{config.k}")
    print(f"run dir: {runner.run_dir}")
    return EXIT_OK


def _cmd_rerank(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    runner = Runner(config)
    candidates = runner.load_stage1()
    per_model = runner.rerank_stage(candidates)
    runner.write_manifest()
    for model in sorted(per_model):
        print(f"stage2 {model}: {sum(len(v) for v in per_model[model].values())} reranked lists")
    return EXIT_OK


def _cmd_fuse(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    runner = Runner(config)
    per_model = runner.load_stage2()
    fused = runner.fuse_stage(per_model)
    runner.write_manifest()
    total = sum(len(v) for v in fused.values())
    print(f"stage3: fused {total} posts -> {runner.manifest.artifacts['submission']}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    runner = Runner(config)
    predictions_path = (Path(args.predictions) if args.predictions
                        else runner.run_dir / f"{config.track}_predictions.json")
    if not predictions_path.exists():
        raise ConfigError(f"no submission file at {predictions_path}")
    predictions = read_submission(predictions_path)
    by_key: dict[str, float] = {}
    for key in runner.keys:
        view = runner.view(key)
        post_ids = [p.post_id for p in view.posts_dev if p.post_id in predictions.by_post]
        if not post_ids:
            raise ValidationError(f"submission covers no posts for {key!r}")
        subset = PredictionSet({p: predictions.by_post[p] for p in post_ids})
        by_key[key] = success_at_k(subset, runner.pairs, 10)
    report = runner._report_rows([(str(predictions_path.name), by_key)])
    runner.write_report(report)
    print(render_report(report), end="")
    print(json.dumps(report_to_json_dict(report), sort_keys=True))
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if config.retrieval_only:
        report = run_retrieval_experiment(config)
        run_dir = config.run_dir
    else:
        report, manifest = run_full_pipeline(config)
        run_dir = config.run_dir
        print(f"submission: {manifest.artifacts.get('submission')}")
    print(render_report(report), end="")
    print(f"run dir: {run_dir}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "embed": _cmd_embed,
    "retrieve": _cmd_retrieve,
    "rerank": _cmd_rerank,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_STAGE
    except (ConfigError, ValidationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except ClaimStageError as exc:
        log.error("%s", exc)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
