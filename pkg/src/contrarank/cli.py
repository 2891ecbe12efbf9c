"""Command-line entry point.

Subcommands: stats, augment, train, eval, gradcheck, synth. All randomness
flows from --seed; every run is reproducible from its manifest. Exit codes:
0 success, 1 verification or generation failure, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__, gradcheck, synthetic, trainer
from .augment import (
    CacheFormatError,
    OracleGenerator,
    RemoteGenerator,
    StubGenerator,
    augment_groups,
    build_ag_corpus,
    build_qg_corpus,
    cache_read,
    cache_write,
    write_corpus,
)
from .ingest import DatasetSchema, ParseError, compute_stats, parse_dataset, serialize_dataset
from .metrics import evaluate_ranked_lists, ranked_lists_from_pairs
from .scorer import CheckpointFormatError, load_params, save_params, score
from .trainer import AblationFlags, ConfigurationError, TrainConfig
from .types import group_pairs

GENERATOR_URL_ENV = "CONTRARANK_GENERATOR_URL"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Usage or IO problem; message printed to stderr, exit code 2."""


def _schema_from_args(args) -> DatasetSchema:
    return DatasetSchema(
        label_kind="graded" if args.graded else "binary",
        graded_threshold=args.threshold,
    )


def _load_pairs(path: str, schema: DatasetSchema):
    if not os.path.exists(path):
        raise CliError(f"dataset file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dataset(fh, schema)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_ks(raw: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise CliError(f"--k expects a comma-separated integer list, got {raw!r}")
    if not ks or any(k < 1 for k in ks):
        raise CliError("--k values must be >= 1")
    return ks


def _build_generator(args):
    if args.generator == "stub":
        return StubGenerator(seed=args.seed)
    if args.generator == "oracle":
        return OracleGenerator()
    url = args.url or os.environ.get(GENERATOR_URL_ENV)
    if not url:
        raise CliError(
            f"--generator remote requires --url or the {GENERATOR_URL_ENV} environment variable"
        )
    return RemoteGenerator(url)


def cmd_stats(args) -> int:
    pairs = _load_pairs(args.dataset, _schema_from_args(args))
    stats = compute_stats(pairs)
    if args.format in ("table", "both"):
        print(stats.to_table())
    if args.format in ("json", "both"):
        print(stats.to_json())
    return EXIT_OK


def cmd_augment(args) -> int:
    pairs = _load_pairs(args.dataset, _schema_from_args(args))
    groups = group_pairs(pairs)
    gen = _build_generator(args)
    augmented, summary = augment_groups(
        groups,
        gen,
        enable_qg=not args.no_qg,
        enable_ag=not args.no_ag,
        jobs=args.jobs,
    )
    cache_write(augmented, args.out)
    print(
        f"augmented {len(summary.ok)} groups, {len(summary.failed)} failed, "
        f"{len(summary.skipped)} skipped (no negatives); cache: {args.out}"
    )
    if summary.failed:
        print("failed groups: " + ", ".join(summary.failed), file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_corpus(args) -> int:
    pairs = _load_pairs(args.dataset, _schema_from_args(args))
    groups = group_pairs(pairs)
    builder = build_qg_corpus if args.mode == "qg" else build_ag_corpus
    records = builder(groups)
    write_corpus(records, args.out)
    print(f"wrote {len(records)} {args.mode} fine-tuning records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    schema = _schema_from_args(args)
    pairs = _load_pairs(args.dataset, schema)
    groups = group_pairs(pairs)
    ablation = AblationFlags(
        disable_qg=args.no_qg,
        disable_ag=args.no_ag,
        treat_synth_as_positive=args.synth_as_positive,
    )
    cfg = TrainConfig(
        mode=args.mode,
        epochs=args.epochs,
        learning_rate=args.lr,
        margin=args.margin,
        seed=args.seed,
        embed_dim=args.dim,
        hidden_dim=args.hidden,
        min_freq=args.min_freq,
        ablation=ablation,
        eval_ks=_parse_ks(args.k),
    )
    augmented = None
    if args.cache:
        if not os.path.exists(args.cache):
            raise CliError(f"cache file not found: {args.cache}")
        augmented = cache_read(args.cache, groups)
    dev = None
    if args.dev:
        dev = group_pairs(_load_pairs(args.dev, schema))
    params, vocab, history = trainer.train(groups, augmented, cfg, dev=dev)

    history_path = args.history or args.out + ".history.jsonl"
    manifest_path = args.manifest or args.out + ".manifest.json"
    save_params(params, vocab, args.out)
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write(history.to_jsonl())
    manifest = {
        "tool": "contrarank",
        "version": __version__,
        "command": "train",
        "seed": args.seed,
        "config": {
            "mode": cfg.mode,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "margin": cfg.margin,
            "embed_dim": cfg.embed_dim,
            "hidden_dim": cfg.hidden_dim,
            "min_freq": cfg.min_freq,
            "ablation": {
                "disable_qg": ablation.disable_qg,
                "disable_ag": ablation.disable_ag,
                "treat_synth_as_positive": ablation.treat_synth_as_positive,
            },
            "eval_ks": list(cfg.eval_ks),
            "schema": {
                "label_kind": schema.label_kind,
                "graded_threshold": schema.graded_threshold,
            },
        },
        "inputs": {
            "dataset": {"path": args.dataset, "sha256": _sha256(args.dataset)},
            "cache": (
                {"path": args.cache, "sha256": _sha256(args.cache)} if args.cache else None
            ),
            "dev": ({"path": args.dev, "sha256": _sha256(args.dev)} if args.dev else None),
        },
        "outputs": {
            "checkpoint": args.out,
            "history": history_path,
            "manifest": manifest_path,
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    final = history.epochs[-1]
    print(
        f"trained {cfg.mode} for {cfg.epochs} epochs; "
        f"final mean loss {final.mean_train_loss:.6f}; checkpoint: {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    params, vocab = load_params(args.checkpoint)
    pairs = _load_pairs(args.dataset, _schema_from_args(args))
    ks = _parse_ks(args.k)
    scores: dict[tuple[str, int], float] = {}
    counters: dict[str, int] = {}
    for pair in pairs:
        idx = counters.get(pair.question_id, 0)
        counters[pair.question_id] = idx + 1
        scores[(pair.question_id, idx)] = score(pair.question, pair.answer, params, vocab)
    ranked = ranked_lists_from_pairs(pairs, scores)
    report = evaluate_ranked_lists(ranked, ks=ks, include_empty=args.include_empty)
    if args.format in ("table", "both"):
        print(report.to_table())
    if args.format in ("json", "both", "json-lines"):
        print(report.to_json())
    if args.format == "json-lines":
        for qid, qm in report.per_query.items():
            doc: dict = {"query_id": qid, "rr": qm.rr, "ap": qm.ap}
            for k in ks:
                doc[f"p@{k}"] = qm.p_at_k[k]
            for k in ks:
                doc[f"ndcg@{k}"] = qm.ndcg_at_k[k]
            print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    result = gradcheck.run_suite(trials=args.trials, seed=args.seed)
    for line in result.summary_lines():
        print(line)
    print(f"elapsed: {result.elapsed_s:.1f}s")
    if not result.ok:
        failing = [name for name, fam in result.families.items() if not fam.ok]
        print("gradient check FAILED for: " + ", ".join(failing), file=sys.stderr)
        return EXIT_FAILURE
    print("all gradient checks passed")
    return EXIT_OK


def cmd_synth(args) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    train_pairs = synthetic.make_pairs(
        args.questions,
        n_candidates=args.candidates,
        p_positive=args.pct_positive / 100.0,
        id_prefix="TR",
        seed=args.seed,
    )
    test_pairs = synthetic.make_pairs(
        args.test_questions,
        n_candidates=args.candidates,
        p_positive=args.pct_positive / 100.0,
        min_positives=1,
        id_prefix="TE",
        seed=args.seed + 10_000,
    )
    train_path = os.path.join(args.outdir, "train.tsv")
    test_path = os.path.join(args.outdir, "test.tsv")
    with open(train_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_dataset(train_pairs))
    with open(test_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_dataset(test_pairs))
    print(f"wrote {train_path} ({args.questions} questions) and {test_path} "
          f"({args.test_questions} questions)")
    return EXIT_OK


def _add_schema_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--graded", action="store_true",
                     help="labels are graded 0..4 instead of binary")
    sub.add_argument("--threshold", type=int, default=3,
                     help="graded label binarization threshold (default 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrarank",
        description="Learning-to-rank for question-answer pairs with "
                    "generation-based augmentation and a contrastive objective.",
    )
    parser.add_argument("--version", action="version", version=f"contrarank {__version__}")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus statistics for a dataset file")
    p.add_argument("dataset")
    _add_schema_flags(p)
    p.add_argument("--format", choices=["table", "json", "both"], default="table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("augment", help="synthesize pseudo-positive texts into a cache")
    p.add_argument("dataset")
    _add_schema_flags(p)
    p.add_argument("--generator", choices=["stub", "oracle", "remote"], default="stub")
    p.add_argument("--url", help=f"generation service URL (default ${GENERATOR_URL_ENV})")
    p.add_argument("--out", required=True, help="augmentation cache path to write")
    p.add_argument("--no-qg", action="store_true", help="skip question generation")
    p.add_argument("--no-ag", action="store_true", help="skip answer generation")
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--jobs", type=int, default=4,
                   help="concurrent generation requests (remote generator)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("corpus", help="export a generator fine-tuning corpus")
    p.add_argument("dataset")
    _add_schema_flags(p)
    p.add_argument("--mode", choices=["qg", "ag"], required=True,
                   help="qg: positive answer -> question; ag: question -> positive answer")
    p.add_argument("--out", required=True, help="two-column TAB corpus path to write")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="fit the scorer on a dataset")
    p.add_argument("dataset")
    _add_schema_flags(p)
    p.add_argument("--mode", choices=list(trainer.MODES), default="pairwise")
    p.add_argument("--cache", help="augmentation cache (required for contrastive mode)")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--dim", type=int, default=32, help="embedding width")
    p.add_argument("--hidden", type=int, default=32, help="hidden layer width")
    p.add_argument("--min-freq", type=int, default=1, help="vocabulary frequency cutoff")
    p.add_argument("--no-qg", action="store_true",
                   help="ablation: ignore synthesized questions")
    p.add_argument("--no-ag", action="store_true",
                   help="ablation: ignore synthesized answers")
    p.add_argument("--synth-as-positive", action="store_true",
                   help="ablation: treat synthesized pairs as positive pointwise samples")
    p.add_argument("--dev", help="dev dataset evaluated after each epoch")
    p.add_argument("--k", default="1,3,10", help="comma-separated metric cutoffs")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--history", help="history JSONL path (default <out>.history.jsonl)")
    p.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    _add_schema_flags(p)
    p.add_argument("--k", default="1,3,10", help="comma-separated metric cutoffs")
    p.add_argument("--format", choices=["table", "json", "both", "json-lines"],
                   default="both")
    p.add_argument("--include-empty", action="store_true",
                   help="score queries with no relevant answer as 0 instead of skipping")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--trials", type=int, default=100, help="configurations per loss family")
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate the synthetic topic-matching benchmark")
    p.add_argument("outdir")
    p.add_argument("--questions", type=int, default=200)
    p.add_argument("--test-questions", type=int, default=50)
    p.add_argument("--candidates", type=int, default=10)
    p.add_argument("--pct-positive", type=float, default=12.0)
    p.add_argument("--seed", type=int, default=17)
    p.set_defaults(func=cmd_synth)

    parser.subcommand_parsers = {name: sp for name, sp in sub.choices.items()}
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-scan for --config and install its values as parser defaults, so
    explicit flags override the file."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    if not os.path.exists(known.config):
        raise CliError(f"config file not found: {known.config}")
    with open(known.config, "r", encoding="utf-8") as fh:
        try:
            values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {known.config}: invalid JSON: {exc}")
    if not isinstance(values, dict):
        raise CliError(f"config file {known.config}: expected a JSON object")
    parser.set_defaults(**values)
    # subcommand parsers apply their own defaults over the parent namespace,
    # so the file's values must become their defaults too
    for sub in parser.subcommand_parsers.values():
        sub.set_defaults(**values)
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, CacheFormatError, CheckpointFormatError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
