"""Command-line entry point.

Subcommands::

    timbre synth --seed S --per-class N --out DIR
    timbre features --manifest F --variant V --out CSV
    timbre train --features CSV --seed S --out MODEL
    timbre experiment (--manifest F | --synthetic N) (--variant V | --all)
                      --runs R --seed S --report-dir D

``TIMBRE_LOG`` (error, warn, info, debug) sets the log level.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import experiment as exp
from .dataset import group_by_class, load_clip, load_manifest, stratified_split
from .errors import AllClipsSkipped, TimbreError
from .features import Variant, read_features, write_features
from .mlp import TrainConfig, evaluate, save_model, train_early_stopping
from .synthetic import generate_synthetic_corpus, write_corpus

log = logging.getLogger("timbre")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging() -> None:
    level = _LEVELS.get(os.environ.get("TIMBRE_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_synth(args) -> int:
    clips = generate_synthetic_corpus(args.seed, args.per_class)
    path = write_corpus(clips, args.out)
    print(f"wrote {len(clips)} clips and {path}")
    return 0


def cmd_features(args) -> int:
    manifest = load_manifest(args.manifest)
    clips = [load_clip(e, manifest) for e in manifest.entries]
    vectors, skipped = exp.featurize(clips, args.variant)
    if not vectors:
        raise AllClipsSkipped(f"every clip was skipped: {skipped}")
    write_features(vectors, args.out)
    print(f"wrote {len(vectors)} feature vectors to {args.out}"
          + (f" (skipped {skipped})" if skipped else ""))
    return 0


def cmd_train(args) -> int:
    vectors = read_features(args.features)
    by_id = {v.source_id: v for v in vectors}
    split = stratified_split(group_by_class(vectors, key=lambda v: v.label), seed=args.seed)

    def arrays(ids):
        chosen = [by_id[i] for i in sorted(ids)]
        return (np.array([v.values for v in chosen]),
                np.array([int(v.label) - 1 for v in chosen]))

    cfg = replace(TrainConfig(), seed=args.seed, max_epochs=args.max_epochs)
    outcome = train_early_stopping(arrays(split.train_ids), arrays(split.validation_ids), cfg)
    cm, acc = evaluate(outcome.model, arrays(split.test_ids))
    save_model(args.out, outcome.model, cfg)
    print(f"best epoch {outcome.best_epoch} of {outcome.epochs_run}; "
          f"test accuracy {acc:.4f} ({int(np.trace(cm.counts))}/{cm.total})")
    print(exp.format_confusion(cm))
    return 0


def cmd_experiment(args) -> int:
    spec = exp.ExperimentSpec(
        variant=args.variant or Variant.Base, runs=args.runs, seed=args.seed,
        manifest=args.manifest, synthetic_per_class=args.synthetic,
    )
    reports = exp.run_all(spec) if args.all else [exp.run_experiment(spec)]
    exp.write_report_dir(reports, args.report_dir)
    print(exp.summary_table(reports), end="")
    print(f"reports written to {args.report_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timbre", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract feature vectors to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", type=Variant.parse, default=Variant.Base)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train one network from a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=TrainConfig.max_epochs)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="run repeated experiments and write reports")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--synthetic", type=int, metavar="PER_CLASS")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--variant", type=Variant.parse)
    which.add_argument("--all", action="store_true")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report-dir", default="reports")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TimbreError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
