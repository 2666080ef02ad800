"""Experiment harness: repeated split/train/evaluate runs per feature variant."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import InstrumentClass, group_by_class, load_clip, load_manifest, stratified_split
from .errors import (
    AllClipsSkipped, ClipTooShort, DataSourceError, InsufficientBandwidth, NoOnsetFound,
)
from .features import Variant, extract_features
from .mlp import ConfusionMatrix, TrainConfig, evaluate, train_early_stopping
from .synthetic import generate_synthetic_corpus

log = logging.getLogger(__name__)

#: Accuracies reported for the recorded corpus, per variant (percent).
REFERENCE_ACCURACY = {
    Variant.Base: 93.5,
    Variant.AttackOnly: 80.2,
    Variant.WithoutAttack: 73.2,
    Variant.First100Hz: 64.2,
    Variant.Following900Hz: 90.6,
}

RUNS_NOTE = ("Accuracies are means over independent runs (default 10). The reference "
             "accuracies are described both as ten-run and as six-run averages; ten is used.")

# errors that skip a clip instead of failing the experiment
SKIPPABLE = (NoOnsetFound, ClipTooShort, InsufficientBandwidth)


@dataclass(frozen=True)
class ExperimentSpec:
    variant: Variant = Variant.Base
    runs: int = 10
    seed: int = 0
    manifest: str | None = None
    synthetic_per_class: int | None = None
    train_config: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if (self.manifest is None) == (self.synthetic_per_class is None):
            raise ValueError("give exactly one of manifest or synthetic_per_class")


@dataclass
class RunResult:
    run: int
    seed: int
    accuracy: float
    best_epoch: int
    epochs_run: int
    confusion: ConfusionMatrix
    train_curve: list
    validation_curve: list
    n_train: int
    n_validation: int
    n_test: int


@dataclass
class ExperimentReport:
    variant: Variant
    per_run: list
    n_clips: int
    skipped: dict = field(default_factory=dict)
    excluded_classes: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.per_run]))

    @property
    def pooled_confusion(self) -> ConfusionMatrix:
        pooled = ConfusionMatrix.empty()
        for r in self.per_run:
            pooled = pooled + r.confusion
        return pooled

    @property
    def n_skipped(self) -> int:
        return sum(self.skipped.values())


def run_seed(base_seed: int, run: int) -> int:
    """Seed of run ``run`` (1-based)."""
    return base_seed + run


def load_corpus(spec: ExperimentSpec) -> list:
    if spec.synthetic_per_class is not None:
        return generate_synthetic_corpus(spec.seed, spec.synthetic_per_class)
    try:
        manifest = load_manifest(spec.manifest)
        clips = [load_clip(e, manifest) for e in manifest.entries]
    except OSError as exc:
        raise DataSourceError(str(exc)) from exc
    if not clips:
        raise DataSourceError(f"{spec.manifest}: manifest lists no clips")
    return clips


def featurize(clips, variant: Variant):
    """Feature vectors for every usable clip plus skip counts by reason."""
    vectors, skipped = [], Counter()
    for clip in clips:
        try:
            vectors.append(extract_features(clip, variant))
        except SKIPPABLE as exc:
            skipped[type(exc).__name__] += 1
            log.debug("skipping %s for %s: %s", clip.source_id, variant.value, exc)
    if skipped:
        log.warning("%s: skipped %d of %d clips %s", variant.value, sum(skipped.values()),
                    len(clips), dict(skipped))
    return vectors, dict(skipped)


def _arrays(vectors, ids):
    chosen = [v for v in vectors if v.source_id in ids]
    X = np.array([v.values for v in chosen]).reshape(len(chosen), -1)
    y = np.array([int(v.label) - 1 for v in chosen], dtype=int)
    return X, y


def run_single(vectors, run: int, base_seed: int, cfg: TrainConfig = TrainConfig()) -> RunResult:
    """One split/train/evaluate cycle; reproducible from ``(base_seed, run)`` alone."""
    seed = run_seed(base_seed, run)
    split = stratified_split(group_by_class(vectors, key=lambda v: v.label), seed=seed)
    train, val, test = (_arrays(vectors, ids) for ids in
                        (split.train_ids, split.validation_ids, split.test_ids))
    outcome = train_early_stopping(train, val, replace(cfg, seed=seed))
    cm, acc = evaluate(outcome.model, test)
    return RunResult(run, seed, acc, outcome.best_epoch, outcome.epochs_run, cm,
                     outcome.train_error_curve, outcome.validation_error_curve,
                     len(train[1]), len(val[1]), len(test[1]))


def experiment_on_clips(clips, variant: Variant, runs: int, seed: int,
                        cfg: TrainConfig = TrainConfig()) -> ExperimentReport:
    vectors, skipped = featurize(clips, variant)
    if not vectors:
        raise AllClipsSkipped(f"{variant.value}: every clip was skipped ({skipped})")
    counts = Counter(v.label for v in vectors)
    excluded = sorted(c for c, n in counts.items() if n < 3)
    if excluded:
        log.warning("%s: classes with fewer than 3 usable clips excluded: %s", variant.value,
                    [c.name for c in excluded])
        vectors = [v for v in vectors if v.label not in excluded]
        if not vectors:
            raise AllClipsSkipped(f"{variant.value}: no class has 3 usable clips")
    per_run = []
    for run in range(1, runs + 1):
        result = run_single(vectors, run, seed, cfg)
        log.info("%s run %d (seed %d): accuracy %.4f, best epoch %d", variant.value, run,
                 result.seed, result.accuracy, result.best_epoch)
        per_run.append(result)
    return ExperimentReport(variant, per_run, len(clips), skipped, excluded)


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return experiment_on_clips(load_corpus(spec), spec.variant, spec.runs, spec.seed,
                               spec.train_config)


def run_all(spec: ExperimentSpec) -> list:
    """One report per variant on the same corpus and seed schedule."""
    clips = load_corpus(spec)
    return [experiment_on_clips(clips, v, spec.runs, spec.seed, spec.train_config)
            for v in Variant]


# -- reporting -----------------------------------------------------------------

CLASS_NAMES = [c.name for c in InstrumentClass]


def format_confusion(cm: ConfusionMatrix) -> str:
    width = max(len(n) for n in CLASS_NAMES) + 1
    lines = [" " * width + "".join(f"{n[:7]:>8}" for n in CLASS_NAMES) + "   recall"]
    for name, row, rec in zip(CLASS_NAMES, cm.counts, cm.recall()):
        rec_txt = "     n/a" if np.isnan(rec) else f"{rec:9.3f}"
        lines.append(f"{name:<{width}}" + "".join(f"{c:>8d}" for c in row) + rec_txt)
    return "\n".join(lines)


def format_report(report: ExperimentReport) -> str:
    pooled = report.pooled_confusion
    out = [
        f"experiment: {report.variant.title} ({report.variant.value})",
        f"clips: {report.n_clips}  skipped: {report.n_skipped} {report.skipped or ''}".rstrip(),
    ]
    if report.excluded_classes:
        out.append("excluded classes: " + ", ".join(c.name for c in report.excluded_classes))
    out += [f"runs: {len(report.per_run)}", RUNS_NOTE, "",
            "run  seed  accuracy  best_epoch  epochs  train/val/test"]
    for r in report.per_run:
        out.append(f"{r.run:>3} {r.seed:>5}  {r.accuracy:8.4f}  {r.best_epoch:>10}  "
                   f"{r.epochs_run:>6}  {r.n_train}/{r.n_validation}/{r.n_test}")
    out += ["", f"mean accuracy: {report.mean_accuracy:.4f}",
            f"reference accuracy: {REFERENCE_ACCURACY[report.variant]:.1f}%", "",
            "pooled confusion matrix (rows true, columns predicted):",
            format_confusion(pooled), "",
            f"accuracy: {pooled.accuracy:.4f} ({int(np.trace(pooled.counts))}/{pooled.total})"]
    return "\n".join(out) + "\n"


def write_report_csv(report: ExperimentReport, path) -> None:
    pooled = report.pooled_confusion
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["section", "key", "subkey", "value"])
        for i, true in enumerate(CLASS_NAMES):
            for j, pred in enumerate(CLASS_NAMES):
                w.writerow(["cell", true, pred, int(pooled.counts[i, j])])
        for r in report.per_run:
            w.writerow(["run", r.run, "seed", r.seed])
            w.writerow(["run", r.run, "accuracy", repr(r.accuracy)])
            w.writerow(["run", r.run, "best_epoch", r.best_epoch])
            w.writerow(["run", r.run, "test_size", r.n_test])
        w.writerow(["summary", "variant", "", report.variant.value])
        w.writerow(["summary", "runs", "", len(report.per_run)])
        w.writerow(["summary", "mean_accuracy", "", repr(report.mean_accuracy)])
        w.writerow(["summary", "accuracy", "", repr(pooled.accuracy)])
        w.writerow(["summary", "total", "", pooled.total])
        w.writerow(["summary", "clips", "", report.n_clips])
        for reason, n in sorted(report.skipped.items()):
            w.writerow(["skipped", reason, "", n])


def read_confusion_csv(path) -> ConfusionMatrix:
    cm = ConfusionMatrix.empty()
    index = {n: i for i, n in enumerate(CLASS_NAMES)}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["section"] == "cell":
                cm.counts[index[row["key"]], index[row["subkey"]]] = int(row["value"])
    return cm


def write_curves_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "epoch", "train_error", "validation_error"])
        for r in report.per_run:
            for epoch, (tr, va) in enumerate(zip(r.train_curve, r.validation_curve)):
                w.writerow([r.run, epoch, repr(tr), repr(va)])


def emit_report(report: ExperimentReport, fmt: str, out) -> Path:
    out = Path(out)
    if fmt == "text":
        out.write_text(format_report(report), encoding="utf-8")
    elif fmt == "csv":
        write_report_csv(report, out)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return out


def summary_table(reports) -> str:
    lines = [RUNS_NOTE, "",
             f"{'Experiment':<18}{'Accuracy':>10}{'Reference':>11}{'Skipped':>9}"]
    for rep in reports:
        lines.append(f"{rep.variant.title:<18}{100 * rep.mean_accuracy:>9.1f}%"
                     f"{REFERENCE_ACCURACY[rep.variant]:>10.1f}%{rep.n_skipped:>9d}")
    return "\n".join(lines) + "\n"


def write_report_dir(reports, report_dir) -> Path:
    """Text and CSV report plus error curves per variant, and ``summary.txt``."""
    d = Path(report_dir)
    d.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        stem = rep.variant.value
        emit_report(rep, "text", d / f"{stem}.txt")
        emit_report(rep, "csv", d / f"{stem}.csv")
        write_curves_csv(rep, d / f"{stem}_curves.csv")
    (d / "summary.txt").write_text(summary_table(reports), encoding="utf-8")
    return d
