"""Fifty-band normalized spectral feature vectors for the five experiment variants."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import AudioClip, InstrumentClass, ToneLabel
from .errors import ParseError
from .dsp import GRID_HZ, fft_magnitude, resample_to_unit_grid
from .segmentation import detect_onset, extract_attack, extract_steady

N_BANDS = 50
BAND_WIDTH = 20
REFERENCE_HZ = 440.0
LOW_BAND_TOP_HZ = 100


class Variant(enum.Enum):
    Base = "base"
    AttackOnly = "attack-only"
    WithoutAttack = "without-attack"
    First100Hz = "first-100hz"
    Following900Hz = "following-900hz"

    @property
    def title(self) -> str:
        return _TITLES[self]

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("_", "-")
        for v in cls:
            if key in (v.value, v.name.lower()):
                return v
        raise ValueError(f"unknown variant {text!r}; choose from {[v.value for v in cls]}")


_TITLES = {
    Variant.Base: "Base experiment",
    Variant.AttackOnly: "Only attack",
    Variant.WithoutAttack: "Without attack",
    Variant.First100Hz: "First 100Hz",
    Variant.Following900Hz: "Following 900Hz",
}


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: InstrumentClass
    variant: Variant
    source_id: str


def shift_to_a4(spec, tone: ToneLabel) -> np.ndarray:
    """Rescale the frequency axis so the tone's fundamental lands on 440 Hz.

    The output at ``f`` Hz is the input at ``f / r`` with ``r = 440 / f0``,
    linearly interpolated; frequencies outside the 1..1000 Hz source map to 0.
    """
    spec = np.asarray(spec, dtype=float)
    ratio = REFERENCE_HZ / tone.base_frequency
    if ratio == 1.0:
        return spec.copy()
    return np.interp(GRID_HZ / ratio, GRID_HZ, spec, left=0.0, right=0.0)


def apply_band_mask(spec, variant: Variant) -> np.ndarray:
    out = np.array(spec, dtype=float)
    if variant is Variant.First100Hz:
        out[GRID_HZ > LOW_BAND_TOP_HZ] = 0.0
    elif variant is Variant.Following900Hz:
        out[GRID_HZ <= LOW_BAND_TOP_HZ] = 0.0
    return out


def partition_50(spec) -> np.ndarray:
    """Mean of each 20 Hz band [20k+1, 20k+20] Hz, k = 0..49."""
    return np.asarray(spec, dtype=float).reshape(N_BANDS, BAND_WIDTH).mean(axis=1)


def normalize(values) -> np.ndarray:
    """Min-max scale into [0, 1]; a constant vector maps to zeros."""
    x = np.asarray(values, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def select_segment(clip: AudioClip, variant: Variant) -> AudioClip:
    if variant is Variant.AttackOnly:
        return extract_attack(clip, detect_onset(clip))
    if variant is Variant.WithoutAttack:
        return extract_steady(clip, detect_onset(clip))
    return clip


def unit_spectrum(clip: AudioClip) -> np.ndarray:
    return resample_to_unit_grid(fft_magnitude(clip.samples, clip.sample_rate))


def band_means(clip: AudioClip, variant: Variant) -> np.ndarray:
    """Everything up to, but excluding, normalization."""
    segment = select_segment(clip, variant)
    spec = shift_to_a4(unit_spectrum(segment), clip.tone)
    return partition_50(apply_band_mask(spec, variant))


def extract_features(clip: AudioClip, variant: Variant) -> FeatureVector:
    return FeatureVector(normalize(band_means(clip, variant)), clip.instrument, variant,
                         clip.source_id)


FEATURE_HEADER = ["source_id", "instrument", "variant"] + [f"f{k:02d}" for k in range(N_BANDS)]


def write_features(vectors, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for v in vectors:
            w.writerow([v.source_id, v.label.name, v.variant.value]
                       + [f"{x:.17g}" for x in v.values])


def read_features(path) -> list:
    out = []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FEATURE_HEADER:
            raise ParseError("unexpected feature file header", line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FEATURE_HEADER):
                raise ParseError(f"expected {len(FEATURE_HEADER)} fields", line=lineno)
            try:
                values = np.array([float(x) for x in row[3:]])
                variant = Variant.parse(row[2])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            out.append(FeatureVector(values, InstrumentClass.parse(row[1]), variant, row[0]))
    return out
