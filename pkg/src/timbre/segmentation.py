"""Onset detection and attack / steady-state segmentation.

The onset is the first 10 ms window whose RMS lies at least 10 dB above the
RMS of the whole clip. From there the attack is a fixed 100 ms and the steady
segment starts after a further 200 ms guard gap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AudioClip
from .dsp import db_ratio, rms
from .errors import ClipTooShort, NoOnsetFound

WINDOW_MS = 10.0
THRESHOLD_DB = 10.0
ATTACK_MS = 100.0
GUARD_MS = 200.0
MIN_STEADY_MS = 100.0


def ms_to_samples(ms: float, sample_rate: int) -> int:
    return int(round(ms * sample_rate / 1000.0))


@dataclass(frozen=True)
class OnsetAnalysis:
    window_ms: float
    window_len: int
    onset_index: int
    onset_time: float
    window_rms: np.ndarray
    signal_rms: float


def window_rms(samples, window_len: int) -> np.ndarray:
    """RMS of consecutive non-overlapping windows; a trailing partial window is dropped."""
    x = np.asarray(samples, dtype=float)
    n = x.size // window_len
    frames = x[: n * window_len].reshape(n, window_len)
    return np.sqrt(np.mean(frames * frames, axis=1))


def detect_onset(clip: AudioClip, threshold_db: float = THRESHOLD_DB) -> OnsetAnalysis:
    """Find the first window at least ``threshold_db`` above the clip's RMS.

    Raises:
        ClipTooShort: clip shorter than two windows.
        NoOnsetFound: no window crosses the threshold (always for silence).
    """
    wlen = ms_to_samples(WINDOW_MS, clip.sample_rate)
    if clip.samples.size < 2 * wlen:
        raise ClipTooShort(f"{clip.source_id}: clip shorter than {2 * WINDOW_MS:g} ms")
    per_window = window_rms(clip.samples, wlen)
    total = rms(clip.samples)
    if total > 0:
        for i, level in enumerate(per_window):
            if level > 0 and db_ratio(level, total) >= threshold_db:
                return OnsetAnalysis(WINDOW_MS, wlen, i * wlen, i * wlen / clip.sample_rate,
                                     per_window, total)
    raise NoOnsetFound(f"{clip.source_id}: no window {threshold_db:g} dB above clip RMS")


def attack_bounds(clip: AudioClip, onset: OnsetAnalysis) -> tuple:
    start = onset.onset_index
    end = start + ms_to_samples(ATTACK_MS, clip.sample_rate)
    if end > clip.samples.size:
        raise ClipTooShort(f"{clip.source_id}: less than {ATTACK_MS:g} ms after onset")
    return start, end


def steady_bounds(clip: AudioClip, onset: OnsetAnalysis) -> tuple:
    start = onset.onset_index + ms_to_samples(ATTACK_MS + GUARD_MS, clip.sample_rate)
    if clip.samples.size - start < ms_to_samples(MIN_STEADY_MS, clip.sample_rate):
        raise ClipTooShort(
            f"{clip.source_id}: steady segment shorter than {MIN_STEADY_MS:g} ms"
        )
    return start, clip.samples.size


def extract_attack(clip: AudioClip, onset: OnsetAnalysis) -> AudioClip:
    return clip.segment(*attack_bounds(clip, onset))


def extract_steady(clip: AudioClip, onset: OnsetAnalysis) -> AudioClip:
    return clip.segment(*steady_bounds(clip, onset))
