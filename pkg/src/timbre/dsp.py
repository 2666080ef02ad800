"""Signal-processing kernels: magnitude spectra, RMS and dB ratios.

The fast path uses ``numpy.fft``; :func:`dft_magnitude_oracle` evaluates the
DFT sum directly and exists only so the fast path can be checked against an
independent computation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InsufficientBandwidth, NonPositive

#: Frequency grid every spectrum is canonicalised onto (Hz).
GRID_HZ = np.arange(1, 1001, dtype=float)


@dataclass(frozen=True)
class MagnitudeSpectrum:
    """Linear magnitudes for bins ``0..N/2`` spaced ``bin_hz`` apart."""

    values: np.ndarray
    bin_hz: float

    def __post_init__(self):
        if self.bin_hz <= 0:
            raise ValueError("bin_hz must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.bin_hz


def _as_signal(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("signal is empty")
    return x


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def dft_oracle(samples) -> np.ndarray:
    """Complex DFT of ``samples`` by direct O(N^2) summation, all N bins."""
    x = _as_signal(samples)
    n = x.size
    # k*t reduced mod n keeps the phase argument small and exact
    kt = np.outer(np.arange(n), np.arange(n)) % n
    phase = -2.0 * np.pi * kt / n
    return (np.cos(phase) @ x) + 1j * (np.sin(phase) @ x)


def dft_magnitude_oracle(samples, sample_rate: float = 1.0) -> MagnitudeSpectrum:
    """Brute-force ``|DFT|`` for bins ``0..N//2`` (no padding applied)."""
    x = _as_signal(samples)
    full = np.abs(dft_oracle(x))
    return MagnitudeSpectrum(full[: x.size // 2 + 1], sample_rate / x.size)


def fft_magnitude(samples, sample_rate: float) -> MagnitudeSpectrum:
    """Magnitude spectrum of ``samples`` zero-padded to the next power of two.

    No window is applied; the whole segment is transformed in one frame.
    """
    x = _as_signal(samples)
    n = next_pow2(x.size)
    mags = np.abs(np.fft.rfft(x, n=n))
    return MagnitudeSpectrum(mags, sample_rate / n)


def resample_to_unit_grid(spec: MagnitudeSpectrum) -> np.ndarray:
    """Linearly interpolate ``spec`` onto the integer frequencies 1..1000 Hz.

    Returns an array of 1000 magnitudes, element ``k`` at ``k + 1`` Hz.

    Raises:
        InsufficientBandwidth: if the highest bin lies below 1000 Hz.
    """
    top = (len(spec.values) - 1) * spec.bin_hz
    if top < GRID_HZ[-1]:
        raise InsufficientBandwidth(
            f"spectrum reaches {top:.1f} Hz, need at least 1000 Hz"
        )
    return np.interp(GRID_HZ, spec.frequencies, spec.values)


def rms(samples) -> float:
    x = _as_signal(samples)
    return float(np.sqrt(np.mean(x * x)))


def db_ratio(a: float, b: float) -> float:
    """Amplitude ratio in decibels, ``20 log10(a / b)``."""
    if a <= 0 or b <= 0:
        raise NonPositive(f"db_ratio needs positive inputs, got {a!r}, {b!r}")
    return 20.0 * np.log10(a / b)
