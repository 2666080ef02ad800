"""Additive-synthesis stand-in for the recorded corpus.

Each instrument gets a fixed profile: harmonic amplitudes, an attack envelope,
vibrato depth and a short filtered-noise transient at the onset. Clips are
rendered at a fourth-octave fundamental with small random detune, gain and
per-harmonic jitter, plus white noise. Everything is a pure function of the
seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfilt

from .dataset import (
    AudioClip, DatasetManifest, InstrumentClass, ManifestEntry, PITCH_CLASSES, ToneLabel,
    write_manifest, write_wav,
)

SAMPLE_RATE = 44100
DURATION_S = 2.0
NOISE_SNR_DB = (35.0, 45.0)
MAX_DETUNE = 0.005


@dataclass(frozen=True)
class InstrumentProfile:
    harmonics: tuple      # relative amplitudes of harmonics 1, 2, 3, ...
    rise_ms: float        # linear attack rise time
    decay_s: float        # time constant of the fall from peak to sustain
    sustain: float        # sustain level relative to the peak
    vibrato_cents: float
    burst_level: float    # onset noise transient, relative to the peak
    burst_band: tuple     # (low, high) Hz of the transient's band-pass


PROFILES = {
    InstrumentClass.Banjo: InstrumentProfile(
        (1.0, 0.6, 0.65, 0.5, 0.4, 0.3), 5.0, 0.08, 0.06, 0.0, 0.5, (150, 400)),
    InstrumentClass.Cello: InstrumentProfile(
        (1.0, 0.55, 0.45, 0.3, 0.2, 0.1), 50.0, 0.25, 0.09, 6.0, 0.15, (40, 120)),
    InstrumentClass.Clarinet: InstrumentProfile(
        (1.0, 0.08, 0.6, 0.05, 0.35, 0.03), 30.0, 0.20, 0.09, 0.0, 0.1, (500, 900)),
    InstrumentClass.EnglishHorn: InstrumentProfile(
        (1.0, 0.7, 0.55, 0.3, 0.2, 0.1), 35.0, 0.18, 0.1, 2.0, 0.12, (600, 1000)),
    InstrumentClass.Guitar: InstrumentProfile(
        (1.0, 0.4, 0.25, 0.15, 0.1, 0.05), 8.0, 0.15, 0.05, 0.0, 0.35, (70, 200)),
    InstrumentClass.Oboe: InstrumentProfile(
        (1.0, 0.25, 0.7, 0.5, 0.3, 0.2), 25.0, 0.15, 0.1, 3.0, 0.15, (300, 700)),
    InstrumentClass.Trumpet: InstrumentProfile(
        (1.0, 0.6, 0.7, 0.65, 0.6, 0.4), 20.0, 0.12, 0.1, 1.5, 0.2, (20, 60)),
    InstrumentClass.Violin: InstrumentProfile(
        (1.0, 0.15, 0.35, 0.25, 0.15, 0.1), 60.0, 0.22, 0.05, 8.0, 0.08, (200, 500)),
}


def attack_envelope(n: int, sample_rate: int, onset: int, rise_ms: float, decay_s: float,
                    sustain: float, release_s: float = 0.05) -> np.ndarray:
    """Silence until ``onset``, linear rise, exponential fall to ``sustain``, short release."""
    t = (np.arange(n) - onset) / sample_rate
    rise = rise_ms / 1000.0
    env = np.zeros(n)
    rising = (t >= 0) & (t < rise)
    env[rising] = t[rising] / rise
    after = t >= rise
    env[after] = sustain + (1.0 - sustain) * np.exp(-(t[after] - rise) / decay_s)
    tail = int(release_s * sample_rate)
    if tail:
        env[-tail:] *= np.linspace(1.0, 0.0, tail)
    return env


def render_clip(instrument: InstrumentClass, tone: ToneLabel, rng: np.random.Generator, *,
                sample_rate: int = SAMPLE_RATE, duration: float = DURATION_S,
                onset_s: float | None = None, detune: float | None = None,
                with_noise: bool = True, source_id: str = "",
                profile: InstrumentProfile | None = None) -> AudioClip:
    """Render one clip. Unspecified ``onset_s``/``detune`` are drawn from ``rng``.

    ``profile`` replaces the instrument's stock profile, e.g. to strip the
    onset transient when only the harmonic content matters.
    """
    prof = profile or PROFILES[instrument]
    n = int(round(duration * sample_rate))
    if onset_s is None:
        onset_s = rng.uniform(0.15, 0.45)
    if detune is None:
        detune = rng.uniform(-MAX_DETUNE, MAX_DETUNE)
    gain = rng.uniform(0.3, 0.9)
    jitter = rng.uniform(0.9, 1.1, size=len(prof.harmonics))
    vib_rate = rng.uniform(4.5, 6.5)
    onset = int(np.ceil(onset_s * sample_rate))

    t = np.arange(n) / sample_rate
    f0 = tone.base_frequency * (1.0 + detune)
    vib = 2.0 ** (prof.vibrato_cents / 1200.0 * np.sin(2 * np.pi * vib_rate * t)) - 1.0
    # phase of the fundamental, integrated so vibrato bends pitch smoothly
    phase = 2 * np.pi * f0 * np.cumsum(1.0 + vib) / sample_rate
    tone_sig = np.zeros(n)
    for h, amp in enumerate(prof.harmonics, start=1):
        tone_sig += amp * jitter[h - 1] * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    tone_sig /= np.sum(prof.harmonics)
    env = attack_envelope(n, sample_rate, onset, prof.rise_ms, prof.decay_s, prof.sustain)
    signal = tone_sig * env

    if prof.burst_level > 0:
        burst_len = int((prof.rise_ms + 30.0) / 1000.0 * sample_rate)
        sos = butter(2, prof.burst_band, btype="bandpass", fs=sample_rate, output="sos")
        burst = sosfilt(sos, rng.standard_normal(burst_len))
        burst *= prof.burst_level / (np.max(np.abs(burst)) + 1e-12)
        burst *= np.exp(-np.arange(burst_len) / (0.4 * burst_len))
        end = min(n, onset + burst_len)
        signal[onset:end] += burst[: end - onset]

    signal *= gain / max(1.0, np.max(np.abs(signal)) / 0.95)
    if with_noise:
        snr = rng.uniform(*NOISE_SNR_DB)
        level = np.sqrt(np.mean(signal ** 2)) * 10 ** (-snr / 20.0)
        signal = signal + level * rng.standard_normal(n)
    return AudioClip(signal, sample_rate, instrument, tone, source_id)


def programmed_onset_clip(onset_s: float, rng: np.random.Generator, *, rise_ms: float = 30.0,
                          sample_rate: int = SAMPLE_RATE, duration: float = DURATION_S,
                          freq: float = 440.0, floor: float = 1e-4) -> AudioClip:
    """A single partial switched on at ``onset_s`` over a noise floor.

    The envelope (linear rise of ``rise_ms``, 40 ms fall to 5% sustain) puts the
    10 dB crossing within 20 ms after the programmed onset for rises of about
    25-35 ms, whatever the onset's position inside a 10 ms window.
    """
    n = int(round(duration * sample_rate))
    onset = int(np.ceil(onset_s * sample_rate))
    env = attack_envelope(n, sample_rate, onset, rise_ms, 0.04, 0.05)
    t = np.arange(n) / sample_rate
    x = env * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    x += floor * rng.standard_normal(n)
    return AudioClip(x, sample_rate, InstrumentClass.Trumpet, ToneLabel("A"),
                     f"onset_{onset}")


def generate_synthetic_corpus(seed: int, per_class: int, sample_rate: int = SAMPLE_RATE,
                              duration: float = DURATION_S) -> list:
    """``per_class`` clips for each instrument, tones drawn uniformly from the octave."""
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    rng = np.random.default_rng(seed)
    clips = []
    for instrument in InstrumentClass:
        for i in range(per_class):
            tone = ToneLabel(PITCH_CLASSES[rng.integers(len(PITCH_CLASSES))])
            sid = f"{instrument.name.lower()}_{tone.pitch_class.replace('#', 's')}4_{i:03d}"
            clips.append(render_clip(instrument, tone, rng, sample_rate=sample_rate,
                                     duration=duration, source_id=sid))
    return clips


def write_corpus(clips, out_dir) -> Path:
    """Write clips as 16-bit WAV files plus ``manifest.csv``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest([], out_dir)
    for clip in clips:
        name = f"{clip.source_id}.wav"
        write_wav(out_dir / name, clip.samples, clip.sample_rate)
        manifest.entries.append(ManifestEntry(name, clip.instrument, clip.tone))
    path = out_dir / "manifest.csv"
    write_manifest(manifest, path)
    return path
