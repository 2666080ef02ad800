import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timbre.dataset import AudioClip, InstrumentClass, ToneLabel
from timbre.errors import ClipTooShort, NoOnsetFound
from timbre.segmentation import OnsetAnalysis, detect_onset, extract_attack, extract_steady
from timbre.synthetic import programmed_onset_clip

SR = 44100


def make_clip(x, sr=SR):
    return AudioClip(np.asarray(x, dtype=float), sr, InstrumentClass.Guitar, ToneLabel("E"), "c")


def scan_oracle(x, sr):
    """Plain-loop scan: first 10 ms window whose mean power is >= 10x the clip's."""
    w = round(sr / 100)
    total = sum(v * v for v in x) / len(x)
    for start in range(0, len(x) - w + 1, w):
        p = sum(v * v for v in x[start:start + w]) / w
        if p > 0 and 10 * math.log10(p / total) >= 10:
            return start
    return None


def fake_onset(index, sr=SR):
    return OnsetAnalysis(10.0, sr // 100, index, index / sr, np.array([]), 1.0)


class TestDetectOnset:
    def test_silence_then_sine(self):
        rng = np.random.default_rng(0)
        silence = 1e-4 * rng.standard_normal(SR // 2)
        burst = np.sin(2 * np.pi * 440 * np.arange(int(0.05 * SR)) / SR)
        x = np.concatenate([silence, burst])
        onset = detect_onset(make_clip(x))
        assert 0.50 <= onset.onset_time <= 0.52
        assert onset.onset_index == scan_oracle(x.tolist(), SR)

    def test_constant_sine(self):
        x = np.sin(2 * np.pi * 440 * np.arange(SR) / SR)
        with pytest.raises(NoOnsetFound):
            detect_onset(make_clip(x))

    def test_all_zero(self):
        with pytest.raises(NoOnsetFound):
            detect_onset(make_clip(np.zeros(SR)))

    def test_too_short(self):
        with pytest.raises(ClipTooShort):
            detect_onset(make_clip(np.ones(int(0.015 * SR))))

    def test_partial_window_ignored(self):
        # the only loud samples sit in the trailing partial window
        x = np.zeros(SR // 100 * 30 + 200)
        x[-150:] = 1.0
        with pytest.raises(NoOnsetFound):
            detect_onset(make_clip(x))

    def test_onset_is_window_multiple(self):
        clip = programmed_onset_clip(0.3333, np.random.default_rng(2))
        onset = detect_onset(clip)
        assert onset.onset_index % onset.window_len == 0
        assert onset.window_len == 441
        above = 20 * np.log10(onset.window_rms / onset.signal_rms) >= 10
        first = onset.onset_index // onset.window_len
        assert above[first] and not above[:first].any()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6), st.floats(1e-3, 1e3))
    def test_scale_invariant(self, seed, c):
        rng = np.random.default_rng(seed)
        clip = programmed_onset_clip(rng.uniform(0.2, 1.0), rng, duration=1.5)
        scaled = make_clip(c * clip.samples)
        assert detect_onset(scaled).onset_index == detect_onset(clip).onset_index

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_agrees_with_oracle(self, seed):
        rng = np.random.default_rng(seed)
        sr = 8000
        x = 0.01 * rng.standard_normal(int(0.4 * sr))
        start = rng.integers(0, x.size - 400)
        x[start:start + rng.integers(40, 400)] += rng.uniform(0.5, 1.0)
        expected = scan_oracle(x.tolist(), sr)
        clip = make_clip(x, sr)
        if expected is None:
            with pytest.raises(NoOnsetFound):
                detect_onset(clip)
        else:
            assert detect_onset(clip).onset_index == expected

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_programmed_onset_window(self, seed):
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.2, 1.0)
        clip = programmed_onset_clip(t, rng, rise_ms=rng.uniform(25, 35))
        onset_time = detect_onset(clip).onset_time
        assert t <= onset_time <= t + 0.020


class TestSegments:
    def test_attack_length(self):
        clip = make_clip(np.zeros(SR))
        seg = extract_attack(clip, fake_onset(22050))
        assert seg.samples.size == 4410
        assert seg.instrument is clip.instrument and seg.tone == clip.tone

    def test_attack_whole_clip(self):
        x = np.arange(4410, dtype=float)
        seg = extract_attack(make_clip(x), fake_onset(0))
        np.testing.assert_array_equal(seg.samples, x)

    def test_attack_too_short(self):
        with pytest.raises(ClipTooShort):
            extract_attack(make_clip(np.zeros(SR)), fake_onset(SR - int(0.05 * SR)))

    def test_steady_bounds(self):
        x = np.arange(2 * SR, dtype=float)
        seg = extract_steady(make_clip(x), fake_onset(SR // 2))
        assert seg.samples[0] == int(0.8 * SR) and seg.samples[-1] == 2 * SR - 1

    def test_steady_minimum(self):
        n = int(0.4 * SR)
        seg = extract_steady(make_clip(np.zeros(n)), fake_onset(0))
        assert seg.samples.size == int(0.1 * SR)

    def test_steady_too_short(self):
        with pytest.raises(ClipTooShort):
            extract_steady(make_clip(np.zeros(int(0.35 * SR))), fake_onset(0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        clip = programmed_onset_clip(rng.uniform(0.2, 1.0), rng, duration=1.6)
        onset = detect_onset(clip)
        attack = extract_attack(clip, onset)
        steady = extract_steady(clip, onset)
        a0 = onset.onset_index
        a1 = a0 + attack.samples.size
        s0 = clip.samples.size - steady.samples.size
        glued = np.concatenate([clip.samples[:a0], attack.samples, clip.samples[a1:s0],
                                steady.samples])
        np.testing.assert_array_equal(glued, clip.samples)
