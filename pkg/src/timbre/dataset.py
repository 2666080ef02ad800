"""Labels, audio clips, manifest ingestion and stratified splitting."""
from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ClassTooSmall, ParseError, UnknownLabel, UnsupportedFormat, WrongOctave

MANIFEST_HEADER = ("path", "instrument", "pitch_class", "octave")
MIN_SAMPLE_RATE = 8000


class InstrumentClass(enum.IntEnum):
    """The eight instruments, indexed in the fixed corpus order."""

    Banjo = 1
    Cello = 2
    Clarinet = 3
    EnglishHorn = 4
    Guitar = 5
    Oboe = 6
    Trumpet = 7
    Violin = 8

    @classmethod
    def parse(cls, name: str) -> "InstrumentClass":
        key = name.strip().replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise UnknownLabel(f"unknown instrument {name!r}")


#: Clip counts per instrument in the original recordings.
CORPUS_COUNTS = {
    InstrumentClass.Banjo: 23,
    InstrumentClass.Cello: 166,
    InstrumentClass.Clarinet: 131,
    InstrumentClass.EnglishHorn: 234,
    InstrumentClass.Guitar: 29,
    InstrumentClass.Oboe: 155,
    InstrumentClass.Trumpet: 140,
    InstrumentClass.Violin: 366,
}

PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

#: Equal-tempered fundamentals of the fourth octave (Hz), as tabulated.
OCTAVE4_HZ = dict(zip(PITCH_CLASSES, (
    261.63, 277.18, 293.66, 311.13, 329.63, 349.23,
    369.99, 392.00, 415.30, 440.00, 466.16, 493.88,
)))

_FLAT_ALIASES = {"DB": "C#", "EB": "D#", "GB": "F#", "AB": "G#", "BB": "A#"}


@dataclass(frozen=True)
class ToneLabel:
    pitch_class: str
    octave: int = 4

    def __post_init__(self):
        if self.pitch_class not in OCTAVE4_HZ:
            raise UnknownLabel(f"unknown pitch class {self.pitch_class!r}")
        if self.octave != 4:
            raise WrongOctave(f"octave {self.octave} not supported, only 4")

    @classmethod
    def parse(cls, pitch_class: str, octave=4) -> "ToneLabel":
        pc = pitch_class.strip()
        pc = pc[:1].upper() + pc[1:].replace("s", "#").replace("♯", "#")
        pc = _FLAT_ALIASES.get(pc.upper(), pc)
        if pc not in OCTAVE4_HZ:
            raise UnknownLabel(f"unknown pitch class {pitch_class!r}")
        return cls(pc, int(octave))

    @property
    def base_frequency(self) -> float:
        return OCTAVE4_HZ[self.pitch_class]

    @property
    def name(self) -> str:
        return f"{self.pitch_class}{self.octave}"


@dataclass
class AudioClip:
    """A labelled mono signal."""

    samples: np.ndarray
    sample_rate: int
    instrument: InstrumentClass
    tone: ToneLabel
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if self.sample_rate < MIN_SAMPLE_RATE:
            raise ValueError(f"sample rate {self.sample_rate} below {MIN_SAMPLE_RATE}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def segment(self, start: int, end: int) -> "AudioClip":
        """Sub-clip ``samples[start:end]`` carrying the same labels."""
        return replace(self, samples=self.samples[start:end])


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    instrument: InstrumentClass
    tone: ToneLabel

    @property
    def source_id(self) -> str:
        return self.path


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in self.entries:
            w.writerow((e.path, e.instrument.name, e.tone.pitch_class, e.tone.octave))
        return buf.getvalue()


def parse_manifest(text: str, root=".") -> DatasetManifest:
    """Parse manifest CSV text. Rows are validated against the fixed label sets."""
    lines = text.splitlines()
    manifest = DatasetManifest([], Path(root))
    if not any(line.strip() for line in lines):
        return manifest
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if tuple(header) != MANIFEST_HEADER:
        raise ParseError(f"expected header {','.join(MANIFEST_HEADER)!r}", line=1)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
        path, instrument, pitch, octave = (c.strip() for c in row)
        try:
            octave = int(octave)
        except ValueError:
            raise ParseError(f"octave {octave!r} is not an integer", line=lineno) from None
        if not path:
            raise ParseError("empty path", line=lineno)
        if octave != 4:
            raise WrongOctave(f"line {lineno}: octave {octave}, only 4 is supported")
        manifest.entries.append(
            ManifestEntry(path, InstrumentClass.parse(instrument), ToneLabel.parse(pitch, octave))
        )
    return manifest


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_manifest(text, root=path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(manifest.to_csv(), encoding="utf-8")


def read_wav(path):
    """Read a PCM16 or float32 WAV file as mono floats in [-1, 1].

    Returns:
        (samples, sample_rate)
    """
    try:
        rate, data = wavfile.read(os.fspath(path))
    except ValueError as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(float)
    else:
        raise UnsupportedFormat(f"{path}: sample type {data.dtype} not supported")
    if data.ndim == 2:
        if data.shape[1] > 2:
            raise UnsupportedFormat(f"{path}: {data.shape[1]} channels, at most 2 supported")
        data = data.mean(axis=1)
    if rate < MIN_SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: sample rate {rate} below {MIN_SAMPLE_RATE}")
    if data.size == 0:
        raise UnsupportedFormat(f"{path}: no samples")
    return data, int(rate)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write ``samples`` as 16-bit PCM, clipping to full scale."""
    x = np.clip(np.asarray(samples, dtype=float), -1.0, 32767 / 32768)
    wavfile.write(os.fspath(path), sample_rate, np.round(x * 32768).astype(np.int16))


def load_clip(entry: ManifestEntry, manifest: DatasetManifest | None = None) -> AudioClip:
    path = manifest.resolve(entry) if manifest is not None else Path(entry.path)
    samples, rate = read_wav(path)
    return AudioClip(samples, rate, entry.instrument, entry.tone, entry.source_id)


@dataclass(frozen=True)
class SplitAssignment:
    train_ids: frozenset
    validation_ids: frozenset
    test_ids: frozenset


def split_sizes(n: int, ratios=(0.6, 0.2, 0.2)) -> tuple:
    """Largest-remainder rounding of ``n`` items into three parts.

    Remainder ties go to train, then validation, then test. Each part gets at
    least one item when ``n >= 3``.
    """
    exact = [n * r / sum(ratios) for r in ratios]
    sizes = [int(np.floor(e)) for e in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    for i in range(3):
        if sizes[i] == 0 and n >= 3:
            donor = max(range(3), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] += 1
    return tuple(sizes)


def stratified_split(ids_by_class, ratios=(0.6, 0.2, 0.2), seed=0) -> SplitAssignment:
    """Shuffle each class independently and cut it 60/20/20.

    Args:
        ids_by_class: mapping of class -> iterable of unique source ids.
        ratios: train/validation/test proportions.
        seed: RNG seed; the result is a pure function of inputs and seed.
    """
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for cls in sorted(ids_by_class):
        ids = sorted(ids_by_class[cls])
        if len(ids) < 3:
            raise ClassTooSmall(f"class {cls!r} has {len(ids)} items, need at least 3")
        ids = [ids[i] for i in rng.permutation(len(ids))]
        n_tr, n_va, _ = split_sizes(len(ids), ratios)
        train += ids[:n_tr]
        val += ids[n_tr:n_tr + n_va]
        test += ids[n_tr + n_va:]
    return SplitAssignment(frozenset(train), frozenset(val), frozenset(test))


def group_by_class(items, key=lambda item: item.instrument, ident=lambda item: item.source_id):
    groups = {}
    for item in items:
        groups.setdefault(key(item), []).append(ident(item))
    return groups
