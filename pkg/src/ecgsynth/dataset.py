"""Loading, filtering, resampling, normalizing and splitting segmented beats.

Beats are plain 1-D float64 numpy arrays. A :class:`BeatSet` bundles an
``(n, length)`` matrix of beats with one class label per row and a
provenance tag.

The on-disk beat format is one beat per line, ``label,v1,...,vL``, plain
decimal text, no header. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import io
import math
import warnings
import zipfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import resample as _fourier_resample

from .errors import (
    ConstantBeat,
    DegenerateSplit,
    FileNotFound,
    InvalidTargetLength,
    LengthMismatch,
    MalformedRow,
    SampleTooLarge,
)
from .rng import Rng

CLASS_LABELS = ("N", "V", "F", "S", "Q", "L")
SOURCES = ("real", "generated", "augmented")
NORMALIZE_MODES = ("off", "per-beat", "global")


class ConstantBeatWarning(UserWarning):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BeatSet:
    """An immutable collection of equal-length beats.

    ``beats`` has shape ``(count, length)``; ``labels`` holds one class label
    per row.
    """

    beats: np.ndarray
    labels: np.ndarray
    source: str = "real"

    def __post_init__(self):
        beats = np.asarray(self.beats, dtype=np.float64)
        if beats.ndim == 1 and beats.size == 0:
            beats = beats.reshape(0, 0)
        if beats.ndim != 2:
            raise ValueError(f"beats must be 2-D (count, length), got shape {beats.shape}")
        labels = np.asarray(self.labels, dtype=object).reshape(-1)
        if labels.shape[0] != beats.shape[0]:
            raise ValueError(f"{labels.shape[0]} labels for {beats.shape[0]} beats")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "beats", _frozen(beats))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_beats(cls, beats, label: str, source: str = "real") -> "BeatSet":
        beats = np.asarray(beats, dtype=np.float64)
        if beats.ndim == 1:
            beats = beats.reshape(1, -1)
        return cls(beats, np.full(beats.shape[0], label, dtype=object), source)

    @classmethod
    def empty(cls, length: int, source: str = "generated") -> "BeatSet":
        return cls(np.empty((0, length)), np.empty(0, dtype=object), source)

    @property
    def count(self) -> int:
        return self.beats.shape[0]

    @property
    def length(self) -> int:
        return self.beats.shape[1]

    @property
    def class_label(self) -> str | None:
        """The single class label shared by every member, else ``None``."""
        uniq = set(self.labels.tolist())
        return uniq.pop() if len(uniq) == 1 else None

    def class_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(self.labels.tolist()).items()))

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, idx) -> np.ndarray:
        return self.beats[idx]

    def take(self, indices: Sequence[int]) -> "BeatSet":
        idx = np.asarray(indices, dtype=np.int64)
        return BeatSet(self.beats[idx], self.labels[idx], self.source)

    def with_source(self, source: str) -> "BeatSet":
        return BeatSet(self.beats, self.labels, source)


def concat(sets: Iterable[BeatSet], source: str | None = None) -> BeatSet:
    sets = list(sets)
    if not sets:
        raise ValueError("nothing to concatenate")
    lengths = {s.length for s in sets if s.count}
    if len(lengths) > 1:
        raise LengthMismatch(min(lengths), max(lengths))
    nonempty = [s for s in sets if s.count] or sets[:1]
    beats = np.concatenate([s.beats for s in nonempty], axis=0)
    labels = np.concatenate([s.labels for s in nonempty])
    if source is None:
        srcs = {s.source for s in sets}
        source = srcs.pop() if len(srcs) == 1 else "augmented"
    return BeatSet(beats, labels, source)


@dataclass
class DatasetManifest:
    path: str
    beat_length: int
    classes_present: dict[str, int] = field(default_factory=dict)
    seed: int = 0
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.classes_present.values())

    def to_text(self) -> str:
        lines = [
            f"path = {self.path}",
            f"beat_length = {self.beat_length}",
            f"total = {self.total}",
            f"seed = {self.seed}",
        ]
        for k, v in self.classes_present.items():
            lines.append(f"class.{k} = {v}")
        for k, v in self.extra.items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
        classes = {k[6:]: int(v) for k, v in kv.items() if k.startswith("class.")}
        extra = {
            k: v
            for k, v in kv.items()
            if not k.startswith("class.") and k not in ("path", "beat_length", "total", "seed")
        }
        return cls(kv["path"], int(kv["beat_length"]), classes, int(kv.get("seed", 0)), extra)


# -- file I/O ---------------------------------------------------------------


def _parse_row(line: str, row: int, expected_length: int | None):
    parts = line.strip().split(",")
    label = parts[0].strip()
    if not label:
        raise MalformedRow(row, "empty class label")
    try:
        values = np.array([float(p) for p in parts[1:]], dtype=np.float64)
    except ValueError as exc:
        raise MalformedRow(row, f"unparsable sample ({exc})") from None
    if values.size == 0:
        raise MalformedRow(row, "no samples")
    if not np.all(np.isfinite(values)):
        raise MalformedRow(row, "non-finite sample")
    if expected_length is not None and values.size != expected_length:
        raise LengthMismatch(expected_length, values.size)
    return label, values


def load_beats(path, expected_length: int | None = None, source: str = "real") -> BeatSet:
    """Read a beat CSV file.

    If ``expected_length`` is None, the first row fixes the length and every
    other row must match it.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFound(f"no such beat file: {p}")
    labels, rows = [], []
    with p.open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            label, values = _parse_row(line, i, expected_length)
            if expected_length is None:
                expected_length = values.size
            labels.append(label)
            rows.append(values)
    if not rows:
        return BeatSet(np.empty((0, expected_length or 0)), np.empty(0, dtype=object), source)
    return BeatSet(np.vstack(rows), np.array(labels, dtype=object), source)


def save_beats(beat_set: BeatSet, path, label: str | None = None, header: str | None = None) -> None:
    """Write beats in the one-line-per-beat CSV format.

    ``label`` overrides every row's label (e.g. ``G`` for generated beats).
    ``repr`` of a float round-trips exactly, so save/load is lossless.
    """
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for lab, beat in zip(beat_set.labels, beat_set.beats):
            lab = label if label is not None else lab
            fh.write(lab + "," + ",".join(repr(float(v)) for v in beat) + "\n")


def load_beat_dir(path, source: str = "generated") -> BeatSet:
    """Concatenate every ``*.csv`` beat file in a directory, in name order."""
    p = Path(path)
    if p.is_file():
        return load_beats(p, source=source)
    if not p.is_dir():
        raise FileNotFound(f"no such beat file or directory: {p}")
    files = sorted(p.glob("*.csv"))
    if not files:
        raise FileNotFound(f"no beat CSV files in {p}")
    return concat([load_beats(f, source=source) for f in files], source=source)


# -- per-beat transforms ------------------------------------------------------


def filter_class(beat_set: BeatSet, label: str) -> BeatSet:
    mask = beat_set.labels == label
    return BeatSet(beat_set.beats[mask], beat_set.labels[mask], beat_set.source)


def resample_beat(beat, target_length: int) -> np.ndarray:
    """Fourier-domain resampling to ``target_length`` samples.

    The spectrum is truncated or zero-padded symmetrically and amplitudes are
    rescaled by ``target_length / len(beat)``. A constant beat is returned as
    the same constant, exactly.
    """
    if int(target_length) != target_length or target_length < 2:
        raise InvalidTargetLength(f"target length must be an integer >= 2, got {target_length}")
    x = np.asarray(beat, dtype=np.float64)
    if x.size == target_length:
        return x.copy()
    if np.all(x == x[0]):
        return np.full(int(target_length), x[0])
    return np.asarray(_fourier_resample(x, int(target_length)), dtype=np.float64)


def resample_set(beat_set: BeatSet, target_length: int) -> BeatSet:
    if beat_set.count == 0:
        return BeatSet(np.empty((0, target_length)), beat_set.labels, beat_set.source)
    beats = np.vstack([resample_beat(b, target_length) for b in beat_set.beats])
    return BeatSet(beats, beat_set.labels, beat_set.source)


def normalize_beat(beat, on_constant: str = "zeros") -> np.ndarray:
    """Affine min-max map of one beat onto [-1, 1].

    A constant beat has no range to map; by default it becomes all zeros and
    a :class:`ConstantBeatWarning` is issued. ``on_constant="raise"`` raises
    :class:`~ecgsynth.errors.ConstantBeat` instead.
    """
    x = np.asarray(beat, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        if on_constant == "raise":
            raise ConstantBeat("beat is constant; min-max normalization is undefined")
        warnings.warn("constant beat mapped to zeros", ConstantBeatWarning, stacklevel=2)
        return np.zeros_like(x)
    if lo == -1.0 and hi == 1.0:
        return x.copy()
    out = 2.0 * (x - lo) / (hi - lo) - 1.0
    # pin the extremes against rounding
    out[x == lo] = -1.0
    out[x == hi] = 1.0
    return np.clip(out, -1.0, 1.0)


def normalize_set(beat_set: BeatSet, mode: str = "per-beat") -> BeatSet:
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"normalize mode must be one of {NORMALIZE_MODES}, got {mode!r}")
    if mode == "off" or beat_set.count == 0:
        return beat_set
    if mode == "per-beat":
        beats = np.vstack([normalize_beat(b) for b in beat_set.beats])
    else:
        lo, hi = beat_set.beats.min(), beat_set.beats.max()
        if hi == lo:
            warnings.warn("constant beat set mapped to zeros", ConstantBeatWarning, stacklevel=2)
            beats = np.zeros_like(beat_set.beats)
        else:
            beats = np.clip(2.0 * (beat_set.beats - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return BeatSet(beats, beat_set.labels, beat_set.source)


# -- randomized subsets -------------------------------------------------------


def sample_subset(beat_set: BeatSet, n: int, seed: int) -> BeatSet:
    """Uniform sample of ``n`` beats without replacement, in draw order."""
    if not 1 <= n <= beat_set.count:
        raise SampleTooLarge(f"cannot sample {n} beats from a set of {beat_set.count}")
    idx = Rng(seed).choice(beat_set.count, n)
    return beat_set.take(idx)


def split_indices(count: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if count < 2:
        raise DegenerateSplit(f"need at least 2 beats to split, got {count}")
    if not 0.0 < test_fraction < 1.0:
        raise DegenerateSplit(f"test fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(math.floor(test_fraction * count + 0.5))
    if n_test == 0 or n_test == count:
        raise DegenerateSplit(f"split of {count} at {test_fraction} leaves one side empty")
    perm = Rng(seed).permutation(count)
    return perm[n_test:], perm[:n_test]


def split(beat_set: BeatSet, test_fraction: float, seed: int) -> tuple[BeatSet, BeatSet]:
    """Disjoint train/test split; the test side gets round(fraction * count) beats."""
    train_idx, test_idx = split_indices(beat_set.count, test_fraction, seed)
    return beat_set.take(train_idx), beat_set.take(test_idx)


# -- binary cache ---------------------------------------------------------------

CACHE_FILE = "beats.npz"
MANIFEST_FILE = "manifest.txt"


def write_cache(beat_set: BeatSet, out_dir, manifest: DatasetManifest) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = np.array([str(x) for x in beat_set.labels], dtype="U8")
    # an npz archive written with fixed entry timestamps, so identical data
    # gives identical bytes
    with zipfile.ZipFile(out / CACHE_FILE, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in (("beats", np.asarray(beat_set.beats)), ("labels", labels)):
            buf = io.BytesIO()
            np.save(buf, arr, allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())
    (out / MANIFEST_FILE).write_text(manifest.to_text(), encoding="utf-8")
    return out / CACHE_FILE


def read_cache(path) -> BeatSet:
    """Load an ingested cache from its directory or the ``.npz`` file itself."""
    p = Path(path)
    if p.is_dir():
        p = p / CACHE_FILE
    if not p.is_file():
        raise FileNotFound(f"no beat cache at {p}")
    with np.load(p, allow_pickle=False) as data:
        beats = data["beats"]
        labels = data["labels"].astype(object)
    return BeatSet(beats, labels, "real")
