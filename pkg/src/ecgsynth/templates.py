"""Per-class template beats: statistical averaging or a seeded random pick."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import BeatSet, load_beats, save_beats
from .errors import EmptySet, LengthMismatch
from .rng import Rng

TEMPLATE_LABEL = "T"


@dataclass(frozen=True)
class Template:
    beat: np.ndarray
    origin: str  # "sab", "random" or "file"
    seed: int | None = None
    index: int | None = None
    path: str | None = None

    def __post_init__(self):
        b = np.array(self.beat, dtype=np.float64)
        if b.ndim != 1 or b.size < 2 or not np.all(np.isfinite(b)):
            raise ValueError("template beat must be a finite 1-D series of length >= 2")
        b.flags.writeable = False
        object.__setattr__(self, "beat", b)

    def describe(self) -> str:
        if self.origin == "random":
            return f"random(seed={self.seed}, index={self.index})"
        if self.origin == "file":
            return f"file({self.path})"
        return self.origin


def sab_template(beat_set: BeatSet) -> Template:
    """Statistically averaged beat: the per-timestep mean over the set."""
    if beat_set.count == 0:
        raise EmptySet("cannot average an empty beat set")
    return Template(beat_set.beats.mean(axis=0), "sab")


def random_template(beat_set: BeatSet, seed: int) -> Template:
    """One member beat drawn uniformly; the index is kept for reproducibility."""
    if beat_set.count == 0:
        raise EmptySet("cannot draw a template from an empty beat set")
    index = int(Rng(seed).integers(beat_set.count))
    return Template(beat_set.beats[index].copy(), "random", seed=seed, index=index)


def save_template(template: Template, path) -> None:
    save_beats(BeatSet.from_beats(template.beat, TEMPLATE_LABEL), path, header=template.describe())


def load_template(path, expected_length: int | None = None) -> Template:
    beats = load_beats(path)
    if beats.count != 1:
        raise ValueError(f"template file must hold exactly one beat, found {beats.count}")
    if expected_length is not None and beats.length != expected_length:
        raise LengthMismatch(expected_length, beats.length)
    return Template(beats.beats[0], "file", path=str(Path(path)))
