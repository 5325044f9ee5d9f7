"""Quantitative scoring of generated beats.

Four scores are computed for a distance kind DF:

* s1, the mean DF over every (real, generated) pair of two beat sets;
* s2, the mean DF from each generated beat to a template;
* s3, the smallest DF to the template, plus the beat achieving it;
* s4, the productivity rate: the percentage of generated beats whose
  DF to the template is at most a threshold (the "acceptable" beats).

The default threshold is the midpoint of s3 and s2.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import BeatSet
from .errors import EmptySet, EpochMismatch, InvalidInputs, LengthMismatch
from .metrics import (
    ALL_KINDS,
    DEFAULT_DTW,
    DistanceKind,
    DtwOptions,
    cross_mean_distance,
    distances_to,
)
from .templates import Template

DERIVATIONS = ("mean-of-min-and-avg", "scaled-min", "manual")


@dataclass(frozen=True)
class Threshold:
    value: float
    kind: DistanceKind
    derivation: str = "mean-of-min-and-avg"
    factor: float | None = None

    def __post_init__(self):
        if not self.value >= 0:
            raise InvalidInputs(f"threshold must be >= 0, got {self.value}")
        if self.derivation not in DERIVATIONS:
            raise InvalidInputs(f"unknown threshold derivation {self.derivation!r}")


@dataclass
class EvaluationReport:
    kind: DistanceKind
    method: int
    score: float
    n_real: int = 0
    n_gen: int = 0
    template_origin: str | None = None
    threshold: Threshold | None = None
    acceptable_count: int | None = None
    seed: int | None = None
    best_index: int | None = None
    s2: float | None = None
    s3: float | None = None
    acceptable_indices: list[int] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method == 4 and (self.threshold is None or self.acceptable_count is None):
            raise InvalidInputs("method-4 reports need a threshold and an acceptable count")
        if self.acceptable_count is not None and self.acceptable_count > self.n_gen:
            raise InvalidInputs("acceptable count exceeds the generated count")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "method": self.method,
            "score": self.score,
            "n_real": self.n_real,
            "n_gen": self.n_gen,
            "template_origin": self.template_origin,
            "seed": self.seed,
        }
        if self.threshold is not None:
            d["threshold_value"] = self.threshold.value
            d["threshold_derivation"] = self.threshold.derivation
            d["threshold_factor"] = self.threshold.factor
        for key in ("acceptable_count", "best_index", "s2", "s3", "acceptable_indices"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvaluationReport":
        d = dict(d)
        kind = DistanceKind.parse(d.pop("kind"))
        threshold = None
        if "threshold_value" in d:
            threshold = Threshold(
                d.pop("threshold_value"),
                kind,
                d.pop("threshold_derivation", "manual"),
                d.pop("threshold_factor", None),
            )
        known = {f for f in cls.__dataclass_fields__} - {"kind", "threshold", "extra"}
        kwargs = {k: d.pop(k) for k in list(d) if k in known}
        return cls(kind=kind, threshold=threshold, extra=d, **kwargs)

    def to_text(self) -> str:
        rows = [(k, v) for k, v in self.to_dict().items() if k != "acceptable_indices"]
        width = max(len(k) for k, _ in rows)
        return "".join(f"{k.ljust(width)}  {_fmt(v)}\n" for k, v in rows)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "-" if v is None else str(v)


def _beats(s) -> np.ndarray:
    return np.asarray(getattr(s, "beats", s), dtype=np.float64)


def _template_distances(gen, template: Template, kind, dtw_opts) -> np.ndarray:
    beats = _beats(gen)
    if beats.ndim != 2 or beats.shape[0] == 0:
        raise EmptySet("no generated beats to score")
    if beats.shape[1] != template.beat.shape[0]:
        raise LengthMismatch(template.beat.shape[0], beats.shape[1])
    return distances_to(beats, template.beat, kind, dtw_opts)


def _mean(values: np.ndarray) -> float:
    # Correctly rounded sum; the clamp guards the min <= mean <= max ordering
    # against the final division's rounding.
    m = math.fsum(values.tolist()) / len(values)
    return float(min(max(m, values.min()), values.max()))


def method1_score(
    real_subset,
    gen_subset,
    kind,
    seed: int | None = None,
    dtw_opts: DtwOptions = DEFAULT_DTW,
    workers: int | None = None,
) -> EvaluationReport:
    """s1: mean distance over all real x generated pairs."""
    kind = DistanceKind.parse(kind)
    real, gen = _beats(real_subset), _beats(gen_subset)
    if real.size == 0 or gen.size == 0:
        raise EmptySet("method 1 needs non-empty real and generated sets")
    score = cross_mean_distance(real, gen, kind, dtw_opts, workers=workers)
    return EvaluationReport(kind, 1, score, n_real=real.shape[0], n_gen=gen.shape[0], seed=seed)


def method2_score(gen, template: Template, kind, dtw_opts: DtwOptions = DEFAULT_DTW) -> EvaluationReport:
    """s2: mean distance from the generated beats to the template."""
    kind = DistanceKind.parse(kind)
    d = _template_distances(gen, template, kind, dtw_opts)
    s2 = _mean(d)
    return EvaluationReport(
        kind, 2, s2, n_gen=d.size, template_origin=template.describe(), seed=template.seed, s2=s2
    )


def method3_best(gen, template: Template, kind, dtw_opts: DtwOptions = DEFAULT_DTW):
    """s3: the generated beat closest to the template (lowest index wins ties)."""
    kind = DistanceKind.parse(kind)
    d = _template_distances(gen, template, kind, dtw_opts)
    best = int(np.argmin(d))
    report = EvaluationReport(
        kind,
        3,
        float(d[best]),
        n_gen=d.size,
        template_origin=template.describe(),
        seed=template.seed,
        best_index=best,
        s3=float(d[best]),
    )
    return _beats(gen)[best].copy(), report


def compute_threshold(
    s2: float, s3: float, kind, derivation: str = "mean-of-min-and-avg", factor: float | None = None
) -> Threshold:
    """Acceptability threshold from the average (s2) and minimum (s3) distance.

    The default is ``(s3 + s2) / 2``; ``derivation="scaled-min"`` gives
    ``factor * s3`` and requires an explicit factor.
    """
    kind = DistanceKind.parse(kind)
    if not (s2 >= 0 and s3 >= 0):
        raise InvalidInputs(f"distances must be non-negative (s2={s2}, s3={s3})")
    if s3 > s2:
        raise InvalidInputs(f"minimum distance {s3} exceeds the average {s2}")
    if derivation == "mean-of-min-and-avg":
        return Threshold((s3 + s2) / 2.0, kind, derivation)
    if derivation == "scaled-min":
        if factor is None:
            raise InvalidInputs("scaled-min threshold needs an explicit factor")
        return Threshold(factor * s3, kind, derivation, factor)
    raise InvalidInputs(f"cannot derive a threshold by {derivation!r}")


def productivity(distances, threshold: float) -> tuple[float, np.ndarray]:
    """Percentage of distances ``<= threshold`` and the accepted indices."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise EmptySet("no distances")
    accepted = np.flatnonzero(d <= threshold)
    return 100.0 * accepted.size / d.size, accepted


def method4_productivity(
    gen,
    template: Template,
    kind,
    threshold: Threshold,
    dtw_opts: DtwOptions = DEFAULT_DTW,
    keep_indices: bool = True,
) -> EvaluationReport:
    """s4: productivity rate (percent) of acceptable beats under ``threshold``."""
    kind = DistanceKind.parse(kind)
    d = _template_distances(gen, template, kind, dtw_opts)
    score, accepted = productivity(d, threshold.value)
    return EvaluationReport(
        kind,
        4,
        score,
        n_gen=d.size,
        template_origin=template.describe(),
        threshold=threshold,
        acceptable_count=int(accepted.size),
        seed=template.seed,
        acceptable_indices=accepted.tolist() if keep_indices else None,
    )


def evaluate_productivity(
    gen,
    template: Template,
    kind,
    calibration: EvaluationReport | None = None,
    dtw_opts: DtwOptions = DEFAULT_DTW,
) -> EvaluationReport:
    """Method 4 with the default threshold.

    s2 and s3 come from ``gen`` itself unless a ``calibration`` report (any
    report carrying ``s2`` and ``s3``) is supplied.
    """
    kind = DistanceKind.parse(kind)
    if calibration is not None:
        if calibration.s2 is None or calibration.s3 is None:
            raise InvalidInputs("calibration report must carry s2 and s3")
        s2, s3 = calibration.s2, calibration.s3
    else:
        d = _template_distances(gen, template, kind, dtw_opts)
        s2, s3 = _mean(d), float(d.min())
    eta = compute_threshold(s2, s3, kind)
    report = method4_productivity(gen, template, kind, eta, dtw_opts)
    report.s2, report.s3 = s2, s3
    return report


# -- per-epoch curves ---------------------------------------------------------------

CURVE_COLUMNS = ("epoch", "s2_dtw", "s2_frechet", "s2_euclid", "generator_loss", "discriminator_loss")


@dataclass
class EpochCurve:
    rows: list[tuple]

    def __post_init__(self):
        epochs = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise EpochMismatch("epochs must be strictly increasing")

    @property
    def epochs(self) -> list[int]:
        return [r[0] for r in self.rows]

    def column(self, name: str) -> list[float]:
        i = CURVE_COLUMNS.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self, path=None, header: str | None = None) -> str:
        """CSV text (written to ``path`` if given); ``header`` becomes ``#`` lines."""
        buf = io.StringIO()
        if header:
            buf.writelines(f"# {line}\n" for line in header.splitlines())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for r in self.rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "EpochCurve":
        with open(path, encoding="utf-8") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            rows = [
                (int(r["epoch"]),) + tuple(float(r[c]) for c in CURVE_COLUMNS[1:]) for r in reader
            ]
        return cls(rows)


def epoch_curves(
    snapshots: Mapping[int, BeatSet] | Sequence[tuple[int, BeatSet]],
    template: Template,
    losses: Mapping[int, tuple[float, float]] | Sequence[tuple[int, float, float]],
    dtw_opts: DtwOptions = DEFAULT_DTW,
) -> EpochCurve:
    """s2 under every distance kind for each epoch's snapshot, joined with losses."""
    snaps = dict(snapshots.items() if isinstance(snapshots, Mapping) else snapshots)
    if isinstance(losses, Mapping):
        loss_map = {int(e): tuple(v) for e, v in losses.items()}
    else:
        loss_map = {int(e): (g, d) for e, g, d in losses}
    if set(snaps) != set(loss_map):
        missing = sorted(set(snaps) ^ set(loss_map))
        raise EpochMismatch(f"snapshot and loss epochs differ at {missing}")
    rows = []
    for epoch in sorted(snaps):
        s2 = [method2_score(snaps[epoch], template, k, dtw_opts).score for k in ALL_KINDS]
        rows.append((epoch, *s2, *loss_map[epoch]))
    return EpochCurve(rows)


__all__ = [
    "EpochCurve",
    "EvaluationReport",
    "Threshold",
    "compute_threshold",
    "epoch_curves",
    "evaluate_productivity",
    "method1_score",
    "method2_score",
    "method3_best",
    "method4_productivity",
    "productivity",
]
