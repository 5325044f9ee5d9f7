"""Distance functions between beats and the cross-set comparison kernel.

Three distances are provided: dynamic time warping, the discrete Frechet
distance and the plain Euclidean distance. Scalar kernels are compiled with
numba (``nogil``) so :func:`cross_mean_distance` can fan out over threads.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BandTooNarrow, EmptySet, LengthMismatch, LengthZero


class DistanceKind(str, enum.Enum):
    DTW = "dtw"
    FRECHET = "frechet"
    EUCLIDEAN = "euclid"

    @classmethod
    def parse(cls, value) -> "DistanceKind":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        aliases = {"euclidean": "euclid", "fréchet": "frechet", "fre": "frechet", "euc": "euclid"}
        return cls(aliases.get(v, v))


ALL_KINDS = (DistanceKind.DTW, DistanceKind.FRECHET, DistanceKind.EUCLIDEAN)

_ABS, _SQUARED = 0, 1
_KIND_CODE = {DistanceKind.DTW: 0, DistanceKind.FRECHET: 1, DistanceKind.EUCLIDEAN: 2}


@dataclass(frozen=True)
class DtwOptions:
    """``local_cost`` is ``"absolute"`` or ``"squared"``; ``band_radius`` of
    None means an unconstrained warping window."""

    local_cost: str = "absolute"
    band_radius: int | None = None

    def __post_init__(self):
        if self.local_cost not in ("absolute", "squared"):
            raise ValueError(f"local_cost must be 'absolute' or 'squared', got {self.local_cost!r}")
        if self.band_radius is not None and self.band_radius < 0:
            raise ValueError("band_radius must be >= 0")

    @property
    def _cost_code(self) -> int:
        return _ABS if self.local_cost == "absolute" else _SQUARED

    @property
    def _band(self) -> int:
        return -1 if self.band_radius is None else int(self.band_radius)


DEFAULT_DTW = DtwOptions()


# -- compiled kernels -------------------------------------------------------------


@njit(cache=True, nogil=True)
def _euclidean(x, y):
    s = 0.0
    for i in range(x.shape[0]):
        d = x[i] - y[i]
        s += d * d
    return math.sqrt(s)


@njit(cache=True, nogil=True)
def _local(a, b, cost):
    d = a - b
    return abs(d) if cost == 0 else d * d


@njit(cache=True, nogil=True)
def _dtw(x, y, cost, band):
    # Two rolling rows over the shorter series. The longer series always
    # indexes rows, so argument order never changes the arithmetic.
    if y.shape[0] > x.shape[0]:
        x, y = y, x
    m = x.shape[0]
    n = y.shape[0]
    prev = np.empty(n)
    cur = np.empty(n)
    hi = n - 1 if band < 0 else min(n - 1, band)
    cur[0] = _local(x[0], y[0], cost)
    for j in range(1, hi + 1):
        cur[j] = _local(x[0], y[j], cost) + cur[j - 1]
    if hi + 1 < n:
        cur[hi + 1] = np.inf
    for i in range(1, m):
        prev, cur = cur, prev
        if band < 0:
            lo = 0
            hi = n - 1
        else:
            lo = max(0, i - band)
            hi = min(n - 1, i + band)
        xi = x[i]
        if lo == 0:
            cur[0] = _local(xi, y[0], cost) + prev[0]
            start = 1
        else:
            cur[lo - 1] = np.inf
            start = lo
        left = cur[start - 1]
        for j in range(start, hi + 1):
            best = prev[j - 1]
            up = prev[j]
            if up < best:
                best = up
            if left < best:
                best = left
            left = _local(xi, y[j], cost) + best
            cur[j] = left
        if hi + 1 < n:
            cur[hi + 1] = np.inf
    return cur[n - 1]


@njit(cache=True, nogil=True)
def _frechet(x, y):
    if y.shape[0] > x.shape[0]:
        x, y = y, x
    m = x.shape[0]
    n = y.shape[0]
    prev = np.empty(n)
    cur = np.empty(n)
    cur[0] = abs(x[0] - y[0])
    for j in range(1, n):
        d = abs(x[0] - y[j])
        cur[j] = d if d > cur[j - 1] else cur[j - 1]
    for i in range(1, m):
        prev, cur = cur, prev
        xi = x[i]
        d = abs(xi - y[0])
        left = d if d > prev[0] else prev[0]
        cur[0] = left
        for j in range(1, n):
            reach = prev[j - 1]
            up = prev[j]
            if up < reach:
                reach = up
            if left < reach:
                reach = left
            d = abs(xi - y[j])
            left = d if d > reach else reach
            cur[j] = left
    return cur[n - 1]


@njit(cache=True, nogil=True)
def _pair(kind, x, y, cost, band):
    if kind == 0:
        return _dtw(x, y, cost, band)
    elif kind == 1:
        return _frechet(x, y)
    return _euclidean(x, y)


@njit(cache=True, nogil=True)
def _block(a, b, kind, cost, band, out):
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _pair(kind, a[i], b[j], cost, band)


@njit(cache=True, nogil=True)
def _to_template(a, t, kind, cost, band, out):
    for i in range(a.shape[0]):
        out[i] = _pair(kind, a[i], t, cost, band)


@njit(cache=True)
def _kahan_fold(values, state):
    # state = [sum, compensation]; values are folded in row-major order.
    s = state[0]
    c = state[1]
    flat = values.ravel()
    for k in range(flat.shape[0]):
        yk = flat[k] - c
        t = s + yk
        c = (t - s) - yk
        s = t
    state[0] = s
    state[1] = c


# -- public API -------------------------------------------------------------------


def _as_series(x) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {a.shape}")
    return a


def euclidean(x, y) -> float:
    """sqrt(sum((x_i - y_i)^2)) for equal-length series."""
    x, y = _as_series(x), _as_series(y)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(x.shape[0], y.shape[0])
    return float(_euclidean(x, y))


def _check_band(m: int, n: int, opts: DtwOptions):
    if opts.band_radius is not None and abs(m - n) > opts.band_radius:
        raise BandTooNarrow(
            f"band radius {opts.band_radius} cannot connect lengths {m} and {n}"
        )


def dtw(x, y, opts: DtwOptions = DEFAULT_DTW) -> float:
    """Accumulated DTW cost D[M, N].

    Recurrence ``D[i,j] = f(x_i, y_j) + min(D[i-1,j], D[i,j-1], D[i-1,j-1])``
    with ``D[1,1] = f(x_1, y_1)`` and the first row/column accumulated along
    their single admissible predecessor. Memory is O(min(M, N)).
    """
    x, y = _as_series(x), _as_series(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise LengthZero("DTW needs non-empty series")
    _check_band(x.shape[0], y.shape[0], opts)
    return float(_dtw(x, y, opts._cost_code, opts._band))


def frechet(x, y) -> float:
    """Discrete Frechet distance with absolute difference as the link length."""
    x, y = _as_series(x), _as_series(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise LengthZero("Frechet distance needs non-empty series")
    return float(_frechet(x, y))


def distance(x, y, kind, dtw_opts: DtwOptions = DEFAULT_DTW) -> float:
    kind = DistanceKind.parse(kind)
    if kind is DistanceKind.DTW:
        return dtw(x, y, dtw_opts)
    if kind is DistanceKind.FRECHET:
        return frechet(x, y)
    return euclidean(x, y)


def _as_matrix(a) -> np.ndarray:
    m = getattr(a, "beats", a)
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    return m


def _validate_pair_inputs(a: np.ndarray, b: np.ndarray, kind: DistanceKind, opts: DtwOptions):
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySet("cross comparison needs two non-empty sets")
    if kind is DistanceKind.EUCLIDEAN and a.shape[1] != b.shape[1]:
        raise LengthMismatch(a.shape[1], b.shape[1])
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise LengthZero("beats must have at least one sample")
    if kind is DistanceKind.DTW:
        _check_band(a.shape[1], b.shape[1], opts)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def distances_to(beats, template, kind, dtw_opts: DtwOptions = DEFAULT_DTW) -> np.ndarray:
    """Distance from every row of ``beats`` to one ``template`` beat."""
    kind = DistanceKind.parse(kind)
    a = _as_matrix(beats)
    t = _as_series(template)
    if a.shape[0] == 0:
        return np.empty(0)
    _validate_pair_inputs(a, t.reshape(1, -1), kind, dtw_opts)
    out = np.empty(a.shape[0])
    _to_template(a, t, _KIND_CODE[kind], dtw_opts._cost_code, dtw_opts._band, out)
    return out


def pairwise_distances(
    a, b, kind, dtw_opts: DtwOptions = DEFAULT_DTW, workers: int | None = None, chunk_rows: int = 16
) -> np.ndarray:
    """Full ``|A| x |B|`` distance matrix, rows computed in parallel chunks."""
    kind = DistanceKind.parse(kind)
    a, b = _as_matrix(a), _as_matrix(b)
    _validate_pair_inputs(a, b, kind, dtw_opts)
    out = np.empty((a.shape[0], b.shape[0]))
    args = (_KIND_CODE[kind], dtw_opts._cost_code, dtw_opts._band)

    def run(start):
        stop = min(start + chunk_rows, a.shape[0])
        _block(a[start:stop], b, *args, out[start:stop])

    starts = range(0, a.shape[0], max(1, chunk_rows))
    workers = workers or default_workers()
    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return out


def cross_mean_distance(
    a, b, kind, dtw_opts: DtwOptions = DEFAULT_DTW, workers: int | None = None, chunk_rows: int = 16
) -> float:
    """Mean of DF(a_i, b_j) over every pair of the two sets.

    Row chunks are evaluated concurrently but always folded into one
    compensated (Kahan) sum in row-major order, so the result is bitwise
    independent of ``workers`` and ``chunk_rows``. Memory stays bounded by the
    in-flight chunks, which allows the exact whole-set comparison.
    """
    kind = DistanceKind.parse(kind)
    a, b = _as_matrix(a), _as_matrix(b)
    _validate_pair_inputs(a, b, kind, dtw_opts)
    chunk_rows = max(1, int(chunk_rows))
    args = (_KIND_CODE[kind], dtw_opts._cost_code, dtw_opts._band)
    state = np.zeros(2)

    def run(start):
        stop = min(start + chunk_rows, a.shape[0])
        block = np.empty((stop - start, b.shape[0]))
        _block(a[start:stop], b, *args, block)
        return block

    starts = list(range(0, a.shape[0], chunk_rows))
    workers = workers or default_workers()
    if workers == 1:
        for s in starts:
            _kahan_fold(run(s), state)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            window = 2 * workers
            for w in range(0, len(starts), window):
                for block in pool.map(run, starts[w : w + window]):
                    _kahan_fold(block, state)
    return float(state[0] / (a.shape[0] * b.shape[0]))
