"""Seeded random streams.

All randomness in the package flows through :class:`Rng`. The bit source is
numpy's PCG64 keyed by ``SeedSequence([seed, stream])``; Gaussian draws are
produced from its uniforms with the Box-Muller transform, so the normal
stream depends only on the PCG64 output and libm.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


class Rng:
    """A deterministic random stream identified by ``(seed, stream)``.

    Independent consumers (weight init, minibatch order, snapshot latents,
    ...) use different ``stream`` ids of the same seed so that changing how
    much one consumer draws never perturbs another.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.stream = int(stream)
        ss = np.random.SeedSequence([seed, self.stream])
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, stream: int) -> "Rng":
        return Rng(self.seed, stream)

    def uniform(self, size=None) -> np.ndarray:
        """Uniform doubles in [0, 1) with 53 random bits each."""
        return self._gen.random(size)

    def normal(self, size=None, mean: float = 0.0, std: float = 1.0):
        shape = () if size is None else (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        # 1 - U lies in (0, 1], keeping log finite.
        u1 = 1.0 - self._gen.random(m)
        u2 = self._gen.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out = mean + std * z[:n]
        if size is None:
            return float(out[0])
        return out.reshape(shape)

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)`` in draw order."""
        return self._gen.permutation(n)[:k]
