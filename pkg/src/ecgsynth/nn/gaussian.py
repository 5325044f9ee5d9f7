"""Reparameterized Gaussian sampling and its KL penalty against N(0, I)."""

from __future__ import annotations

import numpy as np

from ..errors import MissingCache, ShapeMismatch
from ..rng import Rng


def _check(mu, logvar):
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ShapeMismatch(f"mu {mu.shape} and logvar {logvar.shape} differ")
    return mu, logvar


class Reparameterize:
    """``z = mu + exp(logvar / 2) * eps`` with ``eps ~ N(0, I)``.

    Keeps the noise of the last forward call so gradients can flow back to
    ``mu`` and ``logvar``.
    """

    def __init__(self):
        self._cache = None

    def forward(self, mu, logvar, rng: Rng, eps=None):
        mu, logvar = _check(mu, logvar)
        if eps is None:
            eps = rng.normal(mu.shape)
        std = np.exp(0.5 * logvar)
        self._cache = (std, eps)
        return mu + std * eps

    def backward(self, grad_z):
        if self._cache is None:
            raise MissingCache("Reparameterize.backward called before forward")
        std, eps = self._cache
        return grad_z, grad_z * eps * std * 0.5


def reparameterize(mu, logvar, rng: Rng) -> np.ndarray:
    return Reparameterize().forward(mu, logvar, rng)


def kl_divergence_gaussian(mu, logvar) -> float:
    """KL(N(mu, exp(logvar)) || N(0, 1)) = 0.5 * sum(mu^2 + var - logvar - 1).

    For a batch (2-D input) the sum runs over the latent axis and the result
    is averaged over rows.
    """
    mu, logvar = _check(mu, logvar)
    per = 0.5 * (mu * mu + np.exp(logvar) - logvar - 1.0)
    if per.ndim == 2:
        return float(per.sum(axis=1).mean())
    return float(per.sum())


def kl_divergence_gaussian_grad(mu, logvar):
    """Gradients of :func:`kl_divergence_gaussian` w.r.t. ``mu`` and ``logvar``."""
    mu, logvar = _check(mu, logvar)
    scale = 1.0 / mu.shape[0] if mu.ndim == 2 else 1.0
    return mu * scale, 0.5 * (np.exp(logvar) - 1.0) * scale
