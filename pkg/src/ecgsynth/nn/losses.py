"""Loss functions returning ``(value, gradient)`` pairs.

Losses are means over every element (or every row for the classification
loss), so gradients already include the ``1/N`` factor.
"""

from __future__ import annotations

import numpy as np

from ..errors import BadLabel, ShapeMismatch

PROB_CLAMP = 1e-7


def bce_loss(predictions, targets):
    """Binary cross-entropy on probabilities.

    Probabilities are clamped to ``[1e-7, 1 - 1e-7]`` so the loss stays
    finite; the gradient is zero where the clamp is active.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.broadcast_to(np.asarray(targets, dtype=np.float64), p.shape)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    n = p.size
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    grad = (pc - y) / (pc * (1.0 - pc)) / n
    grad = np.where((p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP), grad, 0.0)
    return float(loss), grad


def l1_loss(a, b):
    """Mean absolute difference; the subgradient at ties is 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"l1_loss shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(np.abs(d))), np.sign(d) / d.size


def softmax_ce_loss(logits, labels):
    """Mean softmax cross-entropy over rows, stabilized with log-sum-exp."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise ShapeMismatch(f"logits {z.shape} do not match labels {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= z.shape[1] or not np.issubdtype(y.dtype, np.integer)):
        raise BadLabel(f"labels must be integers in [0, {z.shape[1]})")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    n = z.shape[0]
    rows = np.arange(n)
    loss = -logp[rows, y].mean()
    grad = np.exp(logp)
    grad[rows, y] -= 1.0
    return float(loss), grad / n


def wasserstein_critic_loss(critic_real, critic_fake):
    """``mean(D(fake)) - mean(D(real))`` and its gradients w.r.t. both inputs."""
    r = np.asarray(critic_real, dtype=np.float64)
    f = np.asarray(critic_fake, dtype=np.float64)
    loss = f.mean() - r.mean()
    return float(loss), -np.ones_like(r) / r.size, np.ones_like(f) / f.size
