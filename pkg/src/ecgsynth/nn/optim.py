"""Adam with bias correction, plus weight clipping for Wasserstein critics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import ShapeMismatch


@dataclass
class AdamState:
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


@njit(cache=True)
def _adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    # one fused pass per element; arrays are flat views
    for k in range(p.shape[0]):
        gk = g[k]
        mk = b1 * m[k] + (1.0 - b1) * gk
        vk = b2 * v[k] + (1.0 - b2) * (gk * gk)
        m[k] = mk
        v[k] = vk
        p[k] -= lr * (mk / bc1) / (math.sqrt(vk / bc2) + eps)


def adam_step(params, grads, state: AdamState) -> None:
    """One bias-corrected Adam update of ``params`` (arrays, updated in place)."""
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeMismatch("parameter, gradient and moment lists differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"shape mismatch in Adam step: {p.shape} vs {g.shape}")
        _adam_update(
            p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1), v.reshape(-1),
            state.lr, b1, b2, state.eps, bc1, bc2,
        )  # fmt: skip


class Adam:
    """Adam over a fixed list of :class:`~ecgsynth.nn.layers.Param`."""

    def __init__(self, params, lr=0.0002, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr, beta1, beta2, eps)

    def step(self):
        adam_step([p.value for p in self.params], [p.grad for p in self.params], self.state)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def clip_params(params, c: float) -> None:
    for p in params:
        np.clip(p.value, -c, c, out=p.value)
