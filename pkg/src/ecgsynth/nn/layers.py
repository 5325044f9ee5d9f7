"""Dense layers with hand-written reverse-mode gradients.

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``Param.grad`` during ``backward``.
A :class:`Sequential` chains layers and runs the backward pass in reverse.
All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingCache, ShapeMismatch
from ..rng import Rng

INIT_STD = 0.02


class Param:
    """A trainable array and its accumulated gradient."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name: str = ""):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape})"


def init_gaussian(shape, rng: Rng, std: float = INIT_STD, name: str = "") -> Param:
    """i.i.d. N(0, std^2) entries drawn with Box-Muller from ``rng``."""
    return Param(rng.normal(shape, 0.0, std), name)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_TYPES:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        a = self.args
        if self.kind == "fc" and (a["in_features"] < 1 or a["out_features"] < 1):
            raise ValueError("fully-connected dimensions must be positive")
        if self.kind == "leaky_relu" and not 0.0 < a["slope"] < 1.0:
            raise ValueError("leaky ReLU slope must lie in (0, 1)")
        if self.kind == "batchnorm" and (a["features"] < 1 or a["eps"] <= 0):
            raise ValueError("batchnorm needs positive features and eps")

    def build(self, rng: Rng | None = None) -> "Layer":
        cls = LAYER_TYPES[self.kind]
        if self.kind == "fc":
            return cls(**self.args, rng=rng)
        return cls(**self.args)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.args}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        d = dict(d)
        return cls(d.pop("kind"), d)


class Layer:
    params: list

    def __init__(self):
        self.params = []
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def buffers(self) -> list[np.ndarray]:
        """Non-trainable state that must survive a checkpoint."""
        return []

    @property
    def spec(self) -> LayerSpec:
        raise NotImplementedError

    def _need_cache(self):
        if self._cache is None:
            raise MissingCache(f"{type(self).__name__}.backward called before forward")
        return self._cache


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: Rng | None = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            w = np.zeros((in_features, out_features))
        else:
            w = rng.normal((in_features, out_features), 0.0, INIT_STD)
        self.weight = Param(w, "weight")
        self.bias = Param(np.zeros(out_features), "bias")
        self.params = [self.weight, self.bias]

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"Dense expects (batch, {self.in_features}), got {x.shape}")
        self._cache = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out):
        x = self._need_cache()
        self.weight.grad += x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value.T

    @property
    def spec(self):
        return LayerSpec("fc", {"in_features": self.in_features, "out_features": self.out_features})


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = slope

    def forward(self, x, training=True):
        pos = x > 0
        self._cache = pos
        return np.where(pos, x, self.slope * x)

    def backward(self, grad_out):
        pos = self._need_cache()
        return np.where(pos, grad_out, self.slope * grad_out)

    @property
    def spec(self):
        return LayerSpec("leaky_relu", {"slope": self.slope})


class ReLU(Layer):
    def forward(self, x, training=True):
        pos = x > 0
        self._cache = pos
        return np.where(pos, x, 0.0)

    def backward(self, grad_out):
        return np.where(self._need_cache(), grad_out, 0.0)

    @property
    def spec(self):
        return LayerSpec("relu")


class Tanh(Layer):
    def forward(self, x, training=True):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad_out):
        y = self._need_cache()
        return grad_out * (1.0 - y * y)

    @property
    def spec(self):
        return LayerSpec("tanh")


class Sigmoid(Layer):
    def forward(self, x, training=True):
        # split on sign so exp never overflows
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._cache = y
        return y

    def backward(self, grad_out):
        y = self._need_cache()
        return grad_out * y * (1.0 - y)

    @property
    def spec(self):
        return LayerSpec("sigmoid")


class BatchNorm(Layer):
    """Per-feature batch normalization with trainable scale and shift.

    Training mode normalizes with batch statistics and updates the running
    averages as ``running = momentum * running + (1 - momentum) * batch``
    (running variance uses the unbiased batch estimate). Inference mode uses
    the running averages only.
    """

    def __init__(self, features: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.features = features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Param(np.ones(features), "gamma")
        self.beta = Param(np.zeros(features), "beta")
        self.params = [self.gamma, self.beta]
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.features:
            raise ShapeMismatch(f"BatchNorm expects (batch, {self.features}), got {x.shape}")
        if training:
            n = x.shape[0]
            mean = x.mean(axis=0)
            centered = x - mean
            var = (centered * centered).mean(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = centered * inv_std
            m = self.momentum
            unbiased = var * (n / (n - 1)) if n > 1 else var
            self.running_mean = m * self.running_mean + (1.0 - m) * mean
            self.running_var = m * self.running_var + (1.0 - m) * unbiased
            self._cache = (True, xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = (False, xhat, inv_std)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, grad_out):
        training, xhat, inv_std = self._need_cache()
        self.gamma.grad += (grad_out * xhat).sum(axis=0)
        self.beta.grad += grad_out.sum(axis=0)
        g = grad_out * self.gamma.value
        if not training:
            return g * inv_std
        n = g.shape[0]
        return (inv_std / n) * (n * g - g.sum(axis=0) - xhat * (g * xhat).sum(axis=0))

    def buffers(self):
        return [self.running_mean, self.running_var]

    def set_buffers(self, mean, var):
        self.running_mean = np.array(mean, dtype=np.float64)
        self.running_var = np.array(var, dtype=np.float64)

    @property
    def spec(self):
        return LayerSpec(
            "batchnorm", {"features": self.features, "momentum": self.momentum, "eps": self.eps}
        )


LAYER_TYPES = {
    "fc": Dense,
    "leaky_relu": LeakyReLU,
    "relu": ReLU,
    "tanh": Tanh,
    "sigmoid": Sigmoid,
    "batchnorm": BatchNorm,
}


class Sequential:
    """An ordered stack of layers."""

    def __init__(self, layers):
        self.layers = list(layers)

    @classmethod
    def from_specs(cls, specs, rng: Rng | None = None) -> "Sequential":
        return cls([s.build(rng) for s in specs])

    def forward(self, x, training: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    __call__ = forward

    def backward(self, grad_out) -> np.ndarray:
        g = grad_out
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    @property
    def params(self) -> list[Param]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.value.size for p in self.params)

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.out_features
        raise ValueError("network has no dense layer")


def forward(network, batch, training: bool = True) -> np.ndarray:
    return network.forward(batch, training)


def backward(network, output_grad) -> np.ndarray:
    """Backpropagate ``output_grad``; returns the input gradient.

    Parameter gradients are accumulated into each ``Param.grad``.
    """
    return network.backward(output_grad)
