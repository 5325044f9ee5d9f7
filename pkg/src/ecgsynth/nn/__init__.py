"""A small float64 dense-network engine: layers, losses, Adam, VAE helpers."""

from .gaussian import (
    Reparameterize,
    kl_divergence_gaussian,
    kl_divergence_gaussian_grad,
    reparameterize,
)
from .layers import (
    INIT_STD,
    BatchNorm,
    Dense,
    Layer,
    LayerSpec,
    LeakyReLU,
    Param,
    ReLU,
    Sequential,
    Sigmoid,
    Tanh,
    backward,
    forward,
    init_gaussian,
)
from .losses import bce_loss, l1_loss, softmax_ce_loss, wasserstein_critic_loss
from .optim import Adam, AdamState, adam_step, clip_params

__all__ = [
    "Adam",
    "AdamState",
    "BatchNorm",
    "Dense",
    "INIT_STD",
    "Layer",
    "LayerSpec",
    "LeakyReLU",
    "Param",
    "ReLU",
    "Reparameterize",
    "Sequential",
    "Sigmoid",
    "Tanh",
    "adam_step",
    "backward",
    "bce_loss",
    "clip_params",
    "forward",
    "init_gaussian",
    "kl_divergence_gaussian",
    "kl_divergence_gaussian_grad",
    "l1_loss",
    "reparameterize",
    "softmax_ce_loss",
    "wasserstein_critic_loss",
]
