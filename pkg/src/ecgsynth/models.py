"""Fully-connected generative models for single beats and their training loops.

Three model kinds are supported:

``classic``
    Generator FC 100-128-256-512-1024-256 (leaky ReLU 0.2, batch norm on the
    three middle blocks, tanh output) against an FC 256-512-256-1 sigmoid
    discriminator, trained with binary cross-entropy.
``wgan_fc``
    The same topology with a linear critic output, trained with the
    Wasserstein loss, weight clipping and several critic steps per
    generator step.
``vaegan``
    Encoder FC 256-512-512 with two 10-unit heads (mu, logvar) and the
    reparameterization trick, decoder FC 10-512-512-256 (tanh), and a
    discriminator on the 10-dimensional latent codes (posterior codes vs
    prior draws). The encoder/decoder loss is a weighted sum of adversarial,
    L1 reconstruction and KL terms.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataset import BeatSet
from .errors import BadConfig, NonFiniteLoss, ShapeMismatch
from .nn import (
    Adam,
    LayerSpec,
    Reparameterize,
    Sequential,
    bce_loss,
    clip_params,
    kl_divergence_gaussian,
    kl_divergence_gaussian_grad,
    l1_loss,
)
from .rng import Rng

log = logging.getLogger(__name__)

MODEL_KINDS = ("classic", "vaegan", "wgan_fc")

# independent random streams derived from the run seed
STREAM_INIT, STREAM_TRAIN, STREAM_SNAPSHOT, STREAM_GENERATE = 0, 1, 2, 3


@dataclass
class GanConfig:
    model_kind: str = "classic"
    latent_dim: int = 100
    code_dim: int = 10
    beat_length: int = 256
    epochs: int = 30
    batch_size: int = 9
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    snapshot_per_epoch: int = 10
    lambda_adv: float = 1.0
    lambda_l1: float = 100.0
    lambda_kl: float = 1.0
    clip_c: float = 0.01
    n_critic: int = 5

    def __post_init__(self):
        self.model_kind = self.model_kind.replace("-", "_")
        if self.model_kind not in MODEL_KINDS:
            raise BadConfig(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        for name in ("latent_dim", "code_dim", "beat_length", "batch_size", "n_critic"):
            if getattr(self, name) < 1:
                raise BadConfig(f"{name} must be positive")
        for name in ("epochs", "snapshot_per_epoch"):
            if getattr(self, name) < 0:
                raise BadConfig(f"{name} must be >= 0")
        if not (self.lr >= 0 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise BadConfig("invalid optimizer settings")
        if min(self.lambda_adv, self.lambda_l1, self.lambda_kl) < 0 or self.clip_c <= 0:
            raise BadConfig("loss weights must be >= 0 and clip_c > 0")

    @property
    def generator_input(self) -> int:
        return self.code_dim if self.model_kind == "vaegan" else self.latent_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GanConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _fc(i, o):
    return LayerSpec("fc", {"in_features": i, "out_features": o})


def _lrelu():
    return LayerSpec("leaky_relu", {"slope": 0.2})


def _bn(n):
    return LayerSpec("batchnorm", {"features": n, "momentum": 0.9, "eps": 1e-5})


def architecture(config: GanConfig) -> dict[str, list[LayerSpec]]:
    """Layer specs of every network of a model kind, in checkpoint order."""
    L = config.beat_length
    if config.model_kind in ("classic", "wgan_fc"):
        gen = [
            _fc(config.latent_dim, 128), _lrelu(),
            _fc(128, 256), _bn(256), _lrelu(),
            _fc(256, 512), _bn(512), _lrelu(),
            _fc(512, 1024), _bn(1024), _lrelu(),
            _fc(1024, L), LayerSpec("tanh"),
        ]  # fmt: skip
        disc = [_fc(L, 512), _lrelu(), _fc(512, 256), _lrelu(), _fc(256, 1)]
        if config.model_kind == "classic":
            disc.append(LayerSpec("sigmoid"))
        return {"generator": gen, "discriminator": disc}
    k = config.code_dim
    return {
        "encoder": [_fc(L, 512), _lrelu(), _fc(512, 512), _bn(512), _lrelu()],
        "mu": [_fc(512, k)],
        "logvar": [_fc(512, k)],
        "decoder": [_fc(k, 512), _lrelu(), _fc(512, 512), _bn(512), _lrelu(), _fc(512, L), LayerSpec("tanh")],
        "discriminator": [_fc(k, 512), _lrelu(), _fc(512, 256), _lrelu(), _fc(256, 1), LayerSpec("sigmoid")],
    }


@dataclass
class GanModel:
    config: GanConfig
    nets: dict[str, Sequential]

    @property
    def generator(self) -> Sequential:
        return self.nets["decoder"] if self.config.model_kind == "vaegan" else self.nets["generator"]

    @property
    def discriminator(self) -> Sequential:
        return self.nets["discriminator"]

    @property
    def generator_side(self) -> list[Sequential]:
        """Every network updated by the generator optimizer."""
        if self.config.model_kind == "vaegan":
            return [self.nets[n] for n in ("encoder", "mu", "logvar", "decoder")]
        return [self.nets["generator"]]


def build_model(config: GanConfig) -> GanModel:
    """Fresh networks with N(0, 0.02^2) weights drawn from the run seed."""
    rng = Rng(config.seed, STREAM_INIT)
    nets = {name: Sequential.from_specs(specs, rng) for name, specs in architecture(config).items()}
    return GanModel(config, nets)


# -- generation -------------------------------------------------------------------


def generate(model, n: int, seed: int, label: str = "G") -> BeatSet:
    """``n`` beats G(z) with z ~ N(0, I); batch norm runs in inference mode.

    ``model`` may be a :class:`GanModel` or a checkpoint.
    """
    if hasattr(model, "to_model"):
        model = model.to_model()
    L = model.config.beat_length
    if n <= 0:
        return BeatSet.empty(L)
    z = Rng(seed, STREAM_GENERATE).normal((n, model.config.generator_input))
    beats = model.generator.forward(z, training=False)
    return BeatSet.from_beats(beats, label, source="generated")


# -- training ------------------------------------------------------------------------


@dataclass
class TrainRun:
    config: GanConfig
    losses: list[tuple[float, float]]
    snapshots: list[BeatSet]
    model: GanModel
    initial: object = None  # Checkpoint of the untrained model
    final: object = None  # Checkpoint after the last epoch
    recon_l1: list[float] = field(default_factory=list)

    @property
    def epochs(self) -> list[int]:
        return list(range(1, len(self.losses) + 1))

    def pooled_snapshots(self) -> BeatSet:
        from .dataset import concat

        return concat(self.snapshots, source="generated")


def _finite_or_raise(epoch, batch, **values):
    if not all(math.isfinite(v) for v in values.values()):
        detail = ", ".join(f"{k}={v!r}" for k, v in values.items())
        raise NonFiniteLoss(epoch, batch, detail)


class _Trainer:
    def __init__(self, model: GanModel):
        self.model = model
        c = model.config
        self.cfg = c
        self.rng = Rng(c.seed, STREAM_TRAIN)
        g_params = [p for net in model.generator_side for p in net.params]
        self.opt_g = Adam(g_params, c.lr, c.beta1, c.beta2)
        self.opt_d = Adam(model.discriminator.params, c.lr, c.beta1, c.beta2)
        self.critic_steps = 0
        self.reparam = Reparameterize()

    def _zero_all(self):
        for net in self.model.nets.values():
            net.zero_grad()

    def classic_step(self, x):
        G, D = self.model.generator, self.model.discriminator
        m = x.shape[0]
        fake = G.forward(self.rng.normal((m, self.cfg.latent_dim)), training=True)

        self._zero_all()
        l_real, g = bce_loss(D.forward(x), 1.0)
        D.backward(g)
        l_fake, g = bce_loss(D.forward(fake), 0.0)
        D.backward(g)
        self.opt_d.step()

        self._zero_all()
        g_loss, g = bce_loss(D.forward(fake), 1.0)
        G.backward(D.backward(g))
        self.opt_g.step()
        return g_loss, l_real + l_fake, None

    def wgan_step(self, x):
        G, D = self.model.generator, self.model.discriminator
        m = x.shape[0]
        fake = G.forward(self.rng.normal((m, self.cfg.latent_dim)), training=True)

        self._zero_all()
        r = D.forward(x)
        D.backward(-np.ones_like(r) / m)
        f = D.forward(fake)
        D.backward(np.ones_like(f) / m)
        self.opt_d.step()
        clip_params(D.params, self.cfg.clip_c)
        d_loss = float(f.mean() - r.mean())
        self.critic_steps += 1

        g_loss = None
        if self.critic_steps % self.cfg.n_critic == 0:
            self._zero_all()
            fake = G.forward(self.rng.normal((m, self.cfg.latent_dim)), training=True)
            f = D.forward(fake)
            g_loss = float(-f.mean())
            G.backward(D.backward(-np.ones_like(f) / m))
            self.opt_g.step()
        return g_loss, d_loss, None

    def vaegan_step(self, x):
        nets = self.model.nets
        E, MU, LV, DEC, D = (nets[k] for k in ("encoder", "mu", "logvar", "decoder", "discriminator"))
        c = self.cfg
        m = x.shape[0]
        h = E.forward(x, training=True)
        mu = MU.forward(h)
        logvar = LV.forward(h)
        z = self.reparam.forward(mu, logvar, self.rng)
        recon = DEC.forward(z, training=True)

        # the discriminator separates prior draws (real) from posterior codes (fake)
        self._zero_all()
        l_real, g = bce_loss(D.forward(self.rng.normal((m, c.code_dim))), 1.0)
        D.backward(g)
        l_fake, g = bce_loss(D.forward(z), 0.0)
        D.backward(g)
        self.opt_d.step()

        self._zero_all()
        adv, g = bce_loss(D.forward(z), 1.0)
        grad_z = c.lambda_adv * D.backward(g)
        rec, g = l1_loss(recon, x)
        grad_z = grad_z + DEC.backward(c.lambda_l1 * g)
        kl = kl_divergence_gaussian(mu, logvar)
        kl_mu, kl_lv = kl_divergence_gaussian_grad(mu, logvar)
        g_mu, g_lv = self.reparam.backward(grad_z)
        g_h = MU.backward(g_mu + c.lambda_kl * kl_mu) + LV.backward(g_lv + c.lambda_kl * kl_lv)
        E.backward(g_h)
        self.opt_g.step()
        D.zero_grad()
        g_loss = c.lambda_adv * adv + c.lambda_l1 * rec + c.lambda_kl * kl
        return g_loss, l_real + l_fake, rec


def train(config: GanConfig, dataset: BeatSet, progress=None) -> TrainRun:
    """Alternating adversarial training; returns losses, snapshots and checkpoints.

    Each epoch visits the data in a fresh seeded order in minibatches of
    ``batch_size`` (a trailing batch of one beat is skipped since batch norm
    needs two samples). At every epoch end ``snapshot_per_epoch`` beats are
    generated from latents of a dedicated stream, so snapshots never change
    the training trajectory.

    ``progress(epoch, g_loss, d_loss, model)`` is called after every epoch.
    """
    from .checkpoint import Checkpoint

    data = np.asarray(dataset.beats, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != config.beat_length:
        raise ShapeMismatch(f"dataset beats have shape {data.shape}, expected (n, {config.beat_length})")
    if data.shape[0] < 2 or config.batch_size > data.shape[0]:
        raise BadConfig(f"batch size {config.batch_size} does not fit {data.shape[0]} beats")
    if np.abs(data).max() > 1.0:
        raise ShapeMismatch("dataset must be normalized to [-1, 1]")

    model = build_model(config)
    initial = Checkpoint.from_model(model, epoch=0)
    trainer = _Trainer(model)
    step = {
        "classic": trainer.classic_step,
        "wgan_fc": trainer.wgan_step,
        "vaegan": trainer.vaegan_step,
    }[config.model_kind]
    snap_rng = Rng(config.seed, STREAM_SNAPSHOT)

    losses, snapshots, recon = [], [], []
    n = data.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = trainer.rng.permutation(n)
        g_hist, d_hist, r_hist = [], [], []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            if idx.size < 2:
                continue
            g_loss, d_loss, rec = step(data[idx])
            _finite_or_raise(epoch, b, d_loss=d_loss, g_loss=0.0 if g_loss is None else g_loss)
            d_hist.append(d_loss)
            if g_loss is not None:
                g_hist.append(g_loss)
            if rec is not None:
                r_hist.append(rec)
        g_mean = float(np.mean(g_hist)) if g_hist else (losses[-1][0] if losses else float("nan"))
        d_mean = float(np.mean(d_hist))
        if not g_hist and not losses:
            raise NonFiniteLoss(epoch, 0, "no generator step in the first epoch; lower n_critic")
        losses.append((g_mean, d_mean))
        if r_hist:
            recon.append(float(np.mean(r_hist)))

        if config.snapshot_per_epoch:
            z = snap_rng.normal((config.snapshot_per_epoch, config.generator_input))
            beats = model.generator.forward(z, training=False)
            snapshots.append(BeatSet.from_beats(beats, "G", source="generated"))
        else:
            snapshots.append(BeatSet.empty(config.beat_length))
        log.info("epoch %d/%d  g_loss=%.5f  d_loss=%.5f", epoch, config.epochs, g_mean, d_mean)
        if progress is not None:
            progress(epoch, g_mean, d_mean, model)

    final = Checkpoint.from_model(model, epoch=config.epochs)
    return TrainRun(config, losses, snapshots, model, initial, final, recon)
