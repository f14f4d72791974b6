"""Desk-scale TimeGAN: embedder/recovery autoencoder, latent generator/supervisor, discriminator.

Training runs in three phases (autoencoder, supervised next-step, joint
adversarial) with the loss weighting of the original TimeGAN recipe.
"""

from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import serialize
from .core import Dataset, InputError, TimeSeries, TrainingError, UsageError
from .ingest import MinMaxScaler

log = logging.getLogger(__name__)

_UNIT_EPS = 1e-12


@dataclass(frozen=True)
class TimeGanConfig:
    hidden_dim: int = 16
    num_layers: int = 1
    z_dim: int = 1
    iters_embed: int = 500
    iters_supervised: int = 500
    iters_joint: int = 1000
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    lambda_sup: float = 100.0
    lambda_moment: float = 100.0
    gamma: float = 1.0
    disc_threshold: float = 0.15
    generator_steps: int = 2

    def __post_init__(self):
        counts = (self.hidden_dim, self.num_layers, self.z_dim, self.iters_embed,
                  self.iters_supervised, self.iters_joint, self.batch_size, self.generator_steps)
        if any(int(c) != c or c < 1 for c in counts):
            raise InputError("TimeGAN sizes and iteration counts must be positive integers")
        if min(self.lambda_sup, self.lambda_moment, self.gamma, self.disc_threshold) < 0 or self.lr <= 0:
            raise InputError("TimeGAN loss weights must be >= 0 and lr > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TimeGanConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown TimeGAN config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TimeGanModel:
    seq_len: int
    config: TimeGanConfig
    embedder: ad.RecurrentNet
    recovery: ad.RecurrentNet
    generator: ad.RecurrentNet
    supervisor: ad.RecurrentNet
    discriminator: ad.RecurrentNet
    scaler: MinMaxScaler | None = None
    history: dict[str, list[float]] = field(default_factory=dict)

    @classmethod
    def initialize(cls, seq_len: int, config: TimeGanConfig = TimeGanConfig(),
                   scaler: MinMaxScaler | None = None) -> "TimeGanModel":
        rng = np.random.default_rng(config.seed)
        h, layers = config.hidden_dim, config.num_layers
        return cls(
            seq_len=seq_len,
            config=config,
            embedder=ad.RecurrentNet(1, h, h, layers, rng),
            recovery=ad.RecurrentNet(h, h, 1, layers, rng),
            generator=ad.RecurrentNet(config.z_dim, h, h, layers, rng),
            supervisor=ad.RecurrentNet(h, h, h, max(layers - 1, 1), rng),
            discriminator=ad.RecurrentNet(h, h, 1, layers, rng, output_sigmoid=False),
            scaler=scaler,
        )

    def networks(self) -> dict[str, ad.Module]:
        return {"embedder": self.embedder, "recovery": self.recovery, "generator": self.generator,
                "supervisor": self.supervisor, "discriminator": self.discriminator}

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {}
        for prefix, net in self.networks().items():
            for name, arr in net.state_dict().items():
                state[f"{prefix}.{name}"] = arr
        c = self.config
        state["meta.shape"] = np.array([self.seq_len, c.hidden_dim, c.num_layers, c.z_dim], dtype=np.float64)
        if self.scaler is not None:
            state["meta.scaler"] = np.array([self.scaler.min_v, self.scaler.max_v])
        return state

    def save(self, path: str | Path) -> None:
        serialize.save(path, self.state_dict())

    @classmethod
    def load(cls, path: str | Path, config: TimeGanConfig | None = None) -> "TimeGanModel":
        state = serialize.load(path)
        seq_len, hidden, layers, z_dim = (int(v) for v in state["meta.shape"])
        base = config or TimeGanConfig()
        cfg = TimeGanConfig(**{**base.to_dict(), "hidden_dim": hidden, "num_layers": layers, "z_dim": z_dim})
        scaler = MinMaxScaler(*state["meta.scaler"]) if "meta.scaler" in state else None
        model = cls.initialize(seq_len, cfg, scaler)
        for prefix, net in model.networks().items():
            net.load_state_dict({k[len(prefix) + 1:]: v for k, v in state.items() if k.startswith(prefix + ".")})
        return model


@contextlib.contextmanager
def _frozen(*modules: ad.Module):
    """Stop gradient accumulation into the given modules' parameters."""
    params = [p for m in modules for p in m.parameters()]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True


def _moment_loss(x_hat: ad.Tensor, x: np.ndarray) -> ad.Tensor:
    """|std gap| + |mean gap| of per-(time, feature) batch moments."""
    mean_hat = ad.mean(x_hat, axis=0)
    centred = ad.sub(x_hat, ad.mean(x_hat, axis=0, keepdims=True))
    std_hat = ad.sqrt(ad.add(ad.mean(ad.square(centred), axis=0), 1e-6))
    std_real = np.sqrt(x.var(axis=0) + 1e-6)
    std_gap = ad.mean(ad.abs_(ad.sub(std_hat, std_real)))
    mean_gap = ad.mean(ad.abs_(ad.sub(mean_hat, x.mean(axis=0))))
    return ad.add(std_gap, mean_gap)


def _supervised_loss(supervisor: ad.RecurrentNet, h) -> ad.Tensor:
    """Next-step latent prediction error: supervisor(h)[t] should match h[t+1]."""
    h = ad.as_tensor(h)
    predicted = supervisor(h)
    T = h.shape[1]
    return ad.mse_loss(ad.slice_time(predicted, 0, T - 1), ad.slice_time(h, 1, T))


def _check(value: float, phase: str, it: int) -> float:
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss at iteration {it}", phase=phase)
    return value


def _as_array(data: Dataset | np.ndarray) -> np.ndarray:
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("TimeGAN needs a non-empty set of equal-length series")
    if X.min() < 0.0 or X.max() > 1.0:
        raise UsageError("TimeGAN training data must be scaled into [0, 1]")
    return X[:, :, None]


def train_timegan(train_subset: Dataset | np.ndarray, cfg: TimeGanConfig = TimeGanConfig(),
                  scaler: MinMaxScaler | None = None) -> TimeGanModel:
    """Fit a TimeGAN on series already scaled into [0, 1].

    ``scaler`` is stored on the model so fakes can be mapped back to the
    original value range.
    """
    X_all = _as_array(train_subset)
    n, seq_len, _ = X_all.shape
    if seq_len < 2:
        raise UsageError("TimeGAN needs series of length >= 2")
    model = TimeGanModel.initialize(seq_len, cfg, scaler)
    rng = np.random.default_rng([cfg.seed, 1])
    emb, rec, gen, sup, disc = (model.embedder, model.recovery, model.generator,
                                model.supervisor, model.discriminator)
    history = model.history = {"embed": [], "supervised": [], "generator": [], "embedder": [], "discriminator": []}

    def batch() -> np.ndarray:
        idx = rng.permutation(n)[:cfg.batch_size] if n >= cfg.batch_size else rng.integers(0, n, cfg.batch_size)
        return X_all[idx]

    def noise(b: int) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size=(b, seq_len, cfg.z_dim))

    # phase 1: autoencoder
    opt = ad.Adam(emb.parameters() + rec.parameters(), lr=cfg.lr)
    for it in range(cfg.iters_embed):
        X = batch()
        recon = ad.mse_loss(rec(emb(X)), X)
        loss = ad.mul(ad.sqrt(recon), 10.0)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history["embed"].append(_check(recon.item(), "embedding", it))

    # phase 2: supervisor learns next-step latent dynamics on real embeddings
    opt = ad.Adam(gen.parameters() + sup.parameters(), lr=cfg.lr)
    for it in range(cfg.iters_supervised):
        with ad.no_grad():
            H = emb(batch())
        loss = _supervised_loss(sup, H)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history["supervised"].append(_check(loss.item(), "supervised", it))

    # phase 3: joint adversarial training
    opt_g = ad.Adam(gen.parameters() + sup.parameters(), lr=cfg.lr)
    opt_e = ad.Adam(emb.parameters() + rec.parameters(), lr=cfg.lr)
    opt_d = ad.Adam(disc.parameters(), lr=cfg.lr)
    ones = np.ones((cfg.batch_size, seq_len, 1))
    zeros = np.zeros_like(ones)
    for it in range(cfg.iters_joint):
        for _ in range(cfg.generator_steps):
            X = batch()
            with ad.no_grad():
                H = emb(X)
            with _frozen(rec, disc):
                e_hat = gen(noise(cfg.batch_size))
                h_hat = sup(e_hat)
                x_hat = rec(h_hat)
                adversarial = ad.add(ad.bce_loss(disc(h_hat), ones),
                                     ad.mul(ad.bce_loss(disc(e_hat), ones), cfg.gamma))
                supervised = _supervised_loss(sup, H)
                g_loss = ad.add(ad.add(adversarial, ad.mul(ad.sqrt(supervised), cfg.lambda_sup)),
                                ad.mul(_moment_loss(x_hat, X), cfg.lambda_moment))
                opt_g.zero_grad()
                g_loss.backward()
                opt_g.step()
            history["generator"].append(_check(g_loss.item(), "joint", it))

            with _frozen(sup):
                H = emb(X)
                recon = ad.mse_loss(rec(H), X)
                e_loss = ad.add(ad.mul(ad.sqrt(recon), 10.0), ad.mul(_supervised_loss(sup, H), 0.1))
                opt_e.zero_grad()
                e_loss.backward()
                opt_e.step()
            history["embedder"].append(_check(e_loss.item(), "joint", it))

        X = batch()
        with ad.no_grad():
            H = emb(X)
            e_hat = gen(noise(cfg.batch_size))
            h_hat = sup(e_hat)
        d_loss = ad.add(ad.add(ad.bce_loss(disc(H), ones), ad.bce_loss(disc(h_hat), zeros)),
                        ad.mul(ad.bce_loss(disc(e_hat), zeros), cfg.gamma))
        d_value = _check(d_loss.item(), "joint", it)
        history["discriminator"].append(d_value)
        # a discriminator that is already winning is not updated
        if d_value > cfg.disc_threshold:
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
        if (it + 1) % 100 == 0:
            log.debug("joint %d: g=%.4f e=%.4f d=%.4f", it + 1, history["generator"][-1],
                      history["embedder"][-1], d_value)
    return model


def sample_fakes(model: TimeGanModel, m: int, n: int, seed: int = 0) -> list[TimeSeries]:
    """Draw ``m`` fake series of length ``n`` in the scaled [0, 1] space.

    Noise is uniform on [0, 1] per time step and latent dimension; values are
    kept strictly inside (0, 1).
    """
    if n != model.seq_len:
        raise UsageError(f"model was trained on length {model.seq_len}, asked for {n}")
    if m < 1:
        raise UsageError("need at least one fake")
    rng = np.random.default_rng(seed)
    Z = rng.uniform(0.0, 1.0, size=(m, n, model.config.z_dim))
    with ad.no_grad():
        X_hat = model.recovery(model.supervisor(model.generator(Z))).data[:, :, 0]
    X_hat = np.clip(X_hat, _UNIT_EPS, 1.0 - _UNIT_EPS)
    return [TimeSeries(row, id=f"fake-{i}") for i, row in enumerate(X_hat)]


def sample_fakes_original_scale(model: TimeGanModel, m: int, n: int, seed: int = 0) -> np.ndarray:
    if model.scaler is None:
        raise UsageError("model has no scaler attached")
    scaled = np.stack([t.values for t in sample_fakes(model, m, n, seed)])
    return model.scaler.inverse_transform(scaled)
