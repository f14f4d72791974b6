"""Built-in classifiers to explain: Euclidean 1-NN, a small 1-D CNN, and a constant baseline."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import serialize
from .core import Dataset, InputError, TimeSeries, UsageError, as_array


def _as_batch(X, n: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != n:
        raise InputError(f"expected series of length {n}, got {X.shape[1]}")
    return X


class OneNnClassifier:
    """Label of the Euclidean-nearest training series; ties go to the lowest training index."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        if len(X) == 0:
            raise UsageError("1-NN needs at least one training instance")
        self._X = np.array(X, dtype=np.float64)
        self._y = np.array(y, dtype=np.int64)
        self._X.setflags(write=False)
        self._y.setflags(write=False)

    @property
    def series_length(self) -> int:
        return self._X.shape[1]

    def predict(self, t) -> int:
        return int(self.predict_many(as_array(t)[None, :])[0])

    def predict_many(self, X) -> np.ndarray:
        X = _as_batch(X, self.series_length)
        out = np.empty(len(X), dtype=np.int64)
        for lo in range(0, len(X), 256):
            block = X[lo:lo + 256]
            d2 = ((block[:, None, :] - self._X[None, :, :]) ** 2).sum(axis=2)
            out[lo:lo + 256] = self._y[np.argmin(d2, axis=1)]
        return out

    def save(self, path: str | Path) -> None:
        serialize.save(path, {"train.X": self._X, "train.y": self._y.astype(np.float64)})

    @classmethod
    def load(cls, path: str | Path) -> "OneNnClassifier":
        state = serialize.load(path)
        return cls(state["train.X"], state["train.y"].astype(np.int64))


def fit_1nn(d: Dataset) -> OneNnClassifier:
    return OneNnClassifier(d.X, d.y)


@dataclass(frozen=True)
class CnnHyper:
    n_kernels: int = 16
    kernel_width: int = 7
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0


class SmallCnnClassifier(ad.Module):
    """conv1d -> relu -> mean over time -> dense -> sigmoid, for binary labels."""

    def __init__(self, series_length: int, hyper: CnnHyper = CnnHyper()):
        if hyper.kernel_width > series_length:
            raise InputError("kernel wider than the series")
        rng = np.random.default_rng(hyper.seed)
        self.series_length = series_length
        self.hyper = hyper
        self.conv = ad.Conv1d(1, hyper.n_kernels, hyper.kernel_width, rng)
        self.dense = ad.Dense(hyper.n_kernels, 1, rng)

    def logits(self, X) -> ad.Tensor:
        x = np.asarray(X, dtype=np.float64)[:, :, None]
        features = ad.global_mean_over_time(ad.relu(self.conv(x)))
        return ad.reshape(self.dense(features), (x.shape[0],))

    def predict_proba(self, X) -> np.ndarray:
        X = _as_batch(X, self.series_length)
        with ad.no_grad():
            return ad.sigmoid(self.logits(X)).data.copy()

    def predict_many(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def predict(self, t) -> int:
        return int(self.predict_many(as_array(t)[None, :])[0])

    def save(self, path: str | Path) -> None:
        serialize.save(path, self.state_dict())

    @classmethod
    def load(cls, path: str | Path, hyper: CnnHyper = CnnHyper()) -> "SmallCnnClassifier":
        state = serialize.load(path)
        n_kernels = state["conv.w"].shape[2]
        width = state["conv.w"].shape[0]
        series_length = int(state["meta.length"][0]) if "meta.length" in state else None
        if series_length is None:
            raise InputError("parameter file lacks the series length")
        model = cls(series_length, CnnHyper(**{**hyper.__dict__, "n_kernels": n_kernels, "kernel_width": width}))
        model.load_state_dict(state)
        return model

    def state_dict(self) -> dict[str, np.ndarray]:
        state = super().state_dict()
        state["meta.length"] = np.array([float(self.series_length)])
        return state


def fit_cnn(d: Dataset, hyper: CnnHyper = CnnHyper()) -> SmallCnnClassifier:
    """Train with binary cross-entropy and Adam; deterministic given ``hyper.seed``."""
    if d.labels.size != 2 or set(d.labels.tolist()) != {0, 1}:
        raise UsageError("the CNN classifier only supports binary labels {0, 1}")
    model = SmallCnnClassifier(d.series_length, hyper)
    opt = ad.Adam(model.parameters(), lr=hyper.lr)
    rng = np.random.default_rng([hyper.seed, 7])
    targets = d.y.astype(np.float64)
    for _ in range(hyper.epochs):
        order = rng.permutation(len(d))
        for lo in range(0, len(d), hyper.batch_size):
            idx = order[lo:lo + hyper.batch_size]
            loss = ad.bce_loss(model.logits(d.X[idx]), targets[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    return model


class ConstantClassifier:
    """Always predicts the same label; no counterfactual can exist for that label."""

    def __init__(self, label: int = 0):
        self.label = int(label)

    def predict(self, t) -> int:
        return self.label

    def predict_many(self, X) -> np.ndarray:
        return np.full(len(np.atleast_2d(X)), self.label, dtype=np.int64)


def make_classifier(kind: str, train: Dataset, seed: int = 0, **hyper):
    if kind == "1nn":
        return fit_1nn(train)
    if kind == "cnn":
        return fit_cnn(train, CnnHyper(seed=seed, **hyper))
    if kind == "constant":
        return ConstantClassifier(int(train.labels[0]))
    raise InputError(f"unknown classifier {kind!r}")
