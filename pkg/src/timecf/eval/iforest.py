"""Isolation Forest outlier scoring over whole series (one feature per time step)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import FitError, InputError

EULER_GAMMA = 0.5772156649


def harmonic(i: float) -> float:
    return math.log(i) + EULER_GAMMA


def average_path_length(n: int) -> float:
    """c(n) = 2 H(n-1) - 2 (n-1) / n, with c(n) = 0 for n <= 1."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.left[node] >= 0
        leaf_adjust = np.array([average_path_length(int(s)) for s in self.size[node]])
        return self.depth[node] + leaf_adjust


def _grow(X: np.ndarray, max_depth: int, rng: np.random.Generator) -> _Tree:
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(d, n):
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (size, n), (depth, d)):
            arr.append(v)
        return len(size) - 1

    stack = [(np.arange(len(X)), 0, new_node(0, len(X)))]
    while stack:
        rows, d, nid = stack.pop()
        if d >= max_depth or rows.size <= 1:
            continue
        sub = X[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            continue
        q = int(rng.choice(splittable))
        p = rng.uniform(lo[q], hi[q])
        mask = sub[:, q] < p
        feature[nid], threshold[nid] = q, p
        left[nid] = new_node(d + 1, int(mask.sum()))
        right[nid] = new_node(d + 1, int((~mask).sum()))
        stack.append((rows[mask], d + 1, left[nid]))
        stack.append((rows[~mask], d + 1, right[nid]))
    return _Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                 np.array(size), np.array(depth, dtype=np.float64))


@dataclass
class IsolationForest:
    n_trees: int = 100
    subsample: int = 256
    seed: int = 0
    contamination: float = 0.1
    trees: list[_Tree] = field(default_factory=list, repr=False)
    psi: int = 0
    threshold: float = float("nan")

    @property
    def max_depth(self) -> int:
        return math.ceil(math.log2(self.psi)) if self.psi > 1 else 0

    def fit(self, X) -> "IsolationForest":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) < 2:
            raise FitError("isolation forest needs at least 2 training vectors")
        rng = np.random.default_rng(self.seed)
        self.psi = min(self.subsample, len(X))
        self.trees = []
        for _ in range(self.n_trees):
            rows = rng.choice(len(X), size=self.psi, replace=False)
            self.trees.append(_grow(X[rows], self.max_depth, rng))
        self._n_features = X.shape[1]
        self.threshold = float(np.percentile(self.score(X), 100.0 * (1.0 - self.contamination)))
        return self

    def expected_path_length(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if not self.trees:
            raise FitError("forest is not fitted")
        if X.shape[1] != self._n_features:
            raise InputError(f"expected {self._n_features} features, got {X.shape[1]}")
        return np.mean([tree.path_lengths(X) for tree in self.trees], axis=0)

    def score(self, X) -> np.ndarray:
        """Anomaly score 2^(-E[h(x)] / c(psi)); values near 1 are outliers."""
        return score_from_path_length(self.expected_path_length(X), self.psi)

    def is_outlier(self, X) -> np.ndarray:
        return self.score(X) > self.threshold


def score_from_path_length(mean_path, psi: int):
    return np.power(2.0, -np.asarray(mean_path, dtype=np.float64) / average_path_length(psi))


def fit_iforest(train, n_trees: int = 100, subsample: int = 256, seed: int = 0,
                contamination: float = 0.1) -> IsolationForest:
    X = train.X if hasattr(train, "X") else train
    return IsolationForest(n_trees=n_trees, subsample=subsample, seed=seed, contamination=contamination).fit(X)
