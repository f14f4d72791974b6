"""Closeness, sparsity, sensibility and plausibility of counterfactual explanations."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import DEFAULT_EPS, InputError, as_array, hamming_distance, l1_distance
from .iforest import IsolationForest


def closeness(orig, cf) -> float:
    """L1 distance; lower is closer."""
    return l1_distance(orig, cf)


def sparsity(orig, cf, eps: float = DEFAULT_EPS) -> float:
    """Percentage of time steps left unaltered (100 = untouched, 0 = every step changed)."""
    n = as_array(orig).size
    return 100.0 * (1.0 - hamming_distance(orig, cf, eps) / n)


def sensibility(outcomes: Sequence[bool]) -> float:
    """Fraction of instances for which a counterfactual was found."""
    if len(outcomes) == 0:
        raise InputError("sensibility of an empty outcome list")
    return sum(bool(o) for o in outcomes) / len(outcomes)


def plausibility(cfs, forest: IsolationForest, threshold: float | None = None) -> float:
    """Fraction of counterfactuals scored above the forest's outlier threshold."""
    if len(cfs) == 0:
        raise InputError("plausibility of an empty counterfactual list")
    X = np.stack([as_array(c) for c in cfs])
    thr = forest.threshold if threshold is None else threshold
    return float(np.mean(forest.score(X) > thr))
