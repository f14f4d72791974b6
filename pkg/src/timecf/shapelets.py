"""Random shapelet transform: sample subsequences, score by information gain, keep the best."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Dataset, InputError, Interval, UsageError, as_array


@dataclass(frozen=True, eq=False)
class ShapeletCandidate:
    source_index: int
    class_label: int
    interval: Interval
    values: np.ndarray
    quality: float
    split_threshold: float

    @property
    def key(self) -> str:
        return f"s{self.source_index}:{self.interval.start}+{self.interval.length}"

    def to_dict(self) -> dict:
        return {
            "source_index": self.source_index,
            "class_label": self.class_label,
            "start": self.interval.start,
            "length": self.interval.length,
            "quality": self.quality,
            "threshold": self.split_threshold,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeletCandidate":
        values = np.asarray(d["values"], dtype=np.float64)
        iv = Interval(int(d["start"]), int(d["length"]))
        if values.shape != (iv.length,):
            raise InputError("shapelet values do not match its length")
        return cls(int(d["source_index"]), int(d["class_label"]), iv, values,
                   float(d["quality"]), float(d["threshold"]))


@dataclass(frozen=True)
class RstConfig:
    lengths: tuple[int, ...] = ()  # empty: 10%, 20%, 30% of the series length
    max_candidates: int = 500
    n_keep: int = 20
    time_budget: float | None = None
    seed: int = 0
    overlap_threshold: float = 0.5
    z_normalize: bool = False
    per_class_quota: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.max_candidates < 1 or self.n_keep < 1 or self.n_keep > self.max_candidates:
            raise InputError("need 1 <= n_keep <= max_candidates")
        if not 0.0 <= self.overlap_threshold <= 1.0:
            raise InputError("overlap_threshold must lie in [0, 1]")

    def resolved_lengths(self, n: int) -> tuple[int, ...]:
        lengths = self.lengths or (max(3, math.ceil(0.1 * n)), math.ceil(0.2 * n), math.ceil(0.3 * n))
        lengths = tuple(sorted(set(int(v) for v in lengths)))
        if any(v < 3 or v > n for v in lengths):
            raise InputError(f"shapelet lengths must lie in [3, {n}], got {lengths}")
        return lengths


def _znorm(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=-1, keepdims=True)
    return (x - x.mean(axis=-1, keepdims=True)) / np.where(sd > 1e-8, sd, 1.0)


def min_subsequence_distance(cand_values, t, z_normalize: bool = False) -> float:
    """Smallest length-normalised squared distance between ``cand_values`` and any window of ``t``."""
    cand = np.asarray(cand_values, dtype=np.float64)
    series = as_array(t)
    if cand.size > series.size:
        raise InputError("candidate is longer than the series")
    return float(min_distances_to_all(cand, series[None, :], z_normalize)[0])


def min_distances_to_all(cand: np.ndarray, X: np.ndarray, z_normalize: bool = False) -> np.ndarray:
    """Vectorised :func:`min_subsequence_distance` against each row of ``X``."""
    windows = sliding_window_view(X, cand.size, axis=1)  # (n, offsets, len)
    if z_normalize:
        windows, cand = _znorm(windows), _znorm(cand)
    return ((windows - cand) ** 2).mean(axis=2).min(axis=1)


def _entropy(counts: Sequence[int], total: int) -> float:
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def information_gain(distances, labels) -> tuple[float, float]:
    """Best binary split of ``distances`` by entropy reduction (bits).

    Candidate thresholds are midpoints between consecutive distinct sorted
    distances; the lowest midpoint wins ties. With a single distinct distance
    there is nothing to split and the gain is zero.
    """
    d = np.asarray(distances, dtype=np.float64)
    y = np.asarray(labels)
    if d.size == 0 or d.shape != y.shape:
        raise InputError("information_gain needs equal-length, non-empty inputs")
    classes, y_idx = np.unique(y, return_inverse=True)
    n, k = d.size, classes.size
    total_counts = np.bincount(y_idx, minlength=k).tolist()
    parent = _entropy(total_counts, n)

    order = np.argsort(d, kind="stable")
    d_sorted, y_sorted = d[order], y_idx[order]
    uniq = np.unique(d_sorted)
    if uniq.size == 1:
        return 0.0, float(uniq[0])
    # left side after each distinct value: cumulative class counts
    cum = np.cumsum(np.eye(k, dtype=np.int64)[y_sorted], axis=0)
    last_of_value = np.searchsorted(d_sorted, uniq, side="right") - 1

    best_gain, best_thr = -1.0, float(uniq[0])
    for j in range(uniq.size - 1):
        left = cum[last_of_value[j]].tolist()
        n_left = last_of_value[j] + 1
        right = [total_counts[c] - left[c] for c in range(k)]
        n_right = n - n_left
        weighted = (n_left / n) * _entropy(left, n_left) + (n_right / n) * _entropy(right, n_right)
        gain = max(0.0, parent - weighted)
        if gain > best_gain:
            best_gain, best_thr = gain, (uniq[j] + uniq[j + 1]) / 2.0
    return float(best_gain), float(best_thr)


def _sample_positions(rng: np.random.Generator, n_series: int, n: int, lengths: tuple[int, ...], limit: int):
    """Uniform draw without replacement over all (series, length, start) triples."""
    per_length = [n - L + 1 for L in lengths]
    per_series = sum(per_length)
    total = n_series * per_series
    flat = rng.choice(total, size=min(limit, total), replace=False)
    offsets = np.cumsum([0] + per_length)
    out = []
    for f in flat:
        series, rem = divmod(int(f), per_series)
        j = int(np.searchsorted(offsets, rem, side="right") - 1)
        out.append((series, lengths[j], rem - int(offsets[j])))
    return out


def _rank_key(c: ShapeletCandidate):
    return (-c.quality, c.interval.length, c.source_index, c.interval.start)


def _overlaps_retained(c: ShapeletCandidate, kept: list[ShapeletCandidate], threshold: float) -> bool:
    for other in kept:
        if other.source_index != c.source_index:
            continue
        shorter = min(c.interval.length, other.interval.length)
        if c.interval.overlap(other.interval) > threshold * shorter:
            return True
    return False


def _select(ranked: list[ShapeletCandidate], cfg: RstConfig, labels: np.ndarray) -> list[ShapeletCandidate]:
    quota = {int(l): cfg.n_keep // labels.size for l in labels} if cfg.per_class_quota else {}
    kept: list[ShapeletCandidate] = []
    # first pass fills per-class quotas, second pass tops up by global rank
    for use_quota in (True, False):
        for c in ranked:
            if len(kept) >= cfg.n_keep:
                break
            if any(c is k for k in kept):
                continue
            if use_quota and quota.get(c.class_label, 0) <= 0:
                continue
            if _overlaps_retained(c, kept, cfg.overlap_threshold):
                continue
            kept.append(c)
            if use_quota:
                quota[c.class_label] -= 1
    return sorted(kept, key=_rank_key)


def score_candidate(d: Dataset, source: int, length: int, start: int, z_normalize: bool = False) -> ShapeletCandidate:
    iv = Interval(start, length)
    values = d.X[source, start:start + length].copy()
    dists = min_distances_to_all(values, d.X, z_normalize)
    ig, thr = information_gain(dists, d.y)
    return ShapeletCandidate(source, int(d.y[source]), iv, values, ig, thr)


def extract_top_shapelets(d: Dataset, cfg: RstConfig = RstConfig()) -> list[ShapeletCandidate]:
    """Randomly sample candidates, score each against every instance, keep the top ``n_keep``.

    Candidates overlapping an already retained, better candidate from the
    same source series by more than ``overlap_threshold`` of the shorter
    length are dropped. With ``per_class_quota`` each class is first given
    ``n_keep // K`` slots so that every class keeps shapelets of its own.
    """
    if d.labels.size < 2:
        raise UsageError("shapelet extraction needs at least two classes")
    lengths = cfg.resolved_lengths(d.series_length)
    rng = np.random.default_rng(cfg.seed)
    positions = _sample_positions(rng, len(d), d.series_length, lengths, cfg.max_candidates)

    deadline = None if cfg.time_budget is None else time.monotonic() + cfg.time_budget
    scored: list[ShapeletCandidate] = []
    chunk = 32
    with ThreadPoolExecutor(max_workers=max(1, cfg.n_jobs)) as pool:
        for lo in range(0, len(positions), chunk):
            if deadline is not None and time.monotonic() > deadline:
                break
            batch = positions[lo:lo + chunk]
            scored.extend(pool.map(lambda p: score_candidate(d, *p, z_normalize=cfg.z_normalize), batch))
    ranked = sorted(scored, key=_rank_key)
    return _select(ranked, cfg, d.labels)
