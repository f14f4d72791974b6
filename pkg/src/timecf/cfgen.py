"""Counterfactual search: splice GAN-generated segments into shapelet intervals of the target.

For a target ``t`` with label ``l`` a TimeGAN is trained on every training
instance whose label differs from ``l``. For each shapelet of class ``l``,
the same interval is cropped from each fake and written over ``t``. A
spliced series counts as a counterfactual when the classifier no longer
predicts ``l``. The recommended counterfactual has the fewest altered points.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_EPS, Dataset, InputError, Interval, Predictor, TimeCFError, TimeSeries, UsageError,
    as_array, hamming_distance, l1_distance, predict_many,
)
from .ingest import MinMaxScaler
from .shapelets import RstConfig, ShapeletCandidate, extract_top_shapelets
from .timegan import TimeGanConfig, TimeGanModel, sample_fakes, train_timegan

log = logging.getLogger(__name__)

METHODS = ("timecf", "nun")


class NoCounterfactual(TimeCFError):
    """No candidate flipped the classifier; counted as a miss by the sensibility metric."""


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    original_id: str | None
    original_label: int
    counterfactual: TimeSeries
    predicted_label: int
    interval: Interval
    shapelet_ref: str
    fake_index: int
    hamming: int
    l1: float
    method: str = "timecf"

    def to_dict(self) -> dict:
        return {
            "original_id": self.original_id,
            "original_label": self.original_label,
            "predicted_label": self.predicted_label,
            "method": self.method,
            "interval": {"start": self.interval.start, "length": self.interval.length},
            "shapelet": self.shapelet_ref,
            "fake_index": self.fake_index,
            "hamming": self.hamming,
            "l1": self.l1,
            "counterfactual": [float(v) for v in self.counterfactual.values],
        }


def _recommend_key(r: CounterfactualResult):
    return (r.hamming, r.l1, r.interval.start, r.fake_index)


def recommend(c: Sequence[CounterfactualResult], t=None) -> CounterfactualResult:
    """Fewest altered points; ties by smaller L1, then earlier interval start, then fake index.

    When ``t`` is given the distances are recomputed against it instead of
    trusting the cached values.
    """
    if not c:
        raise NoCounterfactual("no counterfactual to recommend")
    if t is None:
        return min(c, key=_recommend_key)
    ref = as_array(t)

    def key(r):
        return (hamming_distance(ref, r.counterfactual), l1_distance(ref, r.counterfactual),
                r.interval.start, r.fake_index)

    return min(c, key=key)


def _fake_matrix(fakes, n: int) -> np.ndarray:
    F = np.stack([as_array(f) for f in fakes]) if len(fakes) else np.empty((0, n))
    if F.ndim != 2 or F.shape[1] != n:
        raise InputError(f"fakes must have length {n}")
    return F


def generate_counterfactuals(t: TimeSeries, l: int, shapelets: Sequence[ShapeletCandidate], fakes,
                             f: Predictor, eps: float = DEFAULT_EPS,
                             outcomes: list | None = None) -> list[CounterfactualResult]:
    """Try every (class-``l`` shapelet, fake) splice and keep all that flip ``f``.

    ``outcomes``, when given, receives one dict per shapelet with the number
    of splices tried and flipped.
    """
    values = as_array(t)
    n = values.size
    F = _fake_matrix(fakes, n)
    for s in shapelets:
        if not s.interval.fits(n):
            raise InputError(f"shapelet {s.key} does not fit a series of length {n}")
    results = []
    for s in shapelets:
        iv = s.interval
        if s.class_label != l:
            if outcomes is not None:
                outcomes.append({"shapelet": s.key, "class_label": s.class_label, "used": False,
                                 "tried": 0, "flipped": 0})
            continue
        spliced = np.tile(values, (len(F), 1))
        spliced[:, iv.start:iv.stop] = F[:, iv.start:iv.stop]
        preds = predict_many(f, spliced) if len(F) else np.empty(0, dtype=np.int64)
        flipped = 0
        for j in np.flatnonzero(preds != l):
            cf = TimeSeries(spliced[j], id=t.id)
            label = int(f.predict(cf))
            if label == l:
                continue
            flipped += 1
            results.append(CounterfactualResult(
                original_id=t.id, original_label=int(l), counterfactual=cf, predicted_label=label,
                interval=iv, shapelet_ref=s.key, fake_index=int(j),
                hamming=hamming_distance(values, cf, eps), l1=l1_distance(values, cf)))
        if outcomes is not None:
            outcomes.append({"shapelet": s.key, "class_label": s.class_label, "used": True,
                             "tried": int(len(F)), "flipped": flipped})
    return results


def nun_baseline(t: TimeSeries, l: int, train: Dataset, f: Predictor,
                 eps: float = DEFAULT_EPS) -> CounterfactualResult | None:
    """Nearest training series of another label, if ``f`` assigns it a label other than ``l``."""
    values = as_array(t)
    others = np.flatnonzero(train.y != l)
    if others.size == 0:
        raise UsageError(f"training data has no label other than {l}")
    if train.series_length != values.size:
        raise InputError("target length differs from training data")
    d2 = ((train.X[others] - values) ** 2).sum(axis=1)
    idx = int(others[np.argmin(d2)])
    cf = TimeSeries(train.X[idx], id=t.id)
    label = int(f.predict(cf))
    if label == l:
        return None
    return CounterfactualResult(
        original_id=t.id, original_label=int(l), counterfactual=cf, predicted_label=label,
        interval=Interval(0, values.size), shapelet_ref=f"nun:{idx}", fake_index=-1,
        hamming=hamming_distance(values, cf, eps), l1=l1_distance(values, cf), method="nun")


@dataclass(frozen=True)
class ExplainConfig:
    m_fakes: int = 50
    eps: float = DEFAULT_EPS
    seed: int = 0
    cache_gan: bool = True
    rst: RstConfig = RstConfig()
    timegan: TimeGanConfig = TimeGanConfig()

    def __post_init__(self):
        if self.m_fakes < 1:
            raise InputError("m_fakes must be >= 1")
        if self.eps < 0:
            raise InputError("eps must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(eq=False)
class ExplanationReport:
    original: TimeSeries
    original_label: int
    method: str
    results: list[CounterfactualResult]
    recommended: CounterfactualResult | None
    candidate_outcomes: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    runtime: dict[str, float] = field(default_factory=dict)

    @property
    def explained(self) -> bool:
        return self.recommended is not None

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {
            "original_id": self.original.id,
            "original_label": self.original_label,
            "method": self.method,
            "explained": self.explained,
            "original": [float(v) for v in self.original.values],
            "recommended": None if self.recommended is None else self.recommended.to_dict(),
            "n_counterfactuals": len(self.results),
            "counterfactuals": [r.to_dict() for r in self.results],
            "candidate_outcomes": self.candidate_outcomes,
            "config": self.config,
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out


class TimeCF:
    """Reusable explainer bound to a training split and a classifier.

    Shapelets are extracted once. A TimeGAN (and its fakes) is cached per
    excluded label, since every target with the same label trains on the
    same subset. ``config.cache_gan=False`` retrains for every call.
    """

    def __init__(self, train: Dataset, f: Predictor, config: ExplainConfig = ExplainConfig(),
                 shapelets: Sequence[ShapeletCandidate] | None = None,
                 gan_cache: dict | None = None):
        self.train = train
        self.f = f
        self.config = config
        self.scaler = MinMaxScaler.fit(train)
        self._shapelets = list(shapelets) if shapelets is not None else None
        self.gan_cache = gan_cache if gan_cache is not None else {}

    @property
    def shapelets(self) -> list[ShapeletCandidate]:
        if self._shapelets is None:
            self._shapelets = extract_top_shapelets(self.train, self.config.rst)
        return self._shapelets

    def gan_for(self, label: int) -> tuple[TimeGanModel, np.ndarray]:
        """Trained GAN on all instances not labelled ``label`` plus its fakes in original scale."""
        cfg = self.config
        if cfg.cache_gan and label in self.gan_cache:
            return self.gan_cache[label]
        subset = self.train.without_label(label)
        gan_cfg = dataclasses.replace(cfg.timegan, seed=cfg.timegan.seed + 7919 * int(label))
        model = train_timegan(self.scaler.transform(subset.X), gan_cfg, self.scaler)
        scaled = np.stack([s.values for s in sample_fakes(model, cfg.m_fakes, self.train.series_length,
                                                          seed=cfg.seed + int(label))])
        entry = (model, self.scaler.inverse_transform(scaled))
        if cfg.cache_gan:
            self.gan_cache[label] = entry
        return entry

    def explain(self, t: TimeSeries, l: int) -> ExplanationReport:
        if not np.any(self.train.y != l):
            raise UsageError(f"training data has no label other than {l}")
        if len(t) != self.train.series_length:
            raise InputError("target length differs from training data")
        clock = time.perf_counter()
        shapelets = self.shapelets
        t_shapelets = time.perf_counter() - clock
        clock = time.perf_counter()
        _, fakes = self.gan_for(l)
        t_gan = time.perf_counter() - clock
        clock = time.perf_counter()
        outcomes: list[dict] = []
        results = generate_counterfactuals(t, l, shapelets, fakes, self.f, self.config.eps, outcomes)
        recommended = recommend(results) if results else None
        t_search = time.perf_counter() - clock
        return ExplanationReport(
            original=t, original_label=int(l), method="timecf", results=results,
            recommended=recommended, candidate_outcomes=outcomes, config=self.config.to_dict(),
            runtime={"shapelets_s": t_shapelets, "gan_s": t_gan, "search_s": t_search})

    def explain_nun(self, t: TimeSeries, l: int) -> ExplanationReport:
        clock = time.perf_counter()
        r = nun_baseline(t, l, self.train, self.f, self.config.eps)
        return ExplanationReport(
            original=t, original_label=int(l), method="nun", results=[] if r is None else [r],
            recommended=r, config={"eps": self.config.eps},
            runtime={"search_s": time.perf_counter() - clock})


def explain(t: TimeSeries, l: int, train: Dataset, f: Predictor,
            config: ExplainConfig = ExplainConfig()) -> ExplanationReport:
    """One-shot explanation of ``t`` (label ``l``) for classifier ``f``."""
    return TimeCF(train, f, config).explain(t, l)
