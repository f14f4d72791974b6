"""Benchmark harness: explain every test instance per (classifier, method) and aggregate metrics."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..cfgen import METHODS, ExplainConfig, TimeCF
from ..classifiers import make_classifier
from ..core import Dataset, InputError, Predictor
from ..ingest import SyntheticSpec, synthetic_train_test
from ..timegan import TimeGanConfig
from .iforest import IsolationForest, fit_iforest
from .metrics import closeness, plausibility, sensibility, sparsity

log = logging.getLogger(__name__)

METRICS = ("closeness", "sensibility", "plausibility", "sparsity")

# Shorter schedule with a larger step so two GANs fit the desk-scale time budget.
BENCHMARK_TIMEGAN = TimeGanConfig(iters_embed=200, iters_supervised=200, iters_joint=500,
                                  batch_size=32, lr=1e-2, generator_steps=1)
BENCHMARK_CONFIG = ExplainConfig(timegan=BENCHMARK_TIMEGAN)


@dataclass
class CellMetrics:
    dataset: str
    classifier: str
    method: str
    n_instances: int = 0
    n_explained: int = 0
    sensibility: float | None = None
    closeness: float | None = None
    closeness_per_step: float | None = None
    sparsity: float | None = None
    plausibility: float | None = None
    error: str | None = None
    instances: list[dict] = field(default_factory=list)
    runtime_s: float = 0.0

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = asdict(self)
        if not include_runtime:
            d.pop("runtime_s")
        return d


def _mean(values: Sequence[float]) -> float | None:
    # fsum keeps the mean independent of instance order
    return math.fsum(values) / len(values) if values else None


@dataclass
class MetricsReport:
    dataset: str
    cells: list[CellMetrics]
    config: dict = field(default_factory=dict)

    def cell(self, classifier: str, method: str) -> CellMetrics:
        for c in self.cells:
            if c.classifier == classifier and c.method == method:
                return c
        raise KeyError((classifier, method))

    def to_dict(self, include_runtime: bool = False) -> dict:
        return {"dataset": self.dataset, "config": self.config,
                "cells": [c.to_dict(include_runtime) for c in self.cells]}

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True)

    def to_table(self) -> str:
        header = ["dataset", "classifier", "method", "explained", "sensibility", "closeness",
                  "closeness/step", "sparsity%", "plausibility"]

        def fmt(v, spec=".4f"):
            return "-" if v is None else format(v, spec)

        rows = [[c.dataset, c.classifier, c.method, f"{c.n_explained}/{c.n_instances}", fmt(c.sensibility),
                 fmt(c.closeness), fmt(c.closeness_per_step), fmt(c.sparsity, ".2f"), fmt(c.plausibility)]
                for c in self.cells]
        widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
        lines = ["  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip() for r in [header] + rows]
        return "\n".join(lines) + "\n"

    def metric_csv(self, metric: str) -> str:
        if metric not in METRICS:
            raise InputError(f"unknown metric {metric!r}")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["dataset", "classifier", "method", "value"])
        for c in self.cells:
            value = getattr(c, metric)
            writer.writerow([c.dataset, c.classifier, c.method, "" if value is None else repr(value)])
        return buf.getvalue()

    def write_csvs(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        paths = []
        for metric in METRICS:
            path = out_dir / f"{metric}.csv"
            path.write_text(self.metric_csv(metric), encoding="utf-8", newline="")
            paths.append(path)
        return paths


def _run_cell(name: str, clf_name: str, method: str, explainer: TimeCF, test: Dataset,
              forest: IsolationForest, eps: float) -> CellMetrics:
    cell = CellMetrics(name, clf_name, method, n_instances=len(test))
    start = time.perf_counter()
    explained, close, sparse, cfs = [], [], [], []
    for i in range(len(test)):
        t = test.series(i)
        # the label being explained is the classifier's own decision
        l = int(explainer.f.predict(t))
        report = explainer.explain(t, l) if method == "timecf" else explainer.explain_nun(t, l)
        record = {"index": i, "label": int(test.y[i]), "predicted": l, "explained": report.explained}
        explained.append(report.explained)
        if report.explained:
            cf = report.recommended.counterfactual
            record["closeness"] = closeness(t, cf)
            record["sparsity"] = sparsity(t, cf, eps)
            record["interval"] = [report.recommended.interval.start, report.recommended.interval.length]
            close.append(record["closeness"])
            sparse.append(record["sparsity"])
            cfs.append(cf)
        cell.instances.append(record)
    cell.n_explained = sum(explained)
    cell.sensibility = sensibility(explained)
    cell.closeness = _mean(close)
    cell.closeness_per_step = None if cell.closeness is None else cell.closeness / test.series_length
    cell.sparsity = _mean(sparse)
    cell.plausibility = plausibility(cfs, forest) if cfs else None
    if cfs:
        flags = forest.is_outlier(np.stack([c.values for c in cfs]))
        for record, flag in zip((r for r in cell.instances if r["explained"]), flags):
            record["outlier"] = bool(flag)
    cell.runtime_s = time.perf_counter() - start
    return cell


def run_benchmark(name: str, train: Dataset, test: Dataset, classifiers: Mapping[str, Predictor],
                  methods: Sequence[str] = METHODS, config: ExplainConfig = ExplainConfig(),
                  forest: IsolationForest | None = None, echo: dict | None = None,
                  gan_cache: dict | None = None, shapelets=None) -> MetricsReport:
    """Explain every test instance for each classifier and method.

    Shapelets and per-label GANs are shared by all classifiers, since neither
    depends on the model being explained. Pass ``gan_cache`` (a dict, filled
    in place) or ``shapelets`` to reuse them beyond this call. A failing cell
    records its error and the run continues.
    """
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    forest = forest or fit_iforest(train, seed=config.seed)
    gan_cache = {} if gan_cache is None else gan_cache
    cells = []
    for clf_name, f in classifiers.items():
        explainer = TimeCF(train, f, config, shapelets=shapelets, gan_cache=gan_cache)
        if shapelets is None and "timecf" in methods:
            shapelets = explainer.shapelets
        for method in methods:
            try:
                cells.append(_run_cell(name, clf_name, method, explainer, test, forest, config.eps))
            except Exception as exc:  # recorded per cell, never aborts the run
                log.exception("benchmark cell %s/%s failed", clf_name, method)
                cells.append(CellMetrics(name, clf_name, method, n_instances=len(test),
                                         error=f"{type(exc).__name__}: {exc}"))
    return MetricsReport(name, cells, config=echo if echo is not None else config.to_dict())


def bump_benchmark(config: ExplainConfig = BENCHMARK_CONFIG, spec: SyntheticSpec = SyntheticSpec(),
                   classifiers: Sequence[str] = ("1nn", "cnn"), methods: Sequence[str] = METHODS,
                   echo: dict | None = None) -> MetricsReport:
    """The synthetic bump benchmark: 30+30 train, 10+10 test, every classifier and method."""
    train, test = synthetic_train_test(spec)
    models = {kind: make_classifier(kind, train, seed=config.seed) for kind in classifiers}
    return run_benchmark("synthetic-bump", train, test, models, methods, config, echo=echo)
