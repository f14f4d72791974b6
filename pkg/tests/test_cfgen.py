import json
from dataclasses import replace

import numpy as np
import pytest

from timecf import cfgen
from timecf.cfgen import (
    CounterfactualResult, ExplainConfig, NoCounterfactual, TimeCF, generate_counterfactuals,
    nun_baseline, recommend,
)
from timecf.classifiers import ConstantClassifier, fit_1nn
from timecf.core import Dataset, InputError, Interval, TimeSeries, UsageError, hamming_distance
from timecf.eval import sparsity
from timecf.ingest import SyntheticSpec, bump_profile, make_synthetic_bump
from timecf.shapelets import RstConfig, ShapeletCandidate
from timecf.timegan import TimeGanConfig

SPEC = SyntheticSpec(n_per_class=10, noise_sigma=0.0, seed=1)
TINY_GAN = TimeGanConfig(iters_embed=3, iters_supervised=3, iters_joint=2, batch_size=4, hidden_dim=4)


@pytest.fixture(scope="module")
def clean():
    return make_synthetic_bump(SPEC)


def bump_shapelet(d, label):
    src = int(np.flatnonzero(d.y == label)[0])
    iv = SPEC.bump_interval
    return ShapeletCandidate(src, label, iv, d.X[src, iv.start:iv.stop].copy(), 1.0, 0.5)


def test_constant_classifier_yields_nothing(clean):
    t = clean.series(15)
    out = generate_counterfactuals(t, 1, [bump_shapelet(clean, 1)], clean.X[:5], ConstantClassifier(1))
    assert out == []


def test_removing_bump_flips_1nn(clean):
    f = fit_1nn(clean)
    t = TimeSeries(clean.X[15])
    fake = clean.X[0]
    out = generate_counterfactuals(t, 1, [bump_shapelet(clean, 1)], [fake], f)
    assert len(out) == 1
    r = out[0]
    assert r.predicted_label == 0 and f.predict(r.counterfactual) == 0
    iv = SPEC.bump_interval
    assert np.array_equal(r.counterfactual.values[iv.start:iv.stop], fake[iv.start:iv.stop])
    assert r.hamming == hamming_distance(t, r.counterfactual)


def test_only_same_class_shapelets_are_used(clean):
    f = fit_1nn(clean)
    t = TimeSeries(clean.X[15])
    outcomes = []
    out = generate_counterfactuals(t, 1, [bump_shapelet(clean, 0)], [clean.X[0]], f, outcomes=outcomes)
    assert out == []
    assert outcomes == [{"shapelet": bump_shapelet(clean, 0).key, "class_label": 0, "used": False,
                         "tried": 0, "flipped": 0}]


def test_generate_validates_lengths(clean):
    f = fit_1nn(clean)
    with pytest.raises(InputError):
        generate_counterfactuals(clean.series(0), 0, [bump_shapelet(clean, 0)], np.zeros((2, 50)), f)


def _result(h, l1, start, fake, n=20):
    return CounterfactualResult(None, 0, TimeSeries(np.zeros(n)), 1, Interval(start, 2), "s", fake, h, l1)


def test_recommend_examples():
    only = _result(3, 1.0, 0, 0)
    assert recommend([only]) is only
    a, b = _result(10, 9.0, 0, 0), _result(30, 1.0, 0, 1)
    assert recommend([b, a]) is a
    with pytest.raises(NoCounterfactual):
        recommend([])


def test_recommend_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pool = [_result(int(rng.integers(0, 4)), float(rng.integers(0, 3)), int(rng.integers(0, 5)), k)
                for k in range(int(rng.integers(1, 12)))]
        best = pool[0]
        for r in pool[1:]:
            if (r.hamming, r.l1, r.interval.start, r.fake_index) < (best.hamming, best.l1, best.interval.start,
                                                                    best.fake_index):
                best = r
        assert recommend(pool) is best


def test_recommend_recomputes_against_target():
    t = np.zeros(6)
    near = CounterfactualResult(None, 0, TimeSeries([0, 0, 0, 0, 0, 1.0]), 1, Interval(5, 1), "a", 0, 99, 99.0)
    far = CounterfactualResult(None, 0, TimeSeries([1.0, 1, 0, 0, 0, 0]), 1, Interval(0, 2), "b", 1, 0, 0.0)
    assert recommend([near, far]) is far
    assert recommend([near, far], t) is near


def test_nun_baseline(clean):
    f = fit_1nn(clean)
    t = clean.series(3)
    r = nun_baseline(t, 0, clean, f)
    assert r is not None and r.method == "nun"
    assert r.interval == Interval(0, clean.series_length)
    assert f.predict(r.counterfactual) == 1
    assert nun_baseline(t, 0, clean, ConstantClassifier(0)) is None
    with pytest.raises(UsageError):
        nun_baseline(t, 0, clean.subset(clean.y == 0), f)


def test_nun_sparsity_near_zero():
    d = make_synthetic_bump(SyntheticSpec(n_per_class=10, noise_sigma=0.1, seed=2))
    f = fit_1nn(d)
    r = nun_baseline(d.series(0), 0, d, f)
    assert sparsity(d.X[0], r.counterfactual) <= 5.0


@pytest.fixture
def noisy():
    return make_synthetic_bump(SyntheticSpec(n_per_class=8, length=40, bump_interval=Interval(15, 10),
                                             noise_sigma=0.05, seed=4))


def test_explain_trains_gan_only_on_other_labels(monkeypatch, noisy):
    seen = []
    real_train = cfgen.train_timegan

    def spy(data, cfg, scaler=None):
        seen.append(np.array(data))
        return real_train(data, cfg, scaler)

    monkeypatch.setattr(cfgen, "train_timegan", spy)
    cfg = ExplainConfig(m_fakes=4, timegan=TINY_GAN, rst=RstConfig(max_candidates=40, n_keep=6))
    ex = TimeCF(noisy, fit_1nn(noisy), cfg)
    ex.explain(noisy.series(0), 0)
    scaled_others = ex.scaler.transform(noisy.X[noisy.y != 0])
    assert len(seen) == 1 and np.array_equal(seen[0], scaled_others)
    ex.explain(noisy.series(1), 0)
    assert len(seen) == 1  # cached
    literal = TimeCF(noisy, fit_1nn(noisy), replace(cfg, cache_gan=False))
    literal.explain(noisy.series(0), 0)
    literal.explain(noisy.series(1), 0)
    assert len(seen) == 3


def test_explain_report_properties(noisy):
    cfg = ExplainConfig(m_fakes=6, timegan=TINY_GAN, rst=RstConfig(max_candidates=60, n_keep=8))
    f = fit_1nn(noisy)
    ex = TimeCF(noisy, f, cfg)
    for i in (0, 12):
        t, l = noisy.series(i), int(noisy.y[i])
        report = ex.explain(t, l)
        for r in report.results:
            assert f.predict(r.counterfactual) != l
            assert hamming_distance(t, r.counterfactual, 0.0) <= r.interval.length
            outside = np.ones(len(t), dtype=bool)
            outside[r.interval.start:r.interval.stop] = False
            assert np.array_equal(r.counterfactual.values[outside], t.values[outside])
        if report.recommended is not None:
            assert all(report.recommended.hamming <= r.hamming for r in report.results)
        blob = json.dumps(report.to_dict())
        again = TimeCF(noisy, f, cfg).explain(t, l)
        assert json.dumps(again.to_dict()) == blob


def test_explain_requires_other_label(noisy):
    only0 = noisy.subset(noisy.y == 0)
    ex = TimeCF(Dataset(only0.X, only0.y), ConstantClassifier(0), ExplainConfig(timegan=TINY_GAN))
    with pytest.raises(UsageError):
        ex.explain(only0.series(0), 0)


def test_empty_result_is_reported_not_raised(noisy):
    cfg = ExplainConfig(m_fakes=3, timegan=TINY_GAN, rst=RstConfig(max_candidates=30, n_keep=4))
    report = TimeCF(noisy, ConstantClassifier(0), cfg).explain(noisy.series(0), 0)
    assert report.results == [] and report.recommended is None and not report.explained
    assert report.to_dict()["recommended"] is None
