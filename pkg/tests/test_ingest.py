import numpy as np
import pytest

from timecf.core import FitError, InputError, Interval, ParseError, UsageError
from timecf.ingest import (
    MinMaxScaler, SyntheticSpec, format_ucr, make_synthetic_bump, parse_ucr_file, parse_ucr_text,
    stratified_split, synthetic_train_test, write_ucr_file,
)


def test_parse_two_rows_tab():
    d = parse_ucr_text("1\t0.1\t0.2\t0.3\t0.4\n2\t0.3\t0.4\t0.5\t0.6\n")
    assert len(d) == 2 and d.series_length == 4
    assert list(d.y) == [0, 1]
    assert d.X[1, 0] == 0.3


def test_parse_comma_and_float_labels():
    d = parse_ucr_text("-1.0000,1,2,3,4\n1.0000,5,6,7,8\n-1,0,0,0,0\n")
    assert list(d.y) == [0, 1, 0]
    assert d.raw_labels == ("-1", "1")


def test_parse_ragged_rows_names_line():
    with pytest.raises(ParseError, match="line 2"):
        parse_ucr_text("1\t1\t2\t3\t4\n2\t1\t2\t3\n")


def test_parse_non_numeric_and_empty():
    with pytest.raises(ParseError, match="line 1"):
        parse_ucr_text("1\ta\t2\t3\t4\n")
    with pytest.raises(ParseError):
        parse_ucr_text("\n\n")


def test_ucr_roundtrip(tmp_path):
    d = make_synthetic_bump(SyntheticSpec(n_per_class=5, seed=3))
    path = tmp_path / "d.tsv"
    write_ucr_file(d, path)
    back = parse_ucr_file(path)
    assert np.abs(back.X - d.X).max() < 1e-12
    assert np.array_equal(back.y, d.y)
    comma = parse_ucr_text(format_ucr(d, ","))
    assert np.array_equal(comma.X, d.X)


def test_ecg200_if_present():
    import os
    path = os.environ.get("TIMECF_ECG200_TRAIN")
    if not path:
        pytest.skip("set TIMECF_ECG200_TRAIN to the ECG200 train file to run")
    d = parse_ucr_file(path)
    assert len(d) == 100 and d.series_length == 96


def test_synthetic_degenerate_symmetry():
    d = make_synthetic_bump(SyntheticSpec(n_per_class=3, noise_sigma=0.0, bump_height=0.0))
    assert np.array_equal(d.X[d.y == 0], d.X[d.y == 1])


def test_synthetic_classes_differ_only_in_bump():
    spec = SyntheticSpec(n_per_class=4, noise_sigma=0.0, bump_interval=Interval(30, 25))
    d = make_synthetic_bump(spec)
    diff = d.X[d.y == 1].mean(0) - d.X[d.y == 0].mean(0)
    outside = np.ones(spec.length, dtype=bool)
    outside[30:55] = False
    assert np.all(diff[outside] == 0.0)
    assert np.all(diff[~outside] > 0.0)


def test_synthetic_deterministic():
    spec = SyntheticSpec(seed=42)
    assert np.array_equal(make_synthetic_bump(spec).X, make_synthetic_bump(spec).X)
    assert not np.array_equal(make_synthetic_bump(spec).X, make_synthetic_bump(SyntheticSpec(seed=43)).X)


def test_synthetic_spec_validation():
    with pytest.raises(InputError):
        SyntheticSpec(length=50, bump_interval=Interval(40, 20))


def test_scaler_examples():
    s = MinMaxScaler.fit(np.arange(11.0).reshape(1, -1))
    assert s.transform(5.0) == 0.5
    assert s.transform(20.0) == pytest.approx((20 - 0) / 10)
    assert s.transform(20.0) > 1
    x = np.random.default_rng(0).uniform(0, 10, 100)
    assert np.abs(s.inverse_transform(s.transform(x)) - x).max() < 1e-12


def test_scaler_constant_data():
    with pytest.raises(FitError):
        MinMaxScaler.fit(np.ones((3, 5)))


def test_scaler_roundtrip_on_fitted_data():
    d = make_synthetic_bump(SyntheticSpec(n_per_class=10))
    s = MinMaxScaler.fit(d)
    scaled = s.transform(d.X)
    assert scaled.min() == 0.0 and scaled.max() == 1.0
    assert np.abs(s.inverse_transform(scaled) - d.X).max() < 1e-12


def test_stratified_split_counts_partition_determinism():
    d = make_synthetic_bump(SyntheticSpec(n_per_class=30))
    train, test = stratified_split(d, 0.5, seed=1)
    assert np.bincount(train.y).tolist() == [15, 15]
    assert np.bincount(test.y).tolist() == [15, 15]
    union = np.concatenate([train.X, test.X])
    assert sorted(map(tuple, union)) == sorted(map(tuple, d.X))
    again = stratified_split(d, 0.5, seed=1)
    assert np.array_equal(again[0].X, train.X) and np.array_equal(again[1].X, test.X)


def test_stratified_split_errors():
    d = make_synthetic_bump(SyntheticSpec(n_per_class=1))
    with pytest.raises(UsageError):
        stratified_split(d, 0.5)
    with pytest.raises(InputError):
        stratified_split(d, 1.0)


def test_default_benchmark_sizes():
    train, test = synthetic_train_test()
    assert np.bincount(train.y).tolist() == [30, 30]
    assert np.bincount(test.y).tolist() == [10, 10]
