"""Dataset loading (UCR text format), synthetic benchmark generation, scaling and splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, FitError, InputError, Interval, ParseError, TimeSeries, UsageError


def _label_sort_key(token: str):
    try:
        return (0, float(token), token)
    except ValueError:
        return (1, 0.0, token)


def _detect_delimiter(line: str) -> str | None:
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None  # any whitespace


def parse_ucr_text(text: str) -> Dataset:
    rows: list[list[float]] = []
    tokens: list[str] = []
    delimiter = None
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if delimiter is None and width is None:
            delimiter = _detect_delimiter(line)
        fields = [f.strip() for f in line.strip().split(delimiter)]
        if len(fields) < 2:
            raise ParseError("row has a label but no values", lineno)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"expected {width - 1} values, found {len(fields) - 1}", lineno)
        try:
            values = [float(f) for f in fields[1:]]
            float(fields[0])
        except ValueError as exc:
            raise ParseError(f"non-numeric token ({exc})", lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", lineno)
        tokens.append(_canonical_label(fields[0]))
        rows.append(values)
    if not rows:
        raise ParseError("empty file", 0)
    alphabet = sorted(set(tokens), key=_label_sort_key)
    index = {tok: k for k, tok in enumerate(alphabet)}
    try:
        return Dataset(np.array(rows), np.array([index[t] for t in tokens]), tuple(alphabet))
    except InputError as exc:
        raise ParseError(str(exc)) from None


def _canonical_label(token: str) -> str:
    # "1", "1.0" and "1.0000000e+00" all denote the same class
    value = float(token)
    return str(int(value)) if value.is_integer() else repr(value)


def parse_ucr_file(path: str | Path) -> Dataset:
    """Read a UCR-archive text file (label first, tab- or comma-separated)."""
    return parse_ucr_text(Path(path).read_text(encoding="utf-8"))


def format_ucr(d: Dataset, delimiter: str = "\t") -> str:
    lines = []
    for row, label in zip(d.X, d.y):
        lines.append(delimiter.join([d.raw_labels[label]] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def write_ucr_file(d: Dataset, path: str | Path, delimiter: str = "\t") -> None:
    Path(path).write_text(format_ucr(d, delimiter), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class SyntheticSpec:
    n_per_class: int = 40
    length: int = 100
    bump_interval: Interval = Interval(40, 20)
    bump_height: float = 2.0
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1 or self.length < 4:
            raise InputError("n_per_class must be >= 1 and length >= 4")
        if not self.bump_interval.fits(self.length):
            raise InputError("bump interval does not fit the series length")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be >= 0")


def bump_profile(spec: SyntheticSpec) -> np.ndarray:
    """Gaussian bump centred in the interval, exactly zero outside it."""
    iv = spec.bump_interval
    t = np.arange(spec.length, dtype=np.float64)
    centre = iv.start + (iv.length - 1) / 2.0
    width = max(iv.length / 6.0, 0.5)
    profile = spec.bump_height * np.exp(-0.5 * ((t - centre) / width) ** 2)
    profile[: iv.start] = 0.0
    profile[iv.stop:] = 0.0
    return profile


def make_synthetic_bump(spec: SyntheticSpec) -> Dataset:
    """Two-class sine benchmark; class 1 carries a bump inside ``spec.bump_interval``.

    Rows are ordered class 0 first, then class 1. The same seed always gives
    the same data.
    """
    rng = np.random.default_rng(spec.seed)
    n, length = spec.n_per_class, spec.length
    base = np.sin(2 * np.pi * np.arange(length) / length)
    noise = rng.normal(0.0, 1.0, size=(2 * n, length)) * spec.noise_sigma
    X = np.tile(base, (2 * n, 1)) + noise
    X[n:] += bump_profile(spec)
    y = np.repeat([0, 1], n)
    return Dataset(X, y, ("0", "1"))


@dataclass(frozen=True)
class MinMaxScaler:
    """Global affine map sending the fitted minimum to 0 and maximum to 1."""

    min_v: float
    max_v: float

    @classmethod
    def fit(cls, d: Dataset | np.ndarray) -> "MinMaxScaler":
        X = d.X if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
        lo, hi = float(X.min()), float(X.max())
        if not hi > lo:
            raise FitError("cannot fit a scaler on constant-valued data")
        return cls(lo, hi)

    def transform(self, x):
        arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
        return (arr - self.min_v) / (self.max_v - self.min_v)

    def inverse_transform(self, x):
        arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
        return arr * (self.max_v - self.min_v) + self.min_v


def fit_scaler(d: Dataset) -> MinMaxScaler:
    return MinMaxScaler.fit(d)


def stratified_split(d: Dataset, test_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Split into (train, test) keeping per-class proportions, order preserved within parts."""
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    test_idx = []
    for label in d.labels:
        members = np.flatnonzero(d.y == label)
        if members.size < 2:
            raise UsageError(f"class {label} has fewer than 2 instances, cannot split")
        n_test = min(max(int(round(members.size * test_fraction)), 1), members.size - 1)
        test_idx.extend(rng.permutation(members)[:n_test])
    is_test = np.zeros(len(d), dtype=bool)
    is_test[np.array(test_idx, dtype=np.int64)] = True
    return d.subset(~is_test), d.subset(is_test)


def synthetic_train_test(spec: SyntheticSpec = SyntheticSpec(), test_fraction: float = 0.25):
    """Default desk-scale benchmark: 40+40 instances split into 30+30 train, 10+10 test."""
    return stratified_split(make_synthetic_bump(spec), test_fraction, seed=spec.seed)
