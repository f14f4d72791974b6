"""Shared domain types, the classifier contract and elementary series operations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence, runtime_checkable

import numpy as np

DEFAULT_EPS = 1e-8
MIN_LENGTH = 4


class TimeCFError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TimeCFError, ValueError):
    """Malformed or incompatible arguments (length mismatch, bad interval...)."""


class ParseError(TimeCFError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UsageError(TimeCFError):
    """An operation was called in a state or on data it does not support."""


class TrainingError(TimeCFError):
    def __init__(self, message: str, phase: str | None = None):
        self.phase = phase
        super().__init__(message if phase is None else f"[{phase}] {message}")


class FitError(TimeCFError):
    pass


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A fixed-length univariate real-valued sequence.

    The underlying array is copied on construction and marked read-only, so a
    ``TimeSeries`` can be shared freely.
    """

    values: np.ndarray
    id: str | None = None

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 1:
            raise InputError(f"time series must be one-dimensional, got shape {arr.shape}")
        if arr.size < MIN_LENGTH:
            raise InputError(f"time series needs at least {MIN_LENGTH} points, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise InputError("time series contains non-finite values")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class LabeledInstance:
    series: TimeSeries
    label: int


@dataclass(frozen=True)
class Interval:
    start: int
    length: int

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise InputError(f"invalid interval start={self.start} length={self.length}")

    @property
    def stop(self) -> int:
        return self.start + self.length

    def fits(self, n: int) -> bool:
        return self.stop <= n

    def overlap(self, other: "Interval") -> int:
        return max(0, min(self.stop, other.stop) - max(self.start, other.start))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Equal-length labelled univariate series.

    ``X`` has shape ``(n_instances, series_length)``; ``y`` holds labels
    normalized to ``0..K-1``. ``raw_labels`` maps each normalized label back
    to the token used in the source file.
    """

    X: np.ndarray
    y: np.ndarray
    raw_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = _frozen(self.X)
        y = np.array(self.y, dtype=np.int64, copy=True)
        y.setflags(write=False)
        if X.ndim != 2 or X.shape[0] == 0:
            raise InputError("dataset must be a non-empty 2-D array of series")
        if X.shape[1] < MIN_LENGTH:
            raise InputError(f"series length must be at least {MIN_LENGTH}")
        if y.shape != (X.shape[0],):
            raise InputError("one label per instance required")
        if np.any(y < 0):
            raise InputError("labels must be non-negative")
        if not np.all(np.isfinite(X)):
            raise InputError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.raw_labels:
            object.__setattr__(self, "raw_labels", tuple(str(k) for k in range(int(y.max()) + 1)))

    @classmethod
    def from_instances(cls, instances: Sequence[LabeledInstance], raw_labels=()) -> "Dataset":
        if not instances:
            raise InputError("no instances")
        lengths = {len(inst.series) for inst in instances}
        if len(lengths) != 1:
            raise InputError(f"ragged dataset, lengths {sorted(lengths)}")
        X = np.stack([inst.series.values for inst in instances])
        y = np.array([inst.label for inst in instances])
        return cls(X, y, tuple(raw_labels))

    @property
    def series_length(self) -> int:
        return self.X.shape[1]

    @property
    def labels(self) -> np.ndarray:
        """Sorted label alphabet present in the data."""
        return np.unique(self.y)

    @property
    def n_classes(self) -> int:
        return max(len(self.raw_labels), int(self.y.max()) + 1)

    def __len__(self) -> int:
        return self.X.shape[0]

    def series(self, i: int) -> TimeSeries:
        return TimeSeries(self.X[i], id=str(i))

    def instance(self, i: int) -> LabeledInstance:
        return LabeledInstance(self.series(i), int(self.y[i]))

    def __iter__(self) -> Iterator[LabeledInstance]:
        return (self.instance(i) for i in range(len(self)))

    def subset(self, mask_or_idx) -> "Dataset":
        return Dataset(self.X[mask_or_idx], self.y[mask_or_idx], self.raw_labels)

    def without_label(self, label: int) -> "Dataset":
        keep = self.y != label
        if not keep.any():
            raise UsageError(f"no instances with a label other than {label}")
        return self.subset(keep)


@runtime_checkable
class Predictor(Protocol):
    """Black-box classifier contract: deterministic, side-effect free predictions.

    Implementations may additionally offer ``predict_many(X) -> labels`` for
    batched evaluation; callers fall back to looping over :meth:`predict`.
    """

    def predict(self, t: TimeSeries) -> int: ...


def predict_many(f: Predictor, X: np.ndarray) -> np.ndarray:
    batched = getattr(f, "predict_many", None)
    if batched is not None:
        return np.asarray(batched(X), dtype=np.int64)
    return np.array([f.predict(TimeSeries(row)) for row in X], dtype=np.int64)


def as_array(t) -> np.ndarray:
    if isinstance(t, TimeSeries):
        return t.values
    return np.asarray(t, dtype=np.float64)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def l1_distance(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.abs(a - b).sum())


def hamming_distance(a, b, eps: float = DEFAULT_EPS) -> int:
    """Number of positions where the two series differ by more than ``eps``."""
    if eps < 0:
        raise InputError("eps must be non-negative")
    a, b = _pair(a, b)
    return int(np.count_nonzero(np.abs(a - b) > eps))


def _check_interval(n: int, iv: Interval) -> None:
    if not iv.fits(n):
        raise InputError(f"interval [{iv.start}, {iv.stop}) exceeds series length {n}")


def crop(t, iv: Interval) -> np.ndarray:
    values = as_array(t)
    _check_interval(values.size, iv)
    return values[iv.start:iv.stop].copy()


def replace_segment(t, seg, iv: Interval) -> TimeSeries:
    values = as_array(t)
    seg = np.asarray(seg, dtype=np.float64)
    _check_interval(values.size, iv)
    if seg.shape != (iv.length,):
        raise InputError(f"segment length {seg.size} does not match interval length {iv.length}")
    out = values.copy()
    out[iv.start:iv.stop] = seg
    return TimeSeries(out, id=getattr(t, "id", None))
