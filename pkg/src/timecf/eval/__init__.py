"""Explanation quality metrics and the benchmark harness."""

from .benchmark import (
    BENCHMARK_CONFIG, BENCHMARK_TIMEGAN, METRICS, CellMetrics, MetricsReport, bump_benchmark, run_benchmark,
)
from .iforest import IsolationForest, average_path_length, fit_iforest, score_from_path_length
from .metrics import closeness, plausibility, sensibility, sparsity

__all__ = [
    "BENCHMARK_CONFIG", "BENCHMARK_TIMEGAN", "METRICS", "CellMetrics", "bump_benchmark", "IsolationForest", "MetricsReport", "average_path_length", "closeness",
    "fit_iforest", "plausibility", "run_benchmark", "score_from_path_length", "sensibility", "sparsity",
]
