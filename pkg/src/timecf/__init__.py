"""Shapelet- and GAN-based counterfactual explanations for univariate time series classifiers."""

from .core import (
    Dataset,
    Interval,
    LabeledInstance,
    Predictor,
    TimeSeries,
    crop,
    hamming_distance,
    l1_distance,
    replace_segment,
)
from .cfgen import CounterfactualResult, ExplainConfig, ExplanationReport, NoCounterfactual, TimeCF, explain

__version__ = "0.1.0"
