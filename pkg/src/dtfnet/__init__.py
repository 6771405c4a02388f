"""Dynamic trend filtering: classical filters and an RL trend-point labeller."""

from ._kernels import BACKEND
from .core import DataError, DtfError, LabeledSeries, NumericalError, RunConfig, Rng
from .synth import SynthSpec, generate_synthetic
from .filters import haar_denoise, hp_filter, l1_filter, median_filter, moving_average
from .eval import TrendMetrics, comparison_table, trend_metrics, tsf_experiment

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataError",
    "DtfError",
    "LabeledSeries",
    "NumericalError",
    "RunConfig",
    "Rng",
    "SynthSpec",
    "TrendMetrics",
    "comparison_table",
    "generate_synthetic",
    "haar_denoise",
    "hp_filter",
    "l1_filter",
    "median_filter",
    "moving_average",
    "trend_metrics",
    "tsf_experiment",
]
