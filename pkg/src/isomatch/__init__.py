"""Isotonic propensity score matching estimators of the average treatment effect."""

from .errors import IsomatchError
from .isotonic import IsotonicFit, evaluate_step, maxmin_oracle, pava_fit
from .matching import AteReport, EstimateOptions, estimate_ate_univariate
from .sample import Sample, floor_pow_two_thirds, load_csv, order_by_index
from .single_index import OptimizerConfig, estimate_alpha, estimate_ate_multivariate
from .uc_isotonic import endpoint_average_transform, uc_isotonic_fit

__all__ = [
    "AteReport",
    "EstimateOptions",
    "IsomatchError",
    "IsotonicFit",
    "OptimizerConfig",
    "Sample",
    "endpoint_average_transform",
    "estimate_alpha",
    "estimate_ate_multivariate",
    "estimate_ate_univariate",
    "evaluate_step",
    "floor_pow_two_thirds",
    "load_csv",
    "maxmin_oracle",
    "order_by_index",
    "pava_fit",
    "uc_isotonic_fit",
]

__version__ = "0.1.0"
