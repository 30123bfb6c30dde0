"""Robust mean estimation by data-dependent shrinkage toward a base estimate."""

from .estimators import (
    DegenerateEstimateError,
    EstimatorSpec,
    EtaRule,
    Estimate,
    evaluate,
    parse_estimator,
    shrink_mean,
    shrink_mean_weighted,
)
from .scaling import ScalingSolution, alpha_hat
from .simulate import DistributionSpec, SeedPlan, parse_distribution
from .weights import WeightFn, WeightId, catalog, make_weight

__version__ = "0.1.0"

__all__ = [
    "DegenerateEstimateError",
    "DistributionSpec",
    "Estimate",
    "EstimatorSpec",
    "EtaRule",
    "ScalingSolution",
    "SeedPlan",
    "WeightFn",
    "WeightId",
    "alpha_hat",
    "catalog",
    "evaluate",
    "make_weight",
    "parse_distribution",
    "parse_estimator",
    "shrink_mean",
    "shrink_mean_weighted",
]
