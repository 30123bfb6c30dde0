"""Monte Carlo benchmark harness."""

from .core import (
    CellResult,
    ExperimentConfig,
    Split,
    TrialRecord,
    quantile_of_errors,
    run,
    run_distribution,
    run_trial,
)

__all__ = [
    "CellResult",
    "ExperimentConfig",
    "Split",
    "TrialRecord",
    "quantile_of_errors",
    "run",
    "run_distribution",
    "run_trial",
]
