"""Rate-measurement harness, invariant battery, and the CLI."""

from .rates import (
    Comparison,
    ErrorCurve,
    Oracle,
    RateExperiment,
    fit_rate,
    retraction_order_curve,
    run_rate_experiment,
)
from .invariants import noise_model_checks, run_invariants

__all__ = [
    "Comparison",
    "ErrorCurve",
    "Oracle",
    "RateExperiment",
    "fit_rate",
    "noise_model_checks",
    "retraction_order_curve",
    "run_invariants",
    "run_rate_experiment",
]
