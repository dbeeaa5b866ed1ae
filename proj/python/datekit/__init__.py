"""Dynamic average treatment effect estimation."""

from ._core import (
    DatekitError,
    coverage,
    estimate,
    mse,
    simulate,
    standard_config,
    true_date,
)

__all__ = [
    "DatekitError",
    "coverage",
    "estimate",
    "mse",
    "simulate",
    "standard_config",
    "true_date",
]
