"""Discrete-event simulation of the polling system."""

from .distributions import (
    Deterministic,
    DistributionSpec,
    Erlang,
    Exponential,
    Gamma,
    HyperExponential2,
    distribution_from_dict,
    fit_two_moment,
    matches_moments,
)
from .engine import (
    Interval,
    SimConfig,
    SimEstimate,
    SimTrace,
    Strategy,
    sample_state_workload,
    simulate,
    strategy_ii_heuristic_credit,
    workload_at,
)

__all__ = [
    "Deterministic",
    "DistributionSpec",
    "Erlang",
    "Exponential",
    "Gamma",
    "HyperExponential2",
    "Interval",
    "SimConfig",
    "SimEstimate",
    "SimTrace",
    "Strategy",
    "distribution_from_dict",
    "fit_two_moment",
    "matches_moments",
    "sample_state_workload",
    "simulate",
    "strategy_ii_heuristic_credit",
    "workload_at",
]
