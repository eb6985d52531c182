"""Cyclic polling with exhaustive service and wait-and-see idling credits.

Closed-form mean delays, optimal credits, a lower bound for local idling
strategies, and a discrete-event simulator to check them against.
"""

from .analytic import (
    DelayReport,
    TwoStationCoefficients,
    WorkloadBreakdown,
    coefficients_two_station,
    delay_via_cs,
    delay_via_workload_decomposition,
    exhaustive_delay,
    first_busy_period,
    mean_cycle_time,
    mg1_workload,
    single_station_delay,
    two_station_delay,
    wait_and_see_delay,
    workload_breakdown,
    workload_while_switching,
    workload_while_waiting,
)
from .bound import LowerBound, LowerBoundPoint, delay_lower_bound, lb_objective
from .errors import *  # noqa: F401,F403
from .model import (
    DerivedLoads,
    PollingConfig,
    StationParams,
    SwitchoverMoments,
    config_from_dict,
    config_to_dict,
    derive_loads,
    load_config,
    validate,
)
from .optimize import (
    AsymmetricVerdict,
    GeneralOptimum,
    SymmetricVerdict,
    TwoStationDecision,
    asymmetric_optimal_credit,
    asymmetric_worth_waiting,
    optimal_credits_general,
    optimal_credits_two_station,
    stationarity_residual,
    symmetric_optimal_credit,
    symmetric_worth_waiting,
)

__version__ = "0.1.0"
