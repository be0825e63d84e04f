"""Optimal offline power scheduling for an energy-harvesting transmitter with a finite battery."""

from .errors import (
    AlgorithmInvariantViolated,
    InvalidDeadline,
    InvalidScenario,
    OracleTooExpensive,
    ParseError,
    UnreachableBitTarget,
)
from .model import (
    AWGN,
    SQRT,
    BatteryTrajectory,
    HarvestScenario,
    PowerPolicy,
    RateFunction,
    battery_trajectory,
    get_rate,
    is_feasible,
    normalize_scenario,
    throughput,
)
from .solver import (
    feasible_intervals,
    first_segment,
    reachable_bits,
    shift_problem,
    solve_max_throughput,
    solve_min_time,
    virtual_deadline,
)

__all__ = [
    "AWGN", "SQRT", "AlgorithmInvariantViolated", "BatteryTrajectory", "HarvestScenario",
    "InvalidDeadline", "InvalidScenario", "OracleTooExpensive", "ParseError", "PowerPolicy",
    "RateFunction", "UnreachableBitTarget", "battery_trajectory", "feasible_intervals",
    "first_segment", "get_rate", "is_feasible", "normalize_scenario", "reachable_bits", "shift_problem",
    "solve_max_throughput", "solve_min_time", "throughput", "virtual_deadline",
]
