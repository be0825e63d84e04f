"""Reference policies: greedy on-off transmission and the no-battery upper bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    HarvestScenario,
    PowerPolicy,
    RateFunction,
    normalize_scenario,
    throughput,
)
from .solver import solve_max_throughput


def realized_on_power(scenario: HarvestScenario, deadline: float) -> float:
    """Average harvest rate of the realized scenario: truncated energy before T over T."""
    return scenario.energy_before(deadline) / deadline


def on_off_policy(
    scenario: HarvestScenario, deadline: float, p_on: float | None = None
) -> PowerPolicy:
    """Transmit at ``p_on`` while the battery holds energy, stay silent otherwise.

    ``p_on`` defaults to the realized average harvest rate.  Overflow at
    arrivals is discarded (clipping semantics), depletion instants are exact.
    """
    if not scenario.normalized:
        scenario = normalize_scenario(scenario)
    if p_on is None:
        p_on = realized_on_power(scenario, deadline)
    arrivals = [(t, e) for t, e in scenario.arrivals if t < deadline]
    bounds = [t for t, _ in arrivals[1:]] + [deadline]

    segments: list[tuple[float, float]] = []

    def emit(until: float, power: float):
        if until <= (segments[-1][0] if segments else 0.0):
            return
        if segments and segments[-1][1] == power:
            segments[-1] = (until, power)
        else:
            segments.append((until, power))

    level = 0.0
    for (t, e), nxt in zip(arrivals, bounds):
        level = min(level + e, scenario.e_max)
        if p_on <= 0 or level <= 0:
            emit(nxt, 0.0)
            continue
        empty_at = t + level / p_on
        if empty_at < nxt:
            emit(empty_at, p_on)
            emit(nxt, 0.0)
            level = 0.0
        else:
            emit(nxt, p_on)
            level -= p_on * (nxt - t)
    return PowerPolicy(tuple(segments), float(deadline))


def unconstrained_bound(raw: HarvestScenario, deadline: float, rate: RateFunction) -> float:
    """Bits of a battery-free transmitter that holds all energy (untruncated) from t=0."""
    energy = math.fsum(e for t, e in raw.arrivals if t < deadline)
    return deadline * float(rate(energy / deadline))


@dataclass(frozen=True)
class ComparisonRow:
    id: str
    bits_optimal: float
    bits_onoff: float
    bits_unconstrained: float

    @property
    def onoff_loss(self) -> float:
        """Fraction of the optimal throughput lost by on-off."""
        return 1.0 - self.bits_onoff / self.bits_optimal if self.bits_optimal > 0 else 0.0

    @property
    def optimal_loss(self) -> float:
        """Fraction of the unconstrained bound lost to battery and causality limits."""
        if self.bits_unconstrained <= 0:
            return 0.0
        return 1.0 - self.bits_optimal / self.bits_unconstrained

    def sandwich_holds(self, rtol: float = 1e-9) -> bool:
        slack = rtol * max(1.0, self.bits_unconstrained)
        return (self.bits_onoff <= self.bits_optimal + slack
                and self.bits_optimal <= self.bits_unconstrained + slack)


def compare(
    raw: HarvestScenario,
    deadline: float,
    rate: RateFunction,
    id: str = "0",
    p_on: float | None = None,
) -> ComparisonRow:
    scenario = normalize_scenario(raw)
    optimal = solve_max_throughput(scenario, deadline)
    onoff = on_off_policy(scenario, deadline, p_on)
    return ComparisonRow(
        id,
        throughput(optimal, rate),
        throughput(onoff, rate),
        unconstrained_bound(raw, deadline, rate),
    )
