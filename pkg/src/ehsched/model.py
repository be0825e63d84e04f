"""Problem instances, power-rate functions, policies and battery bookkeeping.

A scenario is a list of energy packets ``(s_n, E_n)`` plus a battery capacity.
A policy is piecewise constant: ``p_n`` on ``(i_{n-1}, i_n]`` with the first
segment starting at 0.  Between events the battery level is affine in time,
so checking it at arrival instants and policy breakpoints is exact.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidScenario

#: relative feasibility tolerance, scaled by total harvested energy
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class HarvestScenario:
    e_max: float
    arrivals: tuple[tuple[float, float], ...]
    normalized: bool = False

    @classmethod
    def from_lists(
        cls, e_max: float, times: Iterable[float], energies: Iterable[float]
    ) -> "HarvestScenario":
        arrivals = tuple((float(t), float(e)) for t, e in zip(times, energies))
        return cls(float(e_max), arrivals)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.arrivals]

    @property
    def energies(self) -> list[float]:
        return [e for _, e in self.arrivals]

    @property
    def total_energy(self) -> float:
        return math.fsum(e for _, e in self.arrivals)

    def energy_before(self, t: float) -> float:
        """Energy of all packets arriving strictly before ``t``."""
        return math.fsum(e for s, e in self.arrivals if s < t)

    def scaled(self, energy: float = 1.0, time: float = 1.0) -> "HarvestScenario":
        return HarvestScenario(
            self.e_max * energy,
            tuple((s * time, e * energy) for s, e in self.arrivals),
            self.normalized,
        )


def normalize_scenario(raw: HarvestScenario) -> HarvestScenario:
    """Validate and canonicalize a scenario.

    Arrivals are sorted, simultaneous packets are merged (summed) and then
    truncated at ``e_max``, zero-energy packets are dropped, and an entry at
    ``t = 0`` is guaranteed; a missing one means the battery starts empty.
    Subnormal energies count as zero: they carry too few significant bits for
    the band arithmetic.
    """
    e_max = raw.e_max
    if not math.isfinite(e_max) or e_max <= 0:
        raise InvalidScenario(f"e_max must be finite and positive, got {e_max!r}")
    merged: dict[float, float] = {}
    for k, (t, e) in enumerate(raw.arrivals):
        if not (math.isfinite(t) and math.isfinite(e)):
            raise InvalidScenario(f"arrival {k} has a non-finite value ({t!r}, {e!r})")
        if t < 0:
            raise InvalidScenario(f"arrival {k} has negative time {t!r}")
        if e < 0:
            raise InvalidScenario(f"arrival {k} has negative energy {e!r}")
        t = float(t) + 0.0  # folds -0.0 into 0.0
        merged[t] = merged.get(t, 0.0) + float(e)
    arrivals = [(t, min(e, e_max)) for t, e in sorted(merged.items())
                if e >= sys.float_info.min]
    if not arrivals or arrivals[0][0] > 0:
        arrivals.insert(0, (0.0, 0.0))
    return HarvestScenario(float(e_max), tuple(arrivals), normalized=True)


@dataclass(frozen=True)
class RateFunction:
    """A power-rate map r(p), nonnegative, increasing, strictly concave, r(0)=0.

    ``fn`` must accept floats and numpy arrays.  ``slope_at_zero`` is r'(0);
    for concave r it is also the largest slope anywhere, which gives both the
    reachability bound ``r'(0) * energy`` and grid-error bounds.
    """

    name: str
    fn: Callable
    slope_at_zero: float

    def __call__(self, p):
        return self.fn(p)


def _awgn(p):
    if isinstance(p, np.ndarray):
        return 0.5 * np.log2(1.0 + p)
    return 0.5 * math.log2(1.0 + p)


def _sqrt_rate(p):
    if isinstance(p, np.ndarray):
        return np.sqrt(1.0 + p) - 1.0
    return math.sqrt(1.0 + p) - 1.0


AWGN = RateFunction("awgn", _awgn, 0.5 / math.log(2.0))
SQRT = RateFunction("sqrt", _sqrt_rate, 0.5)
RATES = {r.name: r for r in (AWGN, SQRT)}


def get_rate(name: str) -> RateFunction:
    try:
        return RATES[name]
    except KeyError:
        raise ValueError(f"unknown rate function {name!r}; known: {sorted(RATES)}") from None


def check_rate(rate: RateFunction, rng: np.random.Generator, samples: int = 1000,
               p_max: float = 100.0, tol: float = 1e-12) -> list[str]:
    """Spot-check the rate-function contract; returns a list of failures."""
    problems = []
    if abs(float(rate(0.0))) > tol:
        problems.append("r(0) != 0")
    p = rng.uniform(0, p_max, samples)
    q = rng.uniform(0, p_max, samples)
    lam = rng.uniform(0.01, 0.99, samples)
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    if np.any(rate(hi) - rate(lo) < -tol):
        problems.append("not increasing")
    sep = hi - lo > 1.0
    mix = rate(lam * p + (1 - lam) * q) - (lam * rate(p) + (1 - lam) * rate(q))
    if np.any(mix[sep] <= tol):
        problems.append("not strictly concave")
    return problems


@dataclass(frozen=True)
class PowerPolicy:
    """Piecewise-constant power: ``segments[k] = (until_k, power_k)``.

    Power ``power_k`` is used on ``(until_{k-1}, until_k]`` with ``until_{-1} = 0``;
    the policy is zero after the last segment.
    """

    segments: tuple[tuple[float, float], ...]
    horizon: float

    def __post_init__(self):
        prev = 0.0
        for k, (until, power) in enumerate(self.segments):
            if not (math.isfinite(until) and math.isfinite(power)):
                raise ValueError(f"segment {k} is not finite")
            if until <= prev:
                raise ValueError(f"segment ends must be strictly increasing (segment {k})")
            if power < 0:
                raise ValueError(f"segment {k} has negative power {power!r}")
            prev = until
        if self.segments and self.segments[-1][0] > self.horizon * (1 + 1e-12):
            raise ValueError("last segment ends after the horizon")

    @classmethod
    def empty(cls) -> "PowerPolicy":
        return cls((), 0.0)

    @classmethod
    def constant(cls, power: float, horizon: float) -> "PowerPolicy":
        return cls(((float(horizon), float(power)),), float(horizon))

    @property
    def breakpoints(self) -> list[float]:
        return [u for u, _ in self.segments]

    @property
    def powers(self) -> list[float]:
        return [p for _, p in self.segments]

    def durations(self) -> list[float]:
        out, prev = [], 0.0
        for until, _ in self.segments:
            out.append(until - prev)
            prev = until
        return out

    def energy(self) -> float:
        return math.fsum(d * p for d, (_, p) in zip(self.durations(), self.segments))

    def spent_until(self, t: float) -> float:
        """Energy spent on ``[0, t]``."""
        total, prev = 0.0, 0.0
        for until, power in self.segments:
            if t <= prev:
                break
            total += (min(t, until) - prev) * power
            prev = until
        return total


def throughput(policy: PowerPolicy, rate: RateFunction) -> float:
    """Bits departed by ``policy``; exact for piecewise-constant power."""
    return math.fsum(
        d * float(rate(p)) for d, (_, p) in zip(policy.durations(), policy.segments)
    )


@dataclass(frozen=True)
class BatteryEvent:
    t: float
    level_before: float
    level_after: float
    arrival: float = 0.0
    overflow_lost: float = 0.0


@dataclass(frozen=True)
class BatteryTrajectory:
    """Battery level at every arrival instant and policy breakpoint.

    In ``strict`` mode nothing is clipped and ``overflow_lost`` only annotates
    the excess over ``e_max``.  In ``clipping`` mode the excess is discarded at
    arrivals.  Neither mode clips deficits: a negative level means the policy
    spends energy it does not have.
    """

    events: tuple[BatteryEvent, ...]
    mode: str
    e_max: float

    @property
    def final_level(self) -> float:
        return self.events[-1].level_after if self.events else 0.0

    @property
    def total_lost(self) -> float:
        return math.fsum(ev.overflow_lost for ev in self.events)

    def at(self, t: float) -> BatteryEvent:
        for ev in self.events:
            if ev.t == t:
                return ev
        raise KeyError(t)


def battery_trajectory(
    scenario: HarvestScenario, policy: PowerPolicy, mode: str = "strict"
) -> BatteryTrajectory:
    if mode not in ("strict", "clipping"):
        raise ValueError(f"mode must be 'strict' or 'clipping', got {mode!r}")
    end = policy.horizon
    arrivals = {t: e for t, e in scenario.arrivals if t <= end}
    times = sorted(set(arrivals) | set(policy.breakpoints) | {0.0, end})

    events = []
    level = 0.0
    seg = 0
    segs = policy.segments
    prev_t = 0.0
    for t in times:
        # drain from prev_t to t across possibly several segments
        spent = 0.0
        a = prev_t
        while a < t and seg < len(segs):
            until, power = segs[seg]
            b = min(until, t)
            spent += (b - a) * power
            a = b
            if until <= t:
                seg += 1
        level -= spent
        e = arrivals.get(t, 0.0)
        after = level + e
        lost = max(0.0, after - scenario.e_max)
        if mode == "clipping" and lost > 0:
            events.append(BatteryEvent(t, level, scenario.e_max, e, lost))
            level = scenario.e_max
        else:
            events.append(BatteryEvent(t, level, after, e, lost))
            level = after
        prev_t = t
    return BatteryTrajectory(tuple(events), mode, scenario.e_max)


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    kind: str | None = None  # "deficit" or "overflow"
    time: float | None = None
    magnitude: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def is_feasible(
    scenario: HarvestScenario, policy: PowerPolicy, tol: float = DEFAULT_TOL
) -> FeasibilityReport:
    """Check the battery stays in ``[0, e_max]`` (strict semantics).

    The slack is ``tol`` times the total harvested energy.  At one instant a
    deficit is reported before an overflow.
    """
    scale = scenario.total_energy or scenario.e_max
    slack = tol * scale
    traj = battery_trajectory(scenario, policy, "strict")
    for ev in traj.events:
        if ev.level_before < -slack:
            return FeasibilityReport(False, "deficit", ev.t, -ev.level_before)
        if ev.level_after > scenario.e_max + slack:
            return FeasibilityReport(False, "overflow", ev.t, ev.level_after - scenario.e_max)
    return FeasibilityReport(True)


def policy_from_powers(times: Sequence[float], powers: Sequence[float], horizon: float) -> PowerPolicy:
    """Build a policy holding ``powers[k]`` from ``times[k]`` to the next time (or horizon)."""
    ends = list(times[1:]) + [horizon]
    return PowerPolicy(tuple((float(u), float(p)) for u, p in zip(ends, powers)), float(horizon))
