"""Optimal offline power schedules.

``solve_max_throughput`` maximizes bits sent by a deadline and
``solve_min_time`` minimizes the time needed to send a bit budget.  Both
build the schedule one constant-power segment at a time: every arrival
``s_n`` of the current subproblem defines the band of constant powers
``[p_max[n], p_0[n]]`` that, used from the subproblem start, would leave the
battery between full (after the packet) and empty (before it).  The longest
prefix of bands with a common power is followed; the band that breaks the
run decides whether the power must rise next (end the segment where the
battery empties) or fall (end it where the battery is full).

The throughput solver never evaluates the rate function; the result depends
only on the energy tunnel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from scipy.optimize import brentq

from .errors import AlgorithmInvariantViolated, InvalidDeadline, UnreachableBitTarget
from .model import HarvestScenario, PowerPolicy, RateFunction, normalize_scenario

INTERVAL_RTOL = 1e-9
DEADLINE_RTOL = 1e-12


@dataclass(frozen=True)
class FeasibleInterval:
    """Band of constant powers feasible at one arrival, ignoring earlier ones.

    ``index`` counts arrivals of the subproblem from 1; ``s`` is the arrival
    time relative to the subproblem start.  The closing interval (``dummy``)
    sits at the deadline and is the single power that spends everything.
    """

    index: int
    p_lo: float
    p_hi: float
    s: float
    dummy: bool = False


@dataclass(frozen=True)
class SegmentDecision:
    kind: str  # "step" or "terminal"
    power: float
    until: float  # relative end of the segment
    branch: str  # "above", "below" or "terminal"
    n_ub: int
    n_1: int


@dataclass
class _Subproblem:
    """Residual problem starting at absolute time ``t0`` with battery ``e0``.

    Arrival data stays in absolute time so repeated shifting does not
    accumulate rounding error.
    """

    times: list[float]
    energies: list[float]
    e_max: float
    t0: float
    e0: float
    start: int  # first arrival strictly after t0

    @classmethod
    def initial(cls, scenario: HarvestScenario) -> "_Subproblem":
        if not scenario.normalized:
            scenario = normalize_scenario(scenario)
        times, energies = scenario.times, scenario.energies
        return cls(times, energies, scenario.e_max, 0.0, energies[0], 1)

    @property
    def total_energy(self) -> float:
        return self.e0 + math.fsum(self.energies[self.start:])


def _intervals(sub: _Subproblem, end: float, closed: bool = False) -> Iterator[FeasibleInterval]:
    """Bands for arrivals before ``end`` followed by the closing singleton.

    With ``closed`` an arrival exactly at ``end`` is treated as a real band and
    counted in the closing energy; the min-time solver uses this when its
    virtual deadline coincides with an arrival.
    """
    t0, e_max = sub.t0, sub.e_max
    cum = sub.e0
    n = 1
    for j in range(sub.start, len(sub.times)):
        t = sub.times[j]
        if t > end or (t == end and not closed):
            break
        s = t - t0
        e = sub.energies[j]
        hi = cum / s
        # e <= e_max after normalization, so only rounding can invert the band
        yield FeasibleInterval(n, min((cum + e - e_max) / s, hi), hi, s)
        cum += e
        n += 1
    s = end - t0
    p = cum / s
    yield FeasibleInterval(n, p, p, s, dummy=True)


def _subproblem_for(scenario: HarvestScenario, deadline: float) -> _Subproblem:
    if not (deadline > 0 and math.isfinite(deadline)):
        raise InvalidDeadline(f"deadline must be positive and finite, got {deadline!r}")
    return _Subproblem.initial(scenario)


def feasible_intervals(scenario: HarvestScenario, deadline: float) -> list[FeasibleInterval]:
    """All bands for arrivals in ``(0, deadline)`` plus the closing singleton."""
    return list(_intervals(_subproblem_for(scenario, deadline), deadline))


def first_segment(intervals: Iterable[FeasibleInterval]) -> SegmentDecision:
    """Choose the first constant-power segment from a sequence of bands.

    Bands are consumed lazily, so only the prefix up to the first
    incompatible band is ever computed.
    """
    seen: list[FeasibleInterval] = []
    lo, hi = -math.inf, math.inf
    scale = 0.0
    blocker = None
    for iv in intervals:
        scale = max(scale, abs(iv.p_hi))
        eps = INTERVAL_RTOL * scale
        if iv.p_lo > iv.p_hi + eps:
            raise AlgorithmInvariantViolated(f"band {iv.index} is empty: {iv.p_lo!r} > {iv.p_hi!r}")
        new_lo, new_hi = max(lo, iv.p_lo), min(hi, iv.p_hi)
        if new_lo <= new_hi + eps:
            seen.append(iv)
            lo, hi = new_lo, new_hi
            if iv.dummy:
                return SegmentDecision("terminal", max(iv.p_hi, 0.0), iv.s, "terminal",
                                       iv.index, iv.index)
            continue
        blocker = iv
        break
    if blocker is None:
        raise AlgorithmInvariantViolated("interval sequence has no closing singleton")

    eps = INTERVAL_RTOL * scale
    if blocker.p_lo > hi + eps:
        branch = "above"
    elif blocker.p_hi < lo - eps:
        branch = "below"
    else:
        raise AlgorithmInvariantViolated(
            f"band {blocker.index} is neither above nor below the running intersection"
        )

    chosen = None
    run_lo, run_hi = -math.inf, math.inf
    for iv in seen:
        run_lo, run_hi = max(run_lo, iv.p_lo), min(run_hi, iv.p_hi)
        cand = iv.p_hi if branch == "above" else iv.p_lo
        if run_lo - eps <= cand <= run_hi + eps:
            chosen = iv
    if chosen is None:
        raise AlgorithmInvariantViolated("no band end point lies in its running intersection")
    p1 = chosen.p_hi if branch == "above" else chosen.p_lo
    if p1 < -eps:
        raise AlgorithmInvariantViolated(f"first segment power {p1!r} is negative")
    return SegmentDecision("step", max(p1, 0.0), chosen.s, branch, len(seen), chosen.index)


def _shift(sub: _Subproblem, decision: SegmentDecision) -> _Subproblem:
    j = sub.start + decision.n_1 - 1
    harvested = sub.e0 + math.fsum(sub.energies[sub.start:j + 1])
    e0 = harvested - decision.until * decision.power
    slack = INTERVAL_RTOL * max(harvested, sub.e_max)
    if e0 < -slack or e0 > sub.e_max + slack:
        raise AlgorithmInvariantViolated(
            f"shifted initial battery {e0!r} outside [0, {sub.e_max}]"
        )
    return _Subproblem(sub.times, sub.energies, sub.e_max, sub.times[j],
                       min(max(e0, 0.0), sub.e_max), j + 1)


def shift_problem(
    scenario: HarvestScenario, decision: SegmentDecision, deadline: float
) -> tuple[HarvestScenario, float]:
    """Residual scenario and deadline after committing a step decision."""
    if decision.kind != "step":
        raise ValueError("only a step decision can be shifted")
    sub = _shift(_subproblem_for(scenario, deadline), decision)
    arrivals = [(0.0, sub.e0)] + [
        (t - sub.t0, e) for t, e in zip(sub.times[sub.start:], sub.energies[sub.start:])
    ]
    return HarvestScenario(sub.e_max, tuple(arrivals), normalized=True), deadline - sub.t0


def _max_throughput(scenario: HarvestScenario, deadline: float):
    sub = _subproblem_for(scenario, deadline)
    segments: list[tuple[float, float]] = []
    decisions: list[SegmentDecision] = []
    for _ in range(len(sub.times) + 1):
        dec = first_segment(_intervals(sub, deadline))
        decisions.append(dec)
        if dec.kind == "terminal":
            segments.append((float(deadline), dec.power))
            return PowerPolicy(tuple(segments), float(deadline)), decisions
        sub = _shift(sub, dec)
        segments.append((sub.t0, dec.power))
    raise AlgorithmInvariantViolated("throughput solver did not terminate")


def solve_max_throughput(scenario: HarvestScenario, deadline: float) -> PowerPolicy:
    """Schedule that sends the most bits by ``deadline`` (any valid rate function)."""
    return _max_throughput(scenario, deadline)[0]


def max_throughput_trace(scenario: HarvestScenario, deadline: float) -> list[SegmentDecision]:
    """Per-iteration segment decisions of :func:`solve_max_throughput`."""
    return _max_throughput(scenario, deadline)[1]


def _bits_curve(rate: RateFunction, energy: float):
    def f(s: float) -> float:
        return s * float(rate(energy / s)) if s > 0 else 0.0
    return f


def _virtual_point(
    sub: _Subproblem, bits: float, rate: RateFunction
) -> tuple[float, float | None]:
    """Earliest relative time a constant run of all prior energy can send ``bits``.

    Returns ``(s, at_arrival)``.  ``at_arrival`` is the absolute arrival time
    when the target is already exceeded just after that arrival (the infimum
    sits on the arrival), otherwise None.
    """
    bound = rate.slope_at_zero * sub.total_energy
    if bits >= bound:
        raise UnreachableBitTarget(bits, bound)
    energy = sub.e0
    left = 0.0
    for j in range(sub.start, len(sub.times) + 1):
        right = sub.times[j] - sub.t0 if j < len(sub.times) else math.inf
        if energy > 0:
            f = _bits_curve(rate, energy)
            if left > 0 and f(left) >= bits:
                return left, sub.times[j - 1]
            if right == math.inf:
                right = max(left, 1.0)
                for _ in range(4000):
                    if f(right) >= bits:
                        break
                    right *= 2.0
                else:
                    raise AlgorithmInvariantViolated("could not bracket the virtual deadline")
            if f(right) >= bits:
                lo = left if left > 0 else right * 1e-300
                if f(lo) >= bits:
                    return lo, None
                root = brentq(lambda s: f(s) - bits, lo, right, xtol=1e-300,
                              rtol=DEADLINE_RTOL, maxiter=500)
                return root, None
        if j < len(sub.energies):
            energy += sub.energies[j]
        left = right
    raise AlgorithmInvariantViolated("virtual deadline scan fell off the last epoch")


def reachable_bits(scenario: HarvestScenario, rate: RateFunction) -> float:
    """Supremum of the optimal throughput over all deadlines.

    A full battery can force energy out at high power before a packet lands,
    so this can sit below ``r'(0) * total energy``.  With the deadline at
    infinity the closing band is the power 0: the step rule commits the forced
    segments and the energy left after the final one is worth ``r'(0)`` per
    unit.
    """
    sub = _Subproblem.initial(scenario)
    parts: list[float] = []
    for _ in range(len(sub.times) + 1):
        dec = first_segment(_intervals(sub, math.inf))
        if dec.kind == "terminal":
            parts.append(rate.slope_at_zero * sub.total_energy)
            return math.fsum(parts)
        parts.append(float(rate(dec.power)) * dec.until)
        sub = _shift(sub, dec)
    raise AlgorithmInvariantViolated("reachability scan did not terminate")


def virtual_deadline(scenario: HarvestScenario, bits: float, rate: RateFunction) -> float:
    """Earliest time at which spending all earlier energy at constant power sends ``bits``.

    On each inter-arrival epoch ``s * r(A / s)`` is increasing, so epochs are
    scanned in order and the root is bracketed in the first one that reaches
    the target.  Raises :class:`UnreachableBitTarget` when
    ``bits >= r'(0) * total energy``.
    """
    if not bits > 0:
        raise ValueError("bit target must be positive")
    return _virtual_point(_Subproblem.initial(scenario), bits, rate)[0]


def solve_min_time(
    scenario: HarvestScenario, bits: float, rate: RateFunction
) -> tuple[PowerPolicy, float]:
    """Schedule sending ``bits`` as early as possible; returns ``(policy, T*)``."""
    if not (bits >= 0 and math.isfinite(bits)):
        raise ValueError(f"bit target must be finite and nonnegative, got {bits!r}")
    if bits == 0:
        return PowerPolicy.empty(), 0.0
    bound = reachable_bits(scenario, rate)
    if bits >= bound:
        raise UnreachableBitTarget(bits, bound)
    sub = _Subproblem.initial(scenario)
    remaining = bits
    segments: list[tuple[float, float]] = []
    for _ in range(len(sub.times) + 1):
        try:
            s_end, at_arrival = _virtual_point(sub, remaining, rate)
        except UnreachableBitTarget:
            # only rounding can land here once the bound check passed
            raise UnreachableBitTarget(bits, bound) from None
        end = sub.t0 + s_end if at_arrival is None else at_arrival
        dec = first_segment(_intervals(sub, end, closed=at_arrival is not None))
        if dec.kind == "terminal":
            segments.append((end, dec.power))
            return PowerPolicy(tuple(segments), end), end
        remaining -= float(rate(dec.power)) * dec.until
        sub = _shift(sub, dec)
        segments.append((sub.t0, dec.power))
        if remaining <= DEADLINE_RTOL * bits:
            return PowerPolicy(tuple(segments), sub.t0), sub.t0
    raise AlgorithmInvariantViolated("min-time solver did not terminate")
