"""Independent checks for the solvers.

None of these share code with the segment-selection logic in :mod:`solver`;
feasibility always goes through :func:`model.is_feasible`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import OracleTooExpensive
from .model import (
    HarvestScenario,
    PowerPolicy,
    RateFunction,
    battery_trajectory,
    is_feasible,
    normalize_scenario,
    policy_from_powers,
    throughput,
)
from .solver import solve_max_throughput, solve_min_time

MAX_EPOCHS = 5
_CHUNK = 1 << 21  # candidate (state, power) pairs materialized at once


@dataclass(frozen=True)
class OracleReport:
    best_bits: float
    best_policy: PowerPolicy
    solver_bits: float
    gap: float  # solver_bits - best_bits
    grid_step: float
    tolerance: float  # grid-resolution bound eps(delta)
    verdict: str

    def to_json(self) -> str:
        data = asdict(self)
        data["best_policy"] = {
            "horizon": self.best_policy.horizon,
            "segments": [{"until": u, "power": p} for u, p in self.best_policy.segments],
        }
        return json.dumps(data, indent=2)


def default_power_cap(scenario: HarvestScenario, deadline: float) -> float:
    """Total energy over the shortest epoch: no feasible segment needs more."""
    times = [t for t in scenario.times if t < deadline] + [deadline]
    shortest = min(b - a for a, b in zip(times, times[1:]))
    return scenario.energy_before(deadline) / shortest


def brute_force_max_throughput(
    scenario: HarvestScenario,
    deadline: float,
    rate: RateFunction,
    delta: float = 0.01,
    power_cap: float | None = None,
    solver_policy: PowerPolicy | None = None,
    max_epochs: int = MAX_EPOCHS,
) -> OracleReport:
    """Best policy with one grid power per epoch, found by exhaustive search.

    Powers range over ``{0, delta, 2*delta, ..., power_cap}`` plus, per
    partial schedule, the two exact ends of the epoch's feasible band (the
    least power avoiding overflow at the next packet and the most power
    avoiding a deficit); without them a band narrower than ``delta`` could
    leave no candidate at all.  The search is depth-first over epochs with
    vectorized expansion.  Partial schedules whose optimistic completion (all
    remaining energy spread evenly, no battery limits) cannot beat the
    incumbent are cut, and the last epoch always spends everything since rate
    is increasing.  Both cuts drop only dominated candidates.
    """
    if not delta > 0:
        raise ValueError("grid step must be positive")
    if not scenario.normalized:
        scenario = normalize_scenario(scenario)
    starts = [t for t in scenario.times if t < deadline]
    m = len(starts)
    if m > max_epochs:
        raise OracleTooExpensive(f"{m} epochs exceed the oracle limit of {max_epochs}")
    if power_cap is None:
        power_cap = default_power_cap(scenario, deadline)

    arrival = dict(scenario.arrivals)
    ends = starts[1:] + [deadline]
    lengths = np.diff(np.array(starts + [deadline]))
    incoming = [arrival[t] for t in starts]
    # packet landing at the end of each epoch (a packet exactly at T still counts)
    next_e = [arrival.get(t, 0.0) for t in ends]
    future = np.concatenate([np.cumsum(incoming[::-1])[::-1][1:], [0.0]])
    e_max = scenario.e_max
    grid = np.arange(0.0, power_cap + 0.5 * delta, delta)
    grid = grid[grid <= power_cap * (1 + 1e-12)]
    slack = 1e-12 * max(1.0, scenario.total_energy)

    best = {"bits": -math.inf, "powers": None}

    def optimistic(j: int, level: np.ndarray) -> np.ndarray:
        rest = deadline - starts[j]
        return rest * rate((level + future[j]) / rest)

    def descend(j: int, level: np.ndarray, bits: np.ndarray, hist: np.ndarray):
        # level: battery just after the arrival opening epoch j
        L = lengths[j]
        hi = np.minimum(level / L, power_cap)
        lo = np.maximum((level + next_e[j] - e_max) / L, 0.0)
        if j == m - 1:
            ok = lo <= hi + slack / L
            if not ok.any():
                return
            total = np.where(ok, bits + L * rate(hi), -np.inf)
            i = int(np.argmax(total))
            if total[i] > best["bits"]:
                best["bits"] = float(total[i])
                best["powers"] = np.append(hist[i], hi[i])
            return
        step = max(1, _CHUNK // (len(grid) + 2))
        for a in range(0, len(level), step):
            sl = slice(a, a + step)
            lv, bt, hs = level[sl], bits[sl], hist[sl]
            cand = np.concatenate(
                [np.broadcast_to(grid, (len(lv), len(grid))), lo[sl, None], hi[sl, None]], axis=1)
            after = lv[:, None] - cand * L
            ok = (after >= -slack) & (after + next_e[j] <= e_max + slack) & (cand >= 0)
            si, pi = np.nonzero(ok)
            if si.size == 0:
                continue
            p = cand[si, pi]
            new_level = np.maximum(after[si, pi], 0.0) + next_e[j]
            new_bits = bt[si] + L * rate(p)
            if math.isfinite(best["bits"]):
                keep = new_bits + optimistic(j + 1, new_level) > best["bits"]
                si, p, new_level, new_bits = si[keep], p[keep], new_level[keep], new_bits[keep]
            # most promising first, so the incumbent tightens early
            order = np.argsort(-(new_bits + optimistic(j + 1, new_level)))
            new_hist = np.column_stack([hs[si], p])[order]
            descend(j + 1, new_level[order], new_bits[order], new_hist)

    descend(0, np.array([incoming[0]]), np.zeros(1), np.zeros((1, 0)))
    if best["powers"] is None:
        raise RuntimeError("no feasible candidate policy found")
    best_policy = policy_from_powers(starts, best["powers"].tolist(), deadline)
    if not is_feasible(scenario, best_policy):
        raise RuntimeError("grid optimum failed the strict feasibility check")
    best_bits = throughput(best_policy, rate)

    if solver_policy is None:
        solver_policy = solve_max_throughput(scenario, deadline)
    solver_bits = throughput(solver_policy, rate)
    eps = deadline * rate.slope_at_zero * delta
    verdict = "pass" if solver_bits >= best_bits - eps else "fail"
    return OracleReport(best_bits, best_policy, solver_bits, solver_bits - best_bits,
                        delta, eps, verdict)


@dataclass(frozen=True)
class Counterexample:
    policy: PowerPolicy
    gain: float
    window: tuple[float, float, float]  # (raised start, lowered start, width)


@dataclass(frozen=True)
class PerturbationResult:
    passed: bool
    tested: int  # feasible perturbations evaluated
    counterexample: Counterexample | None = None


def _perturb(policy: PowerPolicy, up: float, down: float, width: float, delta: float) -> PowerPolicy:
    cuts = sorted({*policy.breakpoints, up, up + width, down, down + width})
    cuts = [c for c in cuts if 0 < c <= policy.horizon]
    segments = []
    prev = 0.0
    for c in cuts:
        mid = 0.5 * (prev + c)
        p = 0.0
        for until, power in policy.segments:
            if mid <= until:
                p = power
                break
        if up <= mid <= up + width:
            p += delta
        if down <= mid <= down + width:
            p -= delta
        segments.append((c, p))
        prev = c
    return PowerPolicy(tuple(segments), policy.horizon)


def perturbation_check(
    scenario: HarvestScenario,
    policy: PowerPolicy,
    rate: RateFunction,
    delta: float = 1e-3,
    trials: int = 1000,
    seed: int = 0,
    rtol: float = 1e-12,
) -> PerturbationResult:
    """Move ``delta * width`` energy between two random windows and look for gains.

    Each trial raises the power by ``delta`` on one window and lowers it on
    another of equal width, keeps it only if it stays feasible, and reports
    the first one that sends more bits than ``policy``.
    """
    if not scenario.normalized:
        scenario = normalize_scenario(scenario)
    rng = np.random.default_rng(seed)
    horizon = policy.horizon
    base = throughput(policy, rate)
    tested = 0
    for _ in range(trials):
        width = horizon * 10 ** rng.uniform(-3, -1)
        up, down = rng.uniform(0, horizon - width, 2)
        if abs(up - down) < width:
            continue
        try:
            cand = _perturb(policy, float(up), float(down), float(width), delta)
        except ValueError:  # power went negative
            continue
        if not is_feasible(scenario, cand):
            continue
        tested += 1
        gain = throughput(cand, rate) - base
        if gain > rtol * max(1.0, abs(base)):
            return PerturbationResult(False, tested,
                                      Counterexample(cand, gain, (float(up), float(down), float(width))))
    return PerturbationResult(True, tested)


def _segments_close(a: PowerPolicy, b: PowerPolicy, tol: float) -> float:
    """Largest mismatch between two segment lists (inf if counts differ)."""
    if len(a.segments) != len(b.segments):
        return math.inf
    worst = 0.0
    for (ua, pa), (ub, pb) in zip(a.segments, b.segments):
        worst = max(worst, abs(ua - ub) / max(1.0, abs(ua)), abs(pa - pb) / max(1.0, abs(pa)))
    return worst


@dataclass(frozen=True)
class RoundtripReport:
    passed: bool
    deadline: float
    bits: float
    recovered: float  # recovered deadline (T->B->T) or bits (B->T->B)
    rel_error: float
    segment_error: float


def roundtrip_check(
    scenario: HarvestScenario,
    deadline: float,
    rate: RateFunction,
    tol: float = 1e-6,
    segment_tol: float | None = None,
) -> RoundtripReport:
    """Max-throughput by ``deadline``, then min-time for those bits: same schedule?"""
    segment_tol = tol if segment_tol is None else segment_tol
    forward = solve_max_throughput(scenario, deadline)
    bits = throughput(forward, rate)
    back, t_star = solve_min_time(scenario, bits, rate)
    rel = abs(t_star - deadline) / deadline
    seg = _segments_close(forward, back, segment_tol)
    return RoundtripReport(rel <= tol and seg <= segment_tol, deadline, bits, t_star, rel, seg)


def roundtrip_bits_check(
    scenario: HarvestScenario,
    bits: float,
    rate: RateFunction,
    tol: float = 1e-6,
    segment_tol: float | None = None,
) -> RoundtripReport:
    """Min-time for ``bits``, then max-throughput by that time: same bits?"""
    segment_tol = tol if segment_tol is None else segment_tol
    back, t_star = solve_min_time(scenario, bits, rate)
    forward = solve_max_throughput(scenario, t_star)
    recovered = throughput(forward, rate)
    rel = abs(recovered - bits) / bits
    seg = _segments_close(forward, back, segment_tol)
    return RoundtripReport(rel <= tol and seg <= segment_tol, t_star, bits, recovered, rel, seg)


def structure_violations(
    scenario: HarvestScenario,
    policy: PowerPolicy,
    rtol: float = 1e-7,
) -> list[str]:
    """Necessary conditions every optimal schedule meets; returns what fails.

    * power changes only at packet arrivals
    * the battery never overflows or runs dry
    * power rises only where the battery is empty just before the packet,
      falls only where it is full just after it, and conversely
    * the battery is empty at the end (packets at the very end excluded)
    """
    if not scenario.normalized:
        scenario = normalize_scenario(scenario)
    out = []
    if not policy.segments:
        return out
    slack = rtol * (scenario.total_energy or scenario.e_max)
    arrival_times = set(scenario.times)
    traj = battery_trajectory(scenario, policy, "strict")
    report = is_feasible(scenario, policy)
    if not report:
        out.append(f"infeasible: {report.kind} at t={report.time}")
    p_scale = max(policy.powers)
    for (t, p_prev), (_, p_next) in zip(policy.segments, policy.segments[1:]):
        if t not in arrival_times:
            out.append(f"breakpoint {t} is not an arrival")
            continue
        ev = traj.at(t)
        empty = abs(ev.level_before) <= slack
        full = abs(ev.level_after - scenario.e_max) <= slack
        change = p_next - p_prev
        noise = 1e-12 * p_scale
        rises, falls = change > noise, change < -noise
        if rises and not empty:
            out.append(f"power rises at {t} with battery {ev.level_before}")
        if falls and not full:
            out.append(f"power falls at {t} with battery {ev.level_after} after the packet")
        if not (rises or falls):
            # a change lost in rounding cannot be told apart from no change
            if change == 0:
                out.append(f"no power change at breakpoint {t}")
            continue
        if empty and not full and not rises:
            out.append(f"battery empty at {t} but power does not rise")
        if full and not empty and not falls:
            out.append(f"battery full at {t} but power does not fall")
    end = traj.events[-1]
    if abs(end.level_before) > slack:
        out.append(f"battery holds {end.level_before} at the end")
    return out
