import math
import os

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ehsched import (
    AWGN,
    SQRT,
    HarvestScenario,
    PowerPolicy,
    battery_trajectory,
    is_feasible,
    normalize_scenario,
    solve_max_throughput,
    solve_min_time,
    throughput,
)
from ehsched.model import policy_from_powers
from ehsched.oracle import structure_violations

settings.register_profile("ehsched", deadline=None, max_examples=int(os.environ.get("EHSCHED_EXAMPLES", 150)))
settings.load_profile("ehsched")

finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def raw_scenarios(draw, max_arrivals=8):
    e_max = draw(st.floats(0.5, 50, **finite))
    n = draw(st.integers(1, max_arrivals))
    gaps = draw(st.lists(st.floats(0.01, 10, **finite), min_size=n, max_size=n))
    energies = draw(st.lists(st.floats(0, 1.5 * e_max, **finite), min_size=n, max_size=n))
    start = draw(st.sampled_from([0.0, 0.0, 0.5]))
    times = np.cumsum([start] + gaps[1:]).tolist()
    if draw(st.booleans()):  # shuffle and duplicate some instants
        times = [round(t, 1) for t in times][::-1]
    return HarvestScenario.from_lists(e_max, times, energies)


@st.composite
def problems(draw, max_arrivals=8):
    sc = normalize_scenario(draw(raw_scenarios(max_arrivals)))
    last = sc.times[-1]
    deadline = draw(st.floats(0.05, last + 10, **finite))
    assume(deadline not in sc.times[1:])
    return sc, deadline


def spend_each_packet(sc, deadline):
    """Spend each packet evenly over its own epoch: always feasible when normalized."""
    starts = [t for t in sc.times if t < deadline]
    ends = starts[1:] + [deadline]
    energy = dict(sc.arrivals)
    powers = [energy[a] / (b - a) for a, b in zip(starts, ends)]
    return policy_from_powers(starts, powers, deadline)


def mix(a: PowerPolicy, b: PowerPolicy, lam: float) -> PowerPolicy:
    cuts = sorted(set(a.breakpoints) | set(b.breakpoints))
    segs = []
    for c in cuts:
        pa = next(p for u, p in a.segments if c <= u)
        pb = next(p for u, p in b.segments if c <= u)
        segs.append((c, lam * pa + (1 - lam) * pb))
    return PowerPolicy(tuple(segs), a.horizon)


@given(raw_scenarios())
def test_normalize_idempotent(raw):
    once = normalize_scenario(raw)
    twice = normalize_scenario(HarvestScenario(once.e_max, once.arrivals))
    assert once.arrivals == twice.arrivals
    assert once.times[0] == 0.0
    assert all(b > a for a, b in zip(once.times, once.times[1:]))
    assert all(0 <= e <= once.e_max for e in once.energies)


@given(problems(), st.data())
def test_event_points_suffice(problem, data):
    sc, deadline = problem
    powers = data.draw(st.lists(st.floats(0, 5, **finite), min_size=3, max_size=3))
    cuts = sorted({deadline / 3, 2 * deadline / 3, deadline})
    policy = PowerPolicy(tuple(zip(cuts, powers)), deadline)
    report = is_feasible(sc, policy)
    # battery just before and just after every sample point
    slack = 1e-9 * (sc.total_energy or sc.e_max)
    grid = np.linspace(0, deadline, 400)
    for t in grid:
        spent = policy.spent_until(float(t))
        before = sc.energy_before(float(t)) - spent
        after = math.fsum(e for s, e in sc.arrivals if s <= t) - spent
        if report:
            assert before >= -slack and after <= sc.e_max + slack


@given(problems(), st.floats(0, 3, **finite))
def test_clipping_conserves_energy(problem, power):
    sc, deadline = problem
    policy = PowerPolicy.constant(power, deadline)
    traj = battery_trajectory(sc, policy, "clipping")
    harvested = math.fsum(e for t, e in sc.arrivals if t <= deadline)
    assert traj.final_level == pytest.approx(
        harvested - traj.total_lost - policy.energy(), abs=1e-9 * max(1.0, harvested))
    assert all(ev.level_after <= sc.e_max + 1e-12 for ev in traj.events)


@given(problems(), st.floats(0, 1))
def test_convex_combinations_stay_feasible(problem, lam):
    sc, deadline = problem
    a = solve_max_throughput(sc, deadline)
    b = spend_each_packet(sc, deadline)
    assert is_feasible(sc, b)
    c = mix(a, b, lam)
    assert is_feasible(sc, c)
    assert throughput(c, AWGN) <= throughput(a, AWGN) + 1e-9


@given(problems())
def test_solver_output_invariants(problem):
    sc, deadline = problem
    policy = solve_max_throughput(sc, deadline)
    assert structure_violations(sc, policy) == []
    assert policy.horizon == deadline and policy.breakpoints[-1] == deadline
    assert all(p >= 0 for p in policy.powers)
    for rate in (AWGN, SQRT):
        assert throughput(policy, rate) >= throughput(spend_each_packet(sc, deadline), rate) - 1e-9


@given(problems(), st.floats(0.1, 10, **finite), st.floats(0.1, 10, **finite))
def test_scaling(problem, a, b):
    sc, deadline = problem
    base = solve_max_throughput(sc, deadline)
    scaled = solve_max_throughput(normalize_scenario(sc.scaled(energy=a, time=b)), deadline * b)
    assert len(scaled.segments) == len(base.segments)
    for (u, p), (u2, p2) in zip(base.segments, scaled.segments):
        assert u2 == pytest.approx(u * b, rel=1e-9)
        assert p2 == pytest.approx(p * a / b, rel=1e-7, abs=1e-12 * a / b)


@given(problems(), st.floats(0.05, 0.95))
def test_min_time_meets_target(problem, frac):
    sc, deadline = problem
    bits = frac * throughput(solve_max_throughput(sc, deadline), AWGN)
    assume(bits > 1e-9)
    policy, t_star = solve_min_time(sc, bits, AWGN)
    assert t_star <= deadline * (1 + 1e-9)
    assert throughput(policy, AWGN) == pytest.approx(bits, rel=1e-7)
    assert is_feasible(sc, policy)
