"""Command-line front end.

Subcommands:
  solve    max-throughput schedule for a deadline
  mintime  min-completion-time schedule for a bit target
  compare  optimal vs on-off vs unconstrained over generated scenarios
  sweep    B*(T) over a deadline grid and T*(B) over a bit grid
  tunnel   energy-tunnel table, optionally with the optimal spend curve

Exit codes: 0 success, 2 invalid input, 3 unreachable bit target,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

import numpy as np

from . import baselines, scenario_io
from .errors import (
    AlgorithmInvariantViolated,
    InvalidDeadline,
    InvalidScenario,
    UnreachableBitTarget,
)
from .model import DEFAULT_TOL, RATES, get_rate, is_feasible, normalize_scenario, throughput
from .solver import solve_max_throughput, solve_min_time

EXIT_OK, EXIT_INPUT, EXIT_UNREACHABLE, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _load(args):
    """Normalized scenario and its generator params (None for files)."""
    if args.scenario and args.gen:
        raise UsageError("give either --scenario or --gen, not both")
    if args.scenario:
        return scenario_io.read_scenario(args.scenario), None
    if args.gen:
        try:
            params = scenario_io.parse_gen_spec(args.gen, seed=args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return normalize_scenario(scenario_io.generate_random(params)), params
    raise UsageError("one of --scenario or --gen is required")


def _emit(text: str, out: str | None) -> None:
    if out:
        scenario_io._atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _verdict(report) -> str:
    if report.ok:
        return "ok"
    return f"{report.kind} at t={report.time:.12g} ({report.magnitude:.3g})"


def cmd_solve(args) -> int:
    scenario, params = _load(args)
    deadline = args.deadline
    if deadline is None:
        if params is None:
            raise UsageError("--deadline is required with --scenario")
        deadline = params.horizon
    if not deadline > 0:
        raise UsageError("--deadline must be positive")
    policy = solve_max_throughput(scenario, deadline)
    rate = get_rate(args.rate)
    if args.out:
        scenario_io.write_policy(policy, args.out)
    else:
        sys.stdout.write(scenario_io.dumps_policy(policy, "csv"))
    print(f"bits={throughput(policy, rate):.12g} segments={len(policy.segments)} "
          f"feasible={_verdict(is_feasible(scenario, policy, args.tol))}")
    return EXIT_OK


def cmd_mintime(args) -> int:
    scenario, _ = _load(args)
    if args.bits is None or not args.bits >= 0:
        raise UsageError("--bits must be given and nonnegative")
    rate = get_rate(args.rate)
    try:
        policy, t_star = solve_min_time(scenario, args.bits, rate)
    except UnreachableBitTarget as exc:
        print(f"unreachable: {exc.bits:.12g} bits requested, bound {exc.bound:.12g} bits",
              file=sys.stderr)
        return EXIT_UNREACHABLE
    if args.out:
        scenario_io.write_policy(policy, args.out)
    else:
        sys.stdout.write(scenario_io.dumps_policy(policy, "csv"))
    print(f"T*={t_star:.12g} segments={len(policy.segments)} "
          f"feasible={_verdict(is_feasible(scenario, policy, args.tol))}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.gen:
        raise UsageError("compare needs --gen")
    try:
        params = scenario_io.parse_gen_spec(args.gen, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rate = get_rate(args.rate)
    deadline = args.deadline or params.horizon
    p_on = None
    if args.on_power == "distribution":
        top = params.e_max if params.energy_max is None else params.energy_max
        p_on = 0.5 * top / params.mean_interarrival
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "bits_opt", "bits_onoff", "bits_unc"])
    rows = []
    bad = 0
    for k in range(args.count):
        raw = scenario_io.generate_random(params, k)
        row = baselines.compare(raw, deadline, rate, id=str(k), p_on=p_on)
        rows.append(row)
        if not row.sandwich_holds():
            bad += 1
            print(f"ordering violated for scenario {k} (seed {params.seed ^ k})", file=sys.stderr)
        w.writerow([row.id] + [scenario_io.fmt(v) for v in
                               (row.bits_optimal, row.bits_onoff, row.bits_unconstrained)])
    if rows:
        means = np.mean([[r.bits_optimal, r.bits_onoff, r.bits_unconstrained] for r in rows], axis=0)
        w.writerow(["mean"] + [scenario_io.fmt(v) for v in means])
    _emit(buf.getvalue(), args.out)
    return EXIT_INTERNAL if bad else EXIT_OK


def sweep_table(scenario, rate, t_min: float, t_max: float, points: int,
                bit_points: int | None = None) -> list[tuple[str, float, float]]:
    """Rows ``(curve, t, bits)`` for the throughput and min-time curves."""
    bit_points = points if bit_points is None else bit_points
    rows = []
    for t in np.linspace(t_min, t_max, points):
        t = float(t)
        rows.append(("throughput", t, throughput(solve_max_throughput(scenario, t), rate)))
    b_lo, b_hi = rows[0][2], rows[-1][2]
    for b in np.linspace(b_lo, b_hi, bit_points):
        b = float(b)
        _, t_star = solve_min_time(scenario, b, rate)
        rows.append(("mintime", t_star, b))
    return rows


def cmd_sweep(args) -> int:
    scenario, params = _load(args)
    t_max = args.t_max if args.t_max is not None else (params.horizon if params else None)
    if t_max is None:
        raise UsageError("--t-max is required with --scenario")
    t_min = args.t_min if args.t_min is not None else t_max / args.points
    if not (0 < t_min <= t_max) or args.points < 1:
        raise UsageError("need 0 < --t-min <= --t-max and --points >= 1")
    rows = sweep_table(scenario, get_rate(args.rate), t_min, t_max, args.points, args.bit_points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "t", "bits"])
    for curve, t, b in rows:
        w.writerow([curve, scenario_io.fmt(t), scenario_io.fmt(b)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_tunnel(args) -> int:
    scenario, _ = _load(args)
    policy = None
    if args.deadline is not None:
        if not args.deadline > 0:
            raise UsageError("--deadline must be positive")
        policy = solve_max_throughput(scenario, args.deadline)
    rows = scenario_io.export_tunnel(scenario, policy)
    _emit(scenario_io.dumps_tunnel(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehsched",
        description="Optimal offline transmit power for an energy-harvesting node",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""examples:
  ehsched solve --scenario six.json --deadline 12
  ehsched mintime --scenario six.json --bits 8.6216
  ehsched compare --gen emax=100,mu=5,T=10000 --count 100 --seed 7 --out cmp.csv
  ehsched sweep --scenario six.json --t-min 1 --t-max 12 --points 12
  ehsched tunnel --scenario six.json --deadline 12
""",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, deadline=False, bits=False):
        p.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
        p.add_argument("--gen", metavar="SPEC", help='random scenario, e.g. "emax=100,mu=5,T=10000"')
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--rate", choices=sorted(RATES), default="awgn")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                       help="relative feasibility tolerance (default %(default)g)")
        if deadline:
            p.add_argument("--deadline", type=float, metavar="T")
        if bits:
            p.add_argument("--bits", type=float, metavar="B")

    p = sub.add_parser("solve", help="maximize bits by a deadline")
    common(p, deadline=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mintime", help="minimize completion time for a bit target")
    common(p, bits=True)
    p.set_defaults(func=cmd_mintime)

    p = sub.add_parser("compare", help="optimal vs on-off vs unconstrained")
    common(p, deadline=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--on-power", choices=["realized", "distribution"], default="realized",
                   help="on-off power from the realized harvest or the generator means")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="throughput-vs-deadline and time-vs-bits curves")
    common(p)
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--bit-points", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tunnel", help="energy tunnel table")
    common(p, deadline=True)
    p.set_defaults(func=cmd_tunnel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UnreachableBitTarget as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (UsageError, InvalidScenario, InvalidDeadline, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AlgorithmInvariantViolated as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
