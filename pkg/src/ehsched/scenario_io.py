"""Random scenario generation, scenario/policy files and energy-tunnel tables.

Random streams use numpy's PCG64.  Scenario ``k`` of a batch is drawn from
``PCG64(seed ^ k)``, so any single scenario of a batch can be regenerated on
its own and results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ParseError
from .model import HarvestScenario, PowerPolicy, normalize_scenario


@dataclass(frozen=True)
class GenParams:
    """Harvest statistics: uniform packet energies, exponential inter-arrivals.

    ``energy_max`` is the upper end of the energy distribution and defaults to
    ``e_max``; setting it separately lets the battery size vary while the
    harvest statistics stay fixed.
    """

    e_max: float
    mean_interarrival: float
    horizon: float
    seed: int = 0
    energy_max: float | None = None

    def __post_init__(self):
        if not self.mean_interarrival > 0:
            raise ValueError("mean inter-arrival time must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.e_max > 0:
            raise ValueError("e_max must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def generate_random(params: GenParams, index: int = 0) -> HarvestScenario:
    """Draw one raw scenario; arrival times are cumulative exponential gaps in [0, T]."""
    rng = np.random.Generator(np.random.PCG64(params.seed ^ index))
    mu, horizon = params.mean_interarrival, params.horizon
    times = [0.0]
    t = 0.0
    batch = max(16, int(1.2 * horizon / mu) + 16)
    while t <= horizon:
        for gap in rng.exponential(mu, batch):
            t += float(gap)
            if t > horizon:
                break
            times.append(t)
    top = params.e_max if params.energy_max is None else params.energy_max
    energies = rng.uniform(0.0, top, len(times))
    return HarvestScenario.from_lists(params.e_max, times, energies.tolist())


def generate_batch(params: GenParams, count: int) -> list[HarvestScenario]:
    return [generate_random(params, k) for k in range(count)]


_GEN_KEYS = {
    "emax": "e_max", "e_max": "e_max",
    "mu": "mean_interarrival",
    "t": "horizon", "horizon": "horizon",
    "energy_max": "energy_max",
}


def parse_gen_spec(spec: str, seed: int = 0) -> GenParams:
    """Parse ``"emax=100,mu=5,T=10000"`` into :class:`GenParams`."""
    values: dict[str, float] = {}
    for item in filter(None, (p.strip() for p in spec.split(","))):
        key, sep, value = item.partition("=")
        name = _GEN_KEYS.get(key.strip().lower())
        if not sep or name is None:
            raise ValueError(f"bad generator field {item!r}; expected emax=, mu=, T=")
        try:
            values[name] = float(value)
        except ValueError:
            raise ValueError(f"generator field {key!r} is not a number: {value!r}") from None
    missing = {"e_max", "mean_interarrival", "horizon"} - values.keys()
    if missing:
        raise ValueError(f"generator spec is missing {sorted(missing)}")
    return GenParams(seed=seed, **values)


def scenario_to_dict(scenario: HarvestScenario) -> dict:
    arrivals = sorted(scenario.arrivals)
    return {"e_max": scenario.e_max, "arrivals": [{"t": t, "e": e} for t, e in arrivals]}


def scenario_from_dict(data) -> HarvestScenario:
    """Build and normalize a scenario from the parsed JSON object."""
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object")
    if "e_max" not in data:
        raise ParseError("missing field 'e_max'")
    e_max = _number(data["e_max"], "e_max")
    if e_max <= 0:
        raise ParseError(f"e_max: must be positive, got {e_max!r}")
    raw = data.get("arrivals")
    if not isinstance(raw, list):
        raise ParseError("field 'arrivals' must be a list")
    arrivals = []
    for k, item in enumerate(raw):
        where = f"arrivals[{k}]"
        if not isinstance(item, dict) or "t" not in item or "e" not in item:
            raise ParseError(f"{where}: expected an object with 't' and 'e'")
        t = _number(item["t"], f"{where}.t")
        e = _number(item["e"], f"{where}.e")
        if t < 0:
            raise ParseError(f"{where}.t: negative time {t!r}")
        if e < 0:
            raise ParseError(f"{where}.e: negative energy {e!r}")
        arrivals.append((t, e))
    return normalize_scenario(HarvestScenario(e_max, tuple(arrivals)))


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(f"{where}: not finite")
    return value


def read_scenario(path) -> HarvestScenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def dumps_scenario(scenario: HarvestScenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def write_scenario(scenario: HarvestScenario, path) -> None:
    _atomic_write(path, dumps_scenario(scenario))


def fmt(x: float) -> str:
    """Render a number with 12 significant digits."""
    return f"{x:.12g}"


def policy_to_dict(policy: PowerPolicy) -> dict:
    return {
        "horizon": policy.horizon,
        "segments": [{"until": u, "power": p} for u, p in policy.segments],
    }


def policy_from_dict(data) -> PowerPolicy:
    try:
        segments = tuple((float(s["until"]), float(s["power"])) for s in data["segments"])
        return PowerPolicy(segments, float(data["horizon"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed policy: {exc}") from None


def dumps_policy(policy: PowerPolicy, fmt_: str = "json") -> str:
    if fmt_ == "json":
        return json.dumps(policy_to_dict(policy), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["until", "power"])
    for u, p in policy.segments:
        w.writerow([fmt(u), fmt(p)])
    return buf.getvalue()


def write_policy(policy: PowerPolicy, path) -> None:
    """Write JSON, or CSV when the path ends in ``.csv``."""
    kind = "csv" if str(path).endswith(".csv") else "json"
    _atomic_write(path, dumps_policy(policy, kind))


class TunnelRow(NamedTuple):
    t: float
    cum_harvest: float
    lower_wall: float
    cum_spent: float | None = None


def export_tunnel(
    scenario: HarvestScenario,
    policy: PowerPolicy | None = None,
    horizon: float | None = None,
) -> list[TunnelRow]:
    """Energy-tunnel walls (and optionally the spend curve) for step plotting.

    One row per policy breakpoint, two rows (before and after the jump) per
    packet arrival.  Packets after the horizon (the policy's, unless given)
    are left out; zero-energy entries produce no jump and no rows.
    """
    if not scenario.normalized:
        scenario = normalize_scenario(scenario)
    if horizon is None and policy is not None and policy.segments:
        horizon = policy.horizon
    if policy is not None and not policy.segments:
        policy = None
    arrivals = {t: e for t, e in scenario.arrivals
                if e > 0 and (horizon is None or t <= horizon)}
    times = set(arrivals)
    if policy is not None:
        times |= {0.0, *policy.breakpoints}
    if horizon is not None and times:
        times.add(horizon)

    rows = []
    cum = 0.0
    e_max = scenario.e_max

    def row(t: float) -> TunnelRow:
        spent = policy.spent_until(t) if policy is not None else None
        return TunnelRow(t, cum, max(0.0, cum - e_max), spent)

    for t in sorted(times):
        if t in arrivals:
            rows.append(row(t))
            cum += arrivals[t]
        rows.append(row(t))
    return rows


def dumps_tunnel(rows: list[TunnelRow]) -> str:
    with_spent = any(r.cum_spent is not None for r in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t", "cum_harvest", "lower_wall"] + (["cum_spent"] if with_spent else [])
    w.writerow(header)
    for r in rows:
        vals = [r.t, r.cum_harvest, r.lower_wall] + ([r.cum_spent] if with_spent else [])
        w.writerow([fmt(v) for v in vals])
    return buf.getvalue()


def write_tunnel(rows: list[TunnelRow], path) -> None:
    _atomic_write(path, dumps_tunnel(rows))
