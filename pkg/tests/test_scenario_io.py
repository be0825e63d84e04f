import json
import math

import numpy as np
import pytest

from ehsched import HarvestScenario, ParseError, normalize_scenario, solve_max_throughput
from ehsched.model import PowerPolicy
from ehsched.scenario_io import (
    GenParams,
    dumps_policy,
    dumps_scenario,
    dumps_tunnel,
    export_tunnel,
    generate_batch,
    generate_random,
    parse_gen_spec,
    policy_from_dict,
    policy_to_dict,
    read_scenario,
    write_policy,
    write_scenario,
    write_tunnel,
)

LONG_RUN = GenParams(e_max=100, mean_interarrival=5, horizon=10_000, seed=42)


def test_generator_is_deterministic():
    a = generate_random(LONG_RUN, 3)
    b = generate_random(LONG_RUN, 3)
    assert a == b
    assert generate_random(LONG_RUN, 4) != a
    assert generate_batch(LONG_RUN, 5)[3] == a


def test_generator_statistics():
    sc = generate_random(LONG_RUN, 0)
    times = np.array(sc.times)
    energies = np.array(sc.energies)
    n = len(times)
    assert times[0] == 0.0 and times[-1] <= 10_000
    assert np.all(np.diff(times) > 0)
    assert abs(n - 2001) < 5 * math.sqrt(2000)
    assert abs(np.diff(times).mean() - 5) < 3 * 5 / math.sqrt(n - 1)
    assert abs(energies.mean() - 50) < 3 * (100 / math.sqrt(12)) / math.sqrt(n)
    assert energies.min() >= 0 and energies.max() <= 100


def test_generator_energy_range_separate_from_battery():
    params = GenParams(e_max=400, mean_interarrival=5, horizon=500, seed=1, energy_max=100)
    sc = generate_random(params, 0)
    assert sc.e_max == 400 and max(sc.energies) <= 100


@pytest.mark.parametrize("kw", [dict(mean_interarrival=0), dict(horizon=-1), dict(e_max=0),
                                dict(seed=-1)])
def test_gen_params_validation(kw):
    base = dict(e_max=1, mean_interarrival=1, horizon=1)
    base.update(kw)
    with pytest.raises(ValueError):
        GenParams(**base)


def test_parse_gen_spec():
    p = parse_gen_spec("emax=100, mu=5, T=10000", seed=7)
    assert p == GenParams(100, 5, 10_000, seed=7)
    assert parse_gen_spec("e_max=1,mu=2,horizon=3,energy_max=4").energy_max == 4
    for bad in ["emax=1,mu=2", "emax=1,mu=x,T=3", "emax=1,mu=2,T=3,zz=1", "emax"]:
        with pytest.raises(ValueError):
            parse_gen_spec(bad)


def test_scenario_file_roundtrip(tmp_path, six):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_scenario(six, p1)
    back = read_scenario(p1)
    assert back == six
    write_scenario(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_generated_scenario_roundtrip(tmp_path):
    sc = normalize_scenario(generate_random(GenParams(10, 1, 50, seed=2)))
    write_scenario(sc, tmp_path / "g.json")
    assert read_scenario(tmp_path / "g.json") == sc


def test_unsorted_input_is_normalized(tmp_path):
    path = tmp_path / "u.json"
    path.write_text(json.dumps({"e_max": 5, "arrivals": [{"t": 3, "e": 1}, {"t": 1, "e": 9},
                                                        {"t": 1, "e": 1}]}))
    sc = read_scenario(path)
    assert sc.arrivals == ((0.0, 0.0), (1.0, 5.0), (3.0, 1.0))


@pytest.mark.parametrize("text, fragment", [
    ('{"e_max": 5, "arrivals": [{"t": 0, "e": -1}]}', "arrivals[0].e"),
    ('{"e_max": 5, "arrivals": [{"t": -2, "e": 1}]}', "arrivals[0].t"),
    ('{"e_max": 0, "arrivals": []}', "e_max"),
    ('{"arrivals": []}', "e_max"),
    ('{"e_max": 5, "arrivals": [{"t": "x", "e": 1}]}', "arrivals[0].t"),
    ('{"e_max": 5, "arrivals": [[0, 1]]}', "arrivals[0]"),
    ('{"e_max": 5}', "arrivals"),
    ('[1, 2]', "object"),
    ('{"e_max": 5,\n "arrivals": [}', "line 2"),
])
def test_parse_errors(tmp_path, text, fragment):
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        read_scenario(path)
    assert fragment in str(info.value)


def test_policy_json_and_csv(tmp_path, six_policy):
    assert policy_from_dict(policy_to_dict(six_policy)) == six_policy
    csv_text = dumps_policy(six_policy, "csv")
    assert csv_text.splitlines() == ["until,power", "4,0.75", "7,2.66666666667", "12,2.2"]
    write_policy(six_policy, tmp_path / "p.json")
    data = json.loads((tmp_path / "p.json").read_text())
    assert policy_from_dict(data) == six_policy
    write_policy(six_policy, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text() == csv_text
    with pytest.raises(ParseError):
        policy_from_dict({"segments": [{"until": 1}]})


def test_tunnel_without_policy(six):
    rows = export_tunnel(six)
    assert len(rows) == 12
    after = [r.cum_harvest for r in rows[1::2]]
    assert after == [2, 3, 9, 13, 21, 22]
    assert [r.lower_wall for r in rows[1::2]] == [0, 0, 0, 3, 11, 12]
    assert all(r.cum_spent is None for r in rows)
    assert dumps_tunnel(rows).splitlines()[0] == "t,cum_harvest,lower_wall"


def test_tunnel_with_policy(six, six_policy):
    rows = export_tunnel(six, six_policy)
    spent = {r.t: r.cum_spent for r in rows}
    assert spent[4.0] == pytest.approx(3.0)
    assert spent[7.0] == pytest.approx(11.0)
    assert spent[12.0] == pytest.approx(22.0)
    assert dumps_tunnel(rows).splitlines()[0] == "t,cum_harvest,lower_wall,cum_spent"
    # the spend curve stays between the walls
    for r in rows:
        assert r.lower_wall - 1e-9 <= r.cum_spent <= r.cum_harvest + 1e-9


def test_tunnel_inside_random():
    params = GenParams(e_max=10, mean_interarrival=1, horizon=30, seed=4)
    for k in range(20):
        sc = normalize_scenario(generate_random(params, k))
        policy = solve_max_throughput(sc, 30)
        rows = export_tunnel(sc, policy)
        for before, after in zip(rows, rows[1:]):
            if before.t == after.t:  # a packet lands here
                assert before.cum_spent <= before.cum_harvest + 1e-9
                assert after.cum_spent >= after.lower_wall - 1e-9


def test_tunnel_empty_scenario(tmp_path):
    empty = normalize_scenario(HarvestScenario(3.0, ()))
    rows = export_tunnel(empty)
    assert rows == []
    write_tunnel(rows, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "t,cum_harvest,lower_wall\n"


def test_tunnel_horizon_cuts_late_packets(six):
    rows = export_tunnel(six, horizon=5)
    assert max(r.t for r in rows) == 5
    assert rows[-1].cum_harvest == 13


def test_dumps_scenario_sorted(six):
    data = json.loads(dumps_scenario(six))
    assert [a["t"] for a in data["arrivals"]] == sorted(a["t"] for a in data["arrivals"])
