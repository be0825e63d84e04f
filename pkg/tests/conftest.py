import sys

import pytest

from ehsched import HarvestScenario, PowerPolicy, normalize_scenario

SIX_TIMES = [0, 2, 4, 5, 7, 11]
SIX_ENERGIES = [2, 1, 6, 4, 8, 1]


@pytest.fixture
def six():
    return normalize_scenario(HarvestScenario.from_lists(10, SIX_TIMES, SIX_ENERGIES))


@pytest.fixture
def six_policy():
    return PowerPolicy(((4.0, 0.75), (7.0, 8 / 3), (12.0, 2.2)), 12.0)


def single(energy, e_max=10.0):
    return normalize_scenario(HarvestScenario.from_lists(e_max, [0], [energy]))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
