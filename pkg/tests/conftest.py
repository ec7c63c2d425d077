import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ehrelay import EnergyDistribution, SystemParams, table3_params, table4_params  # noqa: E402


@pytest.fixture
def t3():
    return table3_params()


@pytest.fixture
def t4():
    return table4_params(0.9)


@pytest.fixture
def small():
    return SystemParams(0.3, 0.8, 3, 6, EnergyDistribution.uniform(2))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: l.split(":")[0]):
            terminalreporter.write_line(line)
