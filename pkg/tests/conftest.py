import sys

import pytest

from squidjpa.circuit import CircuitParams
from squidjpa.design_space import build_family


@pytest.fixture(scope="session")
def device_a():
    """15 pH shunt, 60 pH junction, 25 loops, 6 GHz, Q = 8.1 at the max-c3 bias."""
    return build_family(15e-12, 8.1, 60e-12, 25, 6e9)


@pytest.fixture
def params_2pf():
    return CircuitParams(25, 15e-12, 60e-12, 2e-12, 50.0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
