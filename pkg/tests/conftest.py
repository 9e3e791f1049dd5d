import math

import pytest

from dualdyn.kolmogorov import DiffusionSpec, SolverConfig, TimeWindow
from dualdyn.statespace import StateSpace, StatisticalState

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def ou_space():
    return StateSpace.interval(-8.0, 8.0, 512)


@pytest.fixture(scope="session")
def ou_spec():
    return DiffusionSpec.ornstein_uhlenbeck(1.0, 0.0, SQRT2)


@pytest.fixture(scope="session")
def unit_window():
    return TimeWindow(0.0, 1.0)


@pytest.fixture(scope="session")
def cn_cfg():
    return SolverConfig(dt=1e-3)


@pytest.fixture(scope="session")
def ou_p0(ou_space):
    return StatisticalState.gaussian(ou_space, 2.0, 0.25)


def pytest_terminal_summary(terminalreporter):
    results = getattr(pytest, "acceptance_results", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, (title, ok, detail) in results.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}")
