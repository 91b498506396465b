import numpy as np
import pytest

from nlslab.ground_state import RadialGrid, solve_ground_state
from nlslab.probe import ProbeSetup

DESK_ALPHA = 0.08


@pytest.fixture(scope="session")
def profile1():
    return solve_ground_state(1.0)


@pytest.fixture(scope="session")
def profile1_coarse():
    return solve_ground_state(1.0, RadialGrid(30.0, 4096))


@pytest.fixture(scope="session")
def setup32():
    """Ground state, operator, unstable pair and projections at α = 0.08 on 32³, L = 16."""
    return ProbeSetup.build(DESK_ALPHA, 32, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
