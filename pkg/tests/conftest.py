import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wtgrad import QuantileGrid, QuantileRep, SupportInterval, TimeIndexedData

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def uniform_rep(lo, hi, grid, support):
    return QuantileRep(grid, lo + (hi - lo) * grid.nodes, support)


def translation_flow(times, grid, support=SupportInterval(-1.0, 3.0)):
    """Noiseless Unif[t, t+1] flow."""
    return TimeIndexedData(times, [uniform_rep(t, t + 1.0, grid, support) for t in times])


@pytest.fixture
def grid100():
    return QuantileGrid(100)


@pytest.fixture
def unit():
    return SupportInterval(0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
