from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridpassivity.case_io import load_shipped_case
from gridpassivity.cli import apply_controls
from gridpassivity.equilibrium import solve_case_equilibrium

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def kundur():
    return load_shipped_case()


@pytest.fixture(scope="session")
def kundur_ep(kundur):
    return solve_case_equilibrium(kundur)


@pytest.fixture(scope="session")
def kundur_variant(kundur):
    cache = {}

    def get(mode):
        if mode not in cache:
            case = apply_controls(kundur, mode)
            cache[mode] = (case, solve_case_equilibrium(case))
        return cache[mode]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
