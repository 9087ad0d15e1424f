import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypstab.flux_models import builtin

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def burgers():
    return builtin("burgers")


@pytest.fixture(scope="session")
def psys():
    return builtin("p_system", gamma=1.4)


@pytest.fixture(scope="session")
def linear_diag():
    return builtin("linear", A=np.diag([-1.0, 1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(lines):
            terminalreporter.write_line(lines[cid])
