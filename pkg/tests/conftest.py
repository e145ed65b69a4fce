import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from orlicz_indiff import FiniteMarket

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def two_state():
    """Complete market: p = (1/2, 1/2), dS = (+1, -1)."""
    return FiniteMarket([0.5, 0.5], [[1.0], [-1.0]])


@pytest.fixture
def three_state():
    """Incomplete market with dS = (+1, 0, -1)."""
    return FiniteMarket([0.3, 0.4, 0.3], [[1.0], [0.0], [-1.0]])


@pytest.fixture
def skewed_three_state():
    return FiniteMarket([0.5, 0.2, 0.3], [[1.0], [0.0], [-1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
