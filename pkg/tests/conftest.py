import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from atcdiging import objectives

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_quadratic():
    """6 agents, 3 dims, well conditioned (kappa_bar about 1.3)."""
    return objectives.random_quadratic(6, 3, seed=4, eig_range=(1.0, 1.6))


@pytest.fixture(scope="session")
def small_quadratic_ref(small_quadratic):
    return objectives.solve_reference(small_quadratic)


@pytest.fixture(scope="session")
def huber12():
    return objectives.random_huber(12, 20, 5, seed=1)


@pytest.fixture(scope="session")
def huber12_ref(huber12):
    return objectives.solve_reference(huber12)


def tracking_ok(trace, tol=1e-10):
    return float(np.max(trace.tracking_error)) <= tol


# one line per acceptance criterion, filled by test_acceptance.report
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("] ")[1].split()[0])):
            terminalreporter.write_line(line)
