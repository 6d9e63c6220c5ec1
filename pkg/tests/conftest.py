import time

import pytest
from hypothesis import HealthCheck, settings

from fqrt_fluid.model import canonical_params
from fqrt_fluid.solver import ExtendedState, solve_ivp

# seeded so that failures reproduce; the machine is slow, so no deadlines
settings.register_profile("repo", derandomize=True, deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

SATURATED_PARAMS = canonical_params(lambda1=3.0)
SWITCH_OFF_PARAMS = canonical_params(lambda1=13.0, lambda2=1.5, mu11=10.0, mu12=0.8, mu22=1.0,
                             theta1=2.0, theta2=0.2)


def _timed_run(p, **kw):
    t0 = time.perf_counter()
    traj = solve_ivp(ExtendedState.empty(), p, h=0.01, t_end=50.0, **kw)
    return traj, time.perf_counter() - t0


# the long fluid runs are shared by the solver tests and the acceptance suite
@pytest.fixture(scope="session")
def canonical_run():
    return _timed_run(canonical_params())


@pytest.fixture(scope="session")
def saturated_run():
    return _timed_run(SATURATED_PARAMS)


@pytest.fixture(scope="session")
def switch_off_run():
    return _timed_run(SWITCH_OFF_PARAMS)


# PASS/FAIL lines from tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
