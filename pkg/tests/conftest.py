import numpy as np
import pytest

from covsteer.estimator import CovarianceSteering
from covsteer.model import make_clohessy_wiltshire, make_double_integrator


@pytest.fixture(scope="session")
def di_problem():
    return make_double_integrator()


@pytest.fixture(scope="session")
def cw_problem():
    return make_clohessy_wiltshire()


@pytest.fixture(scope="session")
def di_fit(di_problem):
    return CovarianceSteering().fit(di_problem)


@pytest.fixture(scope="session")
def cw_fit(cw_problem):
    return CovarianceSteering().fit(cw_problem)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
