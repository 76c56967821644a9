import numpy as np
import pytest
from hypothesis import settings

from svetlab import Scenario

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def s222():
    return Scenario(2, 2, 2)


@pytest.fixture
def s322():
    return Scenario(3, 2, 2)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
