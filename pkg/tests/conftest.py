import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twistlab.metric import MetricSpec
from twistlab.reduction import build_reduced, truncate

warnings.filterwarnings("ignore", message=".*TBB.*")

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.fixture(scope="session")
def flat():
    return MetricSpec.flat()


@pytest.fixture(scope="session")
def conformal005():
    return MetricSpec.conformal(0.05)


@pytest.fixture(scope="session")
def flat_LR():
    return truncate(build_reduced(MetricSpec.flat(), (1, 0)), 2.0, 1.0)


@pytest.fixture(scope="session")
def conf_LR():
    return truncate(build_reduced(MetricSpec.conformal(0.05), (1, 0)), 2.0, 1.0)


@pytest.fixture(scope="session")
def two_mode():
    return MetricSpec({(0, 1): (0.02, 0.0), (-1, 1): (0.02, 0.0)})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
