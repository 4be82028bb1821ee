import numpy as np
import pytest

from hidfd.data import Dataset, corner_means, make_gaussian_mixture
from hidfd.models import Classifier

# lines reported by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def toy() -> Dataset:
    return make_gaussian_mixture(4, 20, corner_means(4), 0.5, seed=3)


@pytest.fixture
def small_teacher(rng) -> Classifier:
    return Classifier.build([2, 8, 4], 4, rng)
