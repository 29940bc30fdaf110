import numpy as np
import pytest

from meteonn.dataset import generate_synthetic


@pytest.fixture(scope="session")
def synthetic_city():
    return generate_synthetic(seed=7, years=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
