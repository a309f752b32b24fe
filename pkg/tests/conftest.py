import numpy as np
import pytest

from trajclass.teststat import build_null_table

# One line per acceptance criterion, filled by test_acceptance.py.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table30():
    return build_null_table(30, 20_001, seed=7)


@pytest.fixture(scope="session")
def small_table():
    return build_null_table(5, 2_001, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
