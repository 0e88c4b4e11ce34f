import numpy as np
import pytest

from tsboson.distribution import exact_distribution
from tsboson.matrix import TransferMatrix, haar_random_unitary

BALANCED = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)


@pytest.fixture(scope="session")
def coupler():
    return TransferMatrix(BALANCED)


@pytest.fixture(scope="session")
def haar30():
    return haar_random_unitary(30, 2024)


@pytest.fixture(scope="session")
def exact30(haar30):
    return exact_distribution(haar30, [0, 1, 2], "indist")


@pytest.fixture(scope="session")
def exact30_dist(haar30):
    return exact_distribution(haar30, [0, 1, 2], "dist")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
