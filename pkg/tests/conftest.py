import numpy as np
import pytest

from forceflow.data import Dataset

# filled in by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_blobs():
    """Two well separated 3-d blobs, 15 points each."""
    gen = np.random.default_rng(7)
    a = gen.normal(0.0, 0.5, size=(15, 3))
    b = gen.normal(0.0, 0.5, size=(15, 3)) + np.array([6.0, 0.0, 0.0])
    points = np.vstack([a, b])
    labels = np.repeat([0, 1], 15)
    return Dataset(points=points, labels=labels)


@pytest.fixture
def tiny_points(rng):
    return rng.normal(size=(10, 4))
