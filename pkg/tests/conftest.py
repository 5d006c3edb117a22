import numpy as np
import pytest

from collapselab.model import DiffusionSpec, make_channel_state

# criterion lines collected by test_acceptance, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def spec1():
    return DiffusionSpec(intensity=1.0, num_sources=1, dt=1e-4)


@pytest.fixture
def half():
    return make_channel_state([0.5, 0.5])
