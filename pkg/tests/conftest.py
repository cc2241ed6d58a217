import numpy as np
import pytest

from balancelab import ModelParams


@pytest.fixture
def params():
    """Default model parameters used throughout."""
    return ModelParams()


@pytest.fixture
def fast_params():
    """Coarse, short-delay parameters for tests that step by hand."""
    return ModelParams(gamma=50.0, alpha=22.0, beta=22.0, nu=0.6,
                       tau=0.01, dt=1e-3)


@pytest.fixture(autouse=True)
def _seed_numpy():
    np.random.seed(0)


#: One line per acceptance criterion, collected by tests/test_acceptance.py
#: and echoed after the run (the terminal summary is never captured, so the
#: PASS lines survive where per-test stdout would be swallowed).
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
