import hypothesis
import numpy as np
import pytest

from fedincentive.server import SystemParams

hypothesis.settings.register_profile("default", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

np.seterr(all="raise", under="ignore")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def default_params():
    return SystemParams(lam=20.0, d=1000, eta=0.1, T=500, m=1000, L=1.0)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
