import numpy as np
import pytest

from fkchain.model import PeriodicConfiguration


def random_config(rng, p, q, amp=0.1):
    return PeriodicConfiguration(np.arange(q) * (p / q) + rng.uniform() + rng.uniform(-amp, amp, q), p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
