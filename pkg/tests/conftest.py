import numpy as np
import pytest
from hypothesis import settings

from qmemcap.channel import MemoryChannel, depolarizing_channel
from qmemcap.markov import MarkovChain

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

TWO_BRANCH_Q = [[0.9, 0.1], [0.2, 0.8]]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def two_branch():
    chain = MarkovChain(TWO_BRANCH_Q)
    return MemoryChannel(chain, (depolarizing_channel(0.1), depolarizing_channel(0.9)))


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion; lines are repeated in the terminal summary."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
