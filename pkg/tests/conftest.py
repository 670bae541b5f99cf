import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def enumerate_pmf(probs):
    """Brute-force PMF of a sum of Bernoullis by walking all 2^n outcomes."""
    probs = list(probs)
    out = np.zeros(len(probs) + 1)
    for bits in itertools.product((0, 1), repeat=len(probs)):
        w = 1.0
        for b, p in zip(bits, probs):
            w *= p if b else 1.0 - p
        out[sum(bits)] += w
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
