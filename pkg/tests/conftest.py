from __future__ import annotations

import numpy as np
import pytest

from corraloha.model import CorrelationMatrix, NetworkModel, generate_correlation


def random_instance(rng: np.random.Generator, n: int, hi: float = 0.5, q_lo: float = 0.01, q_hi: float = 0.9):
    C = generate_correlation(n, 1.0, (0.0, hi), 1.0, int(rng.integers(2**31)))
    q = rng.uniform(q_lo, q_hi, n)
    return NetworkModel(C, 20), q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_sensor():
    return NetworkModel(CorrelationMatrix.identity(2), 2)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
