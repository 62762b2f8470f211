import sys
from pathlib import Path

import numpy as np
import pytest

from spsatune import ParameterSpace, ParameterSpec, SyntheticObjective, get_synthetic

TESTS = Path(__file__).resolve().parent
DATA = TESTS / "data"
REPO = TESTS.parent
FAKE_BENCH = TESTS / "fake_bench.py"
PYTHON = sys.executable


def real_space(n, lo=0.0, hi=1.0, default=0.5):
    return ParameterSpace([ParameterSpec.real(f"x{i}", lo, hi, default) for i in range(n)])


def integer_space(n, lo=0, hi=100, default=90):
    return ParameterSpace([ParameterSpec.integer(f"k{i}", lo, hi, default) for i in range(n)])


def quadratic_objective(space, center=0.3, noise=0.0):
    return SyntheticObjective(get_synthetic("quadratic", center=center), space, noise)


def strip_wall(rows):
    return [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
