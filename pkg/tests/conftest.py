import math

import numpy as np
import pytest

from lyapkernel.cantor import DigitPair, digit_matrices
from lyapkernel.kernel import WeightedFamily
from lyapkernel.projective import Matrix2

ACCEPTANCE_LINES: list[str] = []

MIDDLE_FIFTH = [Matrix2(4, 0, 2, 1), Matrix2(2, 1, 1, 2), Matrix2(1, 2, 2, 1), Matrix2(2, 1, 1, 2), Matrix2(1, 2, 0, 4)]
# a known positivizing conjugator for the middle-fifth family (validation path)
REFERENCE_P = Matrix2(
    -0.261646226625829, 1.389794351490291, 1.389802378509709, -0.261652943374171
)
LAMBDA_MIDDLE_FIFTH = 1.159357955327188283472158428142891438639948104124
DIM_MIDDLE_FIFTH = 0.72034959930438388515519106200202201292606347


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run slow checks (census b=8)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: needs --slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    def record(number: int, ok: bool, text: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
        return ok

    return record


def random_positive_family(rng, size=None, lo=0.5, hi=3.0) -> WeightedFamily:
    k = int(rng.integers(1, 4)) if size is None else size
    mats = [Matrix2(*map(float, rng.uniform(lo, hi, 4))) for _ in range(k)]
    w = rng.uniform(0.2, 1.0, k)
    w = w / w.sum()
    w[-1] = 1.0 - math.fsum(w[:-1])
    return WeightedFamily(tuple(mats), tuple(float(x) for x in w))


@pytest.fixture
def middle_fifth() -> WeightedFamily:
    return WeightedFamily.uniform(MIDDLE_FIFTH)


@pytest.fixture
def middle_fifth_conjugated() -> WeightedFamily:
    return WeightedFamily.uniform(MIDDLE_FIFTH).conjugated(REFERENCE_P)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def middle_third_pair():
    return DigitPair(3, (0, 2), (0, 2))


def middle_third_matrices():
    return digit_matrices(middle_third_pair())


def random_nonnegative_family(rng, size=None, min_det=0.05) -> WeightedFamily:
    """Invertible non-negative family with at least one zero entry overall.

    Entries are 0 with probability 1/4 and uniform in [0.2, 3] otherwise.
    """
    k = int(rng.integers(1, 4)) if size is None else size
    while True:
        mats = []
        while len(mats) < k:
            e = rng.uniform(0.2, 3.0, 4)
            e[rng.random(4) < 0.25] = 0.0
            m = Matrix2(*map(float, e))
            if abs(m.det) >= min_det:
                mats.append(m)
        if any(x == 0.0 for m in mats for x in m.entries()):
            break
    w = rng.uniform(0.2, 1.0, k)
    w = w / w.sum()
    w[-1] = 1.0 - math.fsum(w[:-1])
    return WeightedFamily(tuple(mats), tuple(float(x) for x in w))
