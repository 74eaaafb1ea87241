import numpy as np
import pytest
from hypothesis import strategies as st

from ncfem.study import PARALLELOGRAM_PLATE, SQUARE_SINE


@pytest.fixture(scope="session")
def sine():
    return SQUARE_SINE


@pytest.fixture(scope="session")
def plate_problem():
    return PARALLELOGRAM_PLATE


def random_triangle(rng, min_area=0.05):
    """Counterclockwise triangle with vertices in [-1, 1]^2 and area >= min_area."""
    while True:
        p = rng.uniform(-1.0, 1.0, size=(3, 2))
        d1, d2 = p[1] - p[0], p[2] - p[0]
        area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
        if abs(area) >= min_area:
            return p if area > 0 else p[[0, 2, 1]]


@st.composite
def triangles(draw, count=1):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return np.stack([random_triangle(rng) for _ in range(count)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
