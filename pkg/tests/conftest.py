from pathlib import Path

import numpy as np
import pytest

from nitsche_iga.spline_core import KnotVector, NurbsPatch

FIXTURES = Path(__file__).parent / "fixtures"

EXAMPLE_KNOTS = [0, 0, 0, 1, 2, 3, 4, 4, 5, 5, 5]


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def example_kv():
    return KnotVector(EXAMPLE_KNOTS, 2)


def quarter_circle() -> NurbsPatch:
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    return NurbsPatch([kv], [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], [1.0, np.sqrt(2) / 2, 1.0])


def annulus_sector(nel=(2, 1)) -> NurbsPatch:
    """Quarter annulus 1 <= r <= 2, curved in the first direction (clockwise
    so that the map is orientation preserving)."""
    from nitsche_iga.mesh import insert_knots

    kv1 = KnotVector([0, 0, 0, 1, 1, 1], 2)
    kv2 = KnotVector([0, 0, 1, 1], 1)
    s = np.sqrt(2) / 2
    pts, w = [], []
    for r in (1.0, 2.0):
        pts += [[0.0, r], [r, r], [r, 0.0]]
        w += [1.0, s, 1.0]
    patch = NurbsPatch([kv1, kv2], pts, w)
    for d, n in enumerate(nel):
        if n > 1:
            patch = insert_knots(patch, d, np.linspace(0, 1, n + 1)[1:-1])
    return patch


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
