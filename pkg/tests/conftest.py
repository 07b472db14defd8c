import sys
from pathlib import Path

import pytest

from axitomo.geometry import ConeBeamGeometry, RadialGrid

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = {}


def record_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES[str(number)] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def paper_geom():
    """Source/detector layout of the experiments, detector covering the unit cylinder."""
    return ConeBeamGeometry(source_x=40.0, detector_x=-50.0, pitch_y=0.005, pitch_z=0.005, p=490, q=502)


@pytest.fixture
def small_grid():
    return RadialGrid(m=8, n=8, dr=0.125, dz=0.125)


@pytest.fixture
def small_geom():
    return ConeBeamGeometry(source_x=40.0, detector_x=-50.0, pitch_y=2.5 / 8, pitch_z=2.5 / 8, p=8, q=8)


@pytest.fixture(scope="session")
def desk32():
    """Desk instance: 32x32 half-grid over the unit cylinder, detector pitch equal to dr."""
    from axitomo.projector import build_system_matrix, operator_norm

    grid = RadialGrid(m=32, n=32, dr=1 / 32, dz=1 / 32)
    geom = ConeBeamGeometry(source_x=40.0, detector_x=-50.0, pitch_y=1 / 32, pitch_z=1 / 32, p=79, q=81)
    A = build_system_matrix(geom, grid)
    return grid, geom, A, operator_norm(A, 200)
