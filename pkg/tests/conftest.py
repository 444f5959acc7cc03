import numpy as np
import pytest

from wellgeo.geodesic import SolveOptions, minimize_E
from wellgeo.potential import make_alikakos_fusco, make_double_well, make_oscillatory, make_six_well

SIX_WELL_TEXT = "x^2*(1-x^2)^2+(y^2-0.5*(1-x^2)^2)^2+(z^2-0.5*(1-x^2)^2)^2"


def all_builtins():
    return {
        "double_well": make_double_well(),
        "alikakos_fusco": make_alikakos_fusco(0.5),
        "six_well": make_six_well(),
        "oscillatory": make_oscillatory([-1.0, 0.0], [1.0, 0.0]),
    }


def random_points_away_from_wells(pot, n, rng, min_dist=0.05, spread=1.5):
    pts = []
    while len(pts) < n:
        p = rng.uniform(-spread, spread, pot.dimension)
        if np.min(np.linalg.norm(pot.well_points - p, axis=1)) > min_dist:
            pts.append(p)
    return np.array(pts)


@pytest.fixture(scope="session")
def double_well():
    return make_double_well()


@pytest.fixture(scope="session")
def six_well():
    return make_six_well()


@pytest.fixture(scope="session")
def dw_geodesic(double_well):
    return minimize_E(double_well, [-1.0, 0.0], [1.0, 0.0], SolveOptions())


@pytest.fixture(scope="session")
def dw_geodesic_512(double_well):
    return minimize_E(double_well, [-1.0, 0.0], [1.0, 0.0], SolveOptions(node_count=512))


ACCEPTANCE_LINES = []


def record(criterion, ok, detail, elapsed=None, limit=None):
    """Log one acceptance verdict; a runtime over ``limit`` seconds fails the criterion."""
    if limit is not None and elapsed is not None and elapsed >= limit:
        ok = False
        detail += f"; runtime {elapsed:.1f}s over {limit:g}s"
    elif elapsed is not None:
        detail += f"; {elapsed:.1f}s"
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
