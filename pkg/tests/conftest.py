import numpy as np
import pytest

from hpstmg.dofs import build_pressure_space, build_velocity_space
from hpstmg.mesh import build_cartesian
from hpstmg.operators import SpaceTimeBlockOperator, SpatialOperators
from hpstmg.time_basis import temporal_matrices


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def unit_mesh():
    """Unit square, levels 0..3 (1x1 up to 8x8 cells)."""
    return build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, 4)


def make_operator(mesh, s, r, k, tau=0.25, nu=0.1, constrained=True):
    vs, ps = build_velocity_space(mesh, s, r), build_pressure_space(mesh, s, r)
    return SpaceTimeBlockOperator(SpatialOperators(vs, ps), temporal_matrices(k, tau), nu, constrained)


def homogeneous(op, x):
    x = np.array(x, dtype=float)
    x[op.constrained_mask] = 0.0
    return x


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
