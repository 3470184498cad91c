import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpstmg.dofs import build_pressure_space, build_velocity_space
from hpstmg.fe_basis import gauss_radau_right
from hpstmg.harness import problems
from hpstmg.harness.cavity import cavity_demo_2d, write_cavity_csv
from hpstmg.harness.errors import compute_errors, eoc
from hpstmg.harness.plotting import plot_cavity, plot_convergence, plot_robustness
from hpstmg.harness.studies import (CONVERGENCE_COLUMNS, StudySettings, convergence_study,
                                    robustness_sweep, write_convergence_csv, write_robustness_csv)
from hpstmg.mesh import build_cartesian

PROB = problems.manufactured_problem()
TIME_FACTOR = 0.5 - np.sin(2.0) / 4.0  # int_0^1 sin^2 t dt


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 3))
@settings(max_examples=50, deadline=None)
def test_manufactured_velocity_divergence_free(x, y, t):
    g = PROB.velocity_gradient(np.array([[x, y]]), t)
    assert abs(g[0, 0, 0] + g[0, 1, 1]) < 1e-13


def test_manufactured_values():
    pts = np.random.default_rng(0).random((20, 2))
    assert not PROB.initial_velocity(pts).any()
    for t in (0.3, 1.0):
        assert PROB.pressure(np.array([[0.25, 0.25]]), t)[0] == pytest.approx(np.sin(t) / 4, abs=1e-15)
    np.testing.assert_allclose(PROB.dirichlet(pts, 0.4), PROB.velocity(pts, 0.4))


def test_forcing_matches_finite_differences():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.05, 0.95, (30, 2))
    h = 1e-4
    for t in (0.2, 0.9):
        vt = (PROB.velocity(pts, t + h) - PROB.velocity(pts, t - h)) / (2 * h)
        lap = np.zeros_like(vt)
        grad_p = np.zeros_like(vt)
        for ax in range(2):
            e = np.zeros(2)
            e[ax] = h
            lap += (PROB.velocity(pts + e, t) - 2 * PROB.velocity(pts, t) + PROB.velocity(pts - e, t)) / h**2
            grad_p[:, ax] = (PROB.pressure(pts + e, t) - PROB.pressure(pts - e, t)) / (2 * h)
        np.testing.assert_allclose(PROB.forcing(pts, t), vt - PROB.nu * lap + grad_p, atol=1e-6)


def test_zero_solution_error_equals_exact_norm():
    mesh = build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, 3)
    vs, ps = build_velocity_space(mesh, 2, 2), build_pressure_space(mesh, 2, 2)
    k, tau = 2, 0.25
    zero = [np.zeros((k + 1) * (vs.n_dofs + ps.n_dofs))] * 4
    rep = compute_errors(zero, (vs, ps), PROB, tau, k)
    assert rep.e_v_L2 == pytest.approx(np.sqrt(TIME_FACTOR * 3 / 32), rel=1e-9)
    assert rep.e_p_L2 == pytest.approx(np.sqrt(TIME_FACTOR / 64), rel=1e-9)
    assert rep.e_div == 0.0


def _interpolated_trajectory(c, r, k):
    mesh = build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, c + 1)
    vs, ps = build_velocity_space(mesh, c, r), build_pressure_space(mesh, c, r)
    N = 2**c
    tau = 1.0 / N
    q = gauss_radau_right(k + 1)
    traj = []
    for n in range(N):
        ts = n * tau + 0.5 * tau * (q.points + 1)
        V = [vs.interpolate(PROB.velocity, t) for t in ts]
        P = [-ps.interpolate(PROB.pressure, t) for t in ts]
        traj.append(np.concatenate(V + P))
    return traj, (vs, ps), tau


def test_interpolation_errors_decrease():
    reps = []
    for c in (1, 2, 3):
        traj, spaces, tau = _interpolated_trajectory(c, 2, 2)
        reps.append(compute_errors(traj, spaces, PROB, tau, 2))
    ev = [r.e_v_L2 for r in reps]
    ep = [r.e_p_L2 for r in reps]
    assert all(e > 0 for e in ev) and ev[0] > ev[1] > ev[2]
    assert ep[0] > ep[1] > ep[2]
    assert eoc(ep)[-1] == pytest.approx(3.0, abs=0.3)
    assert all(r.e_v_Linf > 0 for r in reps)


def test_eoc():
    assert eoc([1.0, 0.25, 0.0625]) == [None, 2.0, 2.0]
    assert eoc([1.0, 0.0]) == [None, None]


def test_cavity_boundary_data():
    cav = problems.cavity_problem()
    pts = np.array([[0.0, 1.0], [1.0, 1.0], [0.5, 1.0], [0.5, 0.0], [0.0, 0.5]])
    g = cav.dirichlet(pts, 2.0)  # lid speed sin(pi/2) = 1
    np.testing.assert_allclose(g[:, 0], [0, 0, 1, 0, 0])
    assert not g[:, 1].any()
    assert cav.T == 8.0 and cav.probes == ((0.875, 0.125), (0.875, 0.875))


def test_cavity_trace_and_csv(tmp_path):
    tr = cavity_demo_2d(1, 1, steps=4)
    assert len(tr.t) == 4 and tr.t[0] == pytest.approx(8.0 / 32)
    assert all(np.isfinite(tr.p1))
    for s in tr.march.steps:
        assert s.div_ratio < 1e-6
    path = write_cavity_csv(tr, tmp_path / "cav.csv")
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["t", "p_probe1", "p_probe2", "p_diff"] and len(rows) == 4
    assert plot_cavity([tr], tmp_path / "cav.png").stat().st_size > 0


def test_convergence_study_small(tmp_path):
    st_ = StudySettings(rtol=1e-10)
    rows = convergence_study([1], [1, 2], st_)
    assert rows[0].eocs["v"] is None and rows[1].eocs["v"] > 1.5
    assert not any(r.saturated for r in rows)
    path = write_convergence_csv(rows, tmp_path / "conv.csv")
    header = next(csv.reader(path.open()))
    assert header == CONVERGENCE_COLUMNS
    assert plot_convergence(rows, tmp_path / "conv.png").exists()


@pytest.mark.filterwarnings("ignore:1 singular vertex_star")
def test_robustness_sweep_small(tmp_path):
    st_ = StudySettings(steps=1)
    rows = robustness_sweep([1], [1], ("cell", "vertex_star"), (1, 2), ("hp", "h"), st_)
    assert len(rows) == 8
    assert all(r.steps == 1 and r.avg_iters > 0 for r in rows)
    path = write_robustness_csv(rows, tmp_path / "rob.csv")
    assert "sum_nT2" in path.read_text().splitlines()[0]
    assert plot_robustness(rows, tmp_path / "rob.png").exists()
