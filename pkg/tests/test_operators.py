import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import homogeneous, make_operator
from hpstmg.operators import assemble_sparse_oracle, assemble_spatial_oracle


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("s", [1, 2])
def test_spatial_kernels_match_oracle(unit_mesh, r, s, rng):
    op = make_operator(unit_mesh, s, r, 1)
    so = op.spatial
    M, A, B, Mp = assemble_spatial_oracle(op.vspace, op.pspace, so.n_quad)
    for _ in range(3):
        v = rng.standard_normal(op.vspace.n_dofs)
        p = rng.standard_normal(op.pspace.n_dofs)
        for got, ref in ((so.apply_velocity_mass(v), M @ v), (so.apply_laplace(v), A @ v),
                         (so.apply_div(v), B @ v), (so.apply_div_transpose(p), B.T @ p),
                         (so.apply_pressure_mass(p), Mp @ p)):
            assert np.linalg.norm(got - ref) <= 1e-12 * np.linalg.norm(ref)


def test_mass_and_laplace_closed_forms(unit_mesh):
    op = make_operator(unit_mesh, 2, 2, 0)
    vs, so = op.vspace, op.spatial
    one = vs.interpolate(lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]))
    xfield = vs.interpolate(lambda x: np.column_stack([x[:, 0], np.zeros(len(x))]))
    assert one @ so.apply_velocity_mass(one) == pytest.approx(1.0, abs=1e-13)
    assert np.abs(so.apply_laplace(one)).max() < 1e-12
    assert xfield @ so.apply_laplace(xfield) == pytest.approx(1.0, abs=1e-12)
    # B (x, 0) = int 1 * psi = mean vector;  (x, -y) is divergence-free
    np.testing.assert_allclose(so.apply_div(xfield), op.pspace.mean_vector, atol=1e-13)
    sol = vs.interpolate(lambda x: np.column_stack([x[:, 0], -x[:, 1]]))
    assert np.abs(so.apply_div(sol)).max() < 1e-13


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("constrained", [True, False])
def test_block_operator_matches_oracle(unit_mesh, k, constrained, rng):
    op = make_operator(unit_mesh, 2, 2, k, constrained=constrained)
    D = assemble_sparse_oracle(op)
    X = rng.standard_normal((4, op.size))
    for x in X:
        ref = D @ x
        assert np.linalg.norm(op(x) - ref) <= 1e-12 * np.linalg.norm(ref)
    assert abs(op.assembled() - D).max() < 1e-12


def test_constrained_rows_are_identity(unit_mesh, rng):
    op = make_operator(unit_mesh, 2, 1, 1)
    x = rng.standard_normal(op.size)
    y = op(x)
    m = op.constrained_mask
    np.testing.assert_array_equal(y[m], x[m])
    # constrained columns do not leak into the free rows
    x2 = x.copy()
    x2[m] = rng.standard_normal(m.sum())
    np.testing.assert_allclose(op(x2)[~m], y[~m], atol=1e-12)


def test_coupling_uses_left_values(unit_mesh, rng):
    op = make_operator(unit_mesh, 1, 1, 2)
    v = rng.standard_normal(op.vspace.n_dofs)
    V, P = op.layout.split(op.apply_coupling(v))
    Mv = op.spatial.apply_velocity_mass(v)
    np.testing.assert_allclose(V, np.outer(op.temporal.left_values, Mv), atol=1e-14)
    assert not P.any()
    with pytest.raises(ValueError):
        op.apply_coupling(v[:-1])


def test_rhs_integrates_constant_forcing(unit_mesh):
    op = make_operator(unit_mesh, 1, 1, 1, tau=0.5)
    f = lambda x, t: np.column_stack([np.ones(len(x)), np.zeros(len(x))])
    V, _ = op.layout.split(op.assemble_rhs(f, 0.0))
    # sum of all x-entries = tau * area
    assert V[:, : op.vspace.n_scalar].sum() == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(op.node_times(1.0), [1.0 + 0.25 * (2 / 3), 1.5], atol=1e-15)


@given(st.floats(0.01, 1.0), st.floats(0.01, 2.0))
@settings(max_examples=10, deadline=None)
def test_velocity_block_symmetric_part_positive(tau, nu):
    from hpstmg.mesh import build_cartesian

    mesh = build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, 2)
    op = make_operator(mesh, 1, 1, 1, tau=tau, nu=nu)
    x = np.random.default_rng(5).standard_normal(op.size)
    x = homogeneous(op, x)
    V, _ = op.layout.split(x)
    z = op.layout.join(V, np.zeros((op.layout.nb, op.layout.n_p)))
    assert z @ op(z) > 0
