import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpstmg.fe_basis import (gauss_lobatto_points, gauss_radau_right, gauss_rule, lagrange_basis,
                             legendre_1d, pdisc_basis)
from hpstmg.time_basis import dg_ode_step, temporal_basis, temporal_matrices

S6 = np.sqrt(6.0)


def test_radau_two_point_closed_form():
    q = gauss_radau_right(2)
    np.testing.assert_allclose(q.points, [-1 / 3, 1.0], atol=1e-14)
    np.testing.assert_allclose(q.weights, [1.5, 0.5], atol=1e-14)


def test_radau_three_point_closed_form():
    # c = (4 -+ sqrt6)/10, 1 on [0, 1]; b = (16 -+ sqrt6)/36, 1/9
    q = gauss_radau_right(3)
    np.testing.assert_allclose(q.points, [(-1 - S6) / 5, (-1 + S6) / 5, 1.0], atol=1e-14)
    np.testing.assert_allclose(q.weights, [(16 - S6) / 18, (16 + S6) / 18, 2 / 9], atol=1e-14)


@pytest.mark.parametrize("n", range(1, 7))
def test_radau_exact_degree(n):
    q = gauss_radau_right(n)
    assert q.points[-1] == 1.0
    assert q.degree == 2 * n - 2
    for p in range(2 * n - 1):
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert abs(q.integrate(lambda x: x**p) - exact) < 1e-13
    if n > 1:
        p = 2 * n - 1
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert abs(q.integrate(lambda x: x**p) - exact) > 1e-6


def test_rules_reject_bad_n():
    for f in (gauss_rule, gauss_radau_right):
        with pytest.raises(ValueError):
            f(0)
    with pytest.raises(ValueError):
        gauss_lobatto_points(1)


def test_lobatto_points_symmetric():
    x = gauss_lobatto_points(5)
    np.testing.assert_allclose(x, -x[::-1], atol=1e-15)
    np.testing.assert_allclose(x[1:4], [-np.sqrt(3 / 7), 0.0, np.sqrt(3 / 7)], atol=1e-14)


@given(st.integers(1, 6), st.floats(-1, 1))
@settings(max_examples=40, deadline=None)
def test_lagrange_partition_of_unity(n, x):
    b = lagrange_basis(gauss_lobatto_points(n + 1))
    assert abs(b.value(np.array([x])).sum() - 1.0) < 1e-12
    assert abs(b.derivative(np.array([x])).sum()) < 1e-10


def test_lagrange_is_nodal():
    nodes = gauss_lobatto_points(4)
    np.testing.assert_allclose(lagrange_basis(nodes).value(nodes), np.eye(4), atol=1e-14)


def test_legendre_derivative_matches_numpy():
    x = np.linspace(-1, 1, 7)
    P, dP = legendre_1d(4, x)
    c = np.zeros(5)
    c[4] = 1
    np.testing.assert_allclose(P[:, 4], np.polynomial.legendre.legval(x, c), atol=1e-13)
    np.testing.assert_allclose(dP[:, 4], np.polynomial.legendre.legval(x, np.polynomial.legendre.legder(c)),
                               atol=1e-12)


def test_pdisc_rejects_r0():
    with pytest.raises(ValueError):
        pdisc_basis(0, 2)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_pdisc_dimension_and_orthogonality(r):
    b = pdisc_basis(r, 2)
    assert b.dim == (r + 1) * (r + 2) // 2
    q = gauss_rule(r + 2)
    X, Y = np.meshgrid(q.points, q.points)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    W = np.outer(q.weights, q.weights).ravel()
    phi = b.evaluate(pts)
    G = phi.T @ (W[:, None] * phi)
    np.testing.assert_allclose(G, np.diag(b.ref_norms), atol=1e-13)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_temporal_mass_is_diagonal(k):
    tm = temporal_matrices(k, 0.3)
    q = gauss_radau_right(k + 1)
    np.testing.assert_allclose(tm.M, 0.15 * np.diag(q.weights), atol=1e-15)
    # K is tau-free and K + K^T = e_L e_L^T + e_R e_R^T (integration by parts)
    left = temporal_basis(k).value(np.array([-1.0]))[0]
    right = np.eye(k + 1)[-1]
    np.testing.assert_allclose(tm.K + tm.K.T, np.outer(left, left) + np.outer(right, right), atol=1e-12)
    np.testing.assert_allclose(tm.left_values, left, atol=1e-14)


def test_temporal_matrices_validate():
    with pytest.raises(ValueError):
        temporal_matrices(-1, 0.1)
    with pytest.raises(ValueError):
        temporal_matrices(1, 0.0)


def _radau_iia_closed(s, z):
    # stability functions written out for s = 1, 2, 3 (Pade (s-1, s))
    if s == 1:
        return 1 / (1 - z)
    if s == 2:
        return (1 + z / 3) / (1 - 2 * z / 3 + z**2 / 6)
    return (1 + 2 * z / 5 + z**2 / 20) / (1 - 3 * z / 5 + 3 * z**2 / 20 - z**3 / 60)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("z", [-0.1, -1.0, -4.0, -50.0])
def test_dg_matches_closed_form_pade(k, z):
    assert abs(dg_ode_step(k, 1.0, z, 1.0) - _radau_iia_closed(k + 1, z)) < 1e-12


def test_dg_step_scales_with_tau():
    assert dg_ode_step(2, 0.5, -2.0, 3.0) == pytest.approx(3.0 * dg_ode_step(2, 1.0, -1.0, 1.0), rel=1e-13)


def test_dg_polynomial_exact():
    # y' = 0 keeps constants for every k
    for k in range(4):
        assert dg_ode_step(k, 0.7, 0.0, 2.5) == pytest.approx(2.5, abs=1e-14)
