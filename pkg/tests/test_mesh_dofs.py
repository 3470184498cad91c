import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpstmg.dofs import apply_dirichlet, build_pressure_space, build_velocity_space, project_mean_zero
from hpstmg.mesh import build_cartesian, cells_of_vertex, enumerate_vertex_star_patches


def test_levels_and_sizes(unit_mesh):
    assert unit_mesh.level_count == 4
    assert [unit_mesh[s].n_cells for s in range(4)] == [1, 4, 16, 64]
    np.testing.assert_allclose(unit_mesh[3].h, [0.125, 0.125])
    with pytest.raises(IndexError):
        unit_mesh[4]


def test_children_and_parent_consistent(unit_mesh):
    for s in range(3):
        pc = unit_mesh.parent_child(s)
        assert sorted(pc.ravel().tolist()) == list(range(unit_mesh[s + 1].n_cells))
        for c, kids in enumerate(pc):
            np.testing.assert_array_equal(unit_mesh.parent(s + 1, kids), c)


def test_vertex_stars(unit_mesh):
    lvl = unit_mesh[2]
    sizes = [len(c) for c in lvl.vertex_to_cells]
    # 4 corners with one cell, 12 edge vertices with two, 9 interior with four
    assert sorted(set(sizes)) == [1, 2, 4]
    assert sizes.count(1) == 4 and sizes.count(2) == 12 and sizes.count(4) == 9
    assert cells_of_vertex(unit_mesh, 2, 6) == [0, 1, 4, 5]
    assert len(enumerate_vertex_star_patches(unit_mesh, 2)) == 25
    with pytest.raises(KeyError):
        cells_of_vertex(unit_mesh, 2, 25)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20))
@settings(max_examples=30, deadline=None)
def test_locate_to_reference_in_cell(pts):
    mesh = build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, 3)
    lvl = mesh[2]
    p = np.array(pts)
    xi = lvl.to_reference(p, lvl.locate(p))
    assert np.all(xi >= -1 - 1e-12) and np.all(xi <= 1 + 1e-12)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_space_dimensions(unit_mesh, r):
    vs, ps = build_velocity_space(unit_mesh, 2, r), build_pressure_space(unit_mesh, 2, r)
    assert vs.n_dofs == 2 * (4 * (r + 1) + 1) ** 2
    assert ps.n_dofs == 16 * (r + 1) * (r + 2) // 2
    assert vs.boundary_mask.sum() == 2 * 4 * 4 * (r + 1)


@pytest.mark.parametrize("r", [1, 2])
def test_velocity_interpolation_exact_for_polynomials(unit_mesh, r):
    vs = build_velocity_space(unit_mesh, 2, r)
    f = lambda x: np.column_stack([x[:, 0] ** (r + 1) * x[:, 1], 1 - x[:, 1] ** 2])
    coef = vs.interpolate(f)
    pts = np.random.default_rng(0).random((50, 2))
    np.testing.assert_allclose(vs.evaluate(coef, pts), f(pts), atol=1e-12)
    g = vs.evaluate(coef, pts, gradient=True)
    np.testing.assert_allclose(g[:, 0, 0], (r + 1) * pts[:, 0] ** r * pts[:, 1], atol=1e-11)
    np.testing.assert_allclose(g[:, 1, 1], -2 * pts[:, 1], atol=1e-11)


def test_pressure_projection_exact_for_pr(unit_mesh):
    ps = build_pressure_space(unit_mesh, 2, 2)
    f = lambda x: 1 + x[:, 0] * x[:, 1] - x[:, 0] ** 2
    pts = np.random.default_rng(1).random((40, 2))
    np.testing.assert_allclose(ps.evaluate(ps.interpolate(f), pts), f(pts), atol=1e-13)


def test_mean_vector_integrates(unit_mesh):
    ps = build_pressure_space(unit_mesh, 3, 2)
    p = ps.interpolate(lambda x: x[:, 0] ** 2)
    assert p @ ps.mean_vector == pytest.approx(1 / 3, abs=1e-14)
    q = project_mean_zero(p, ps)
    assert abs(q @ ps.mean_vector) < 1e-15
    stack = project_mean_zero(np.vstack([p, 2 * p]), ps)
    np.testing.assert_allclose(stack @ ps.mean_vector, 0, atol=1e-14)
    with pytest.raises(ValueError):
        project_mean_zero(p[:-1], ps)


def test_apply_dirichlet_modes(unit_mesh):
    vs = build_velocity_space(unit_mesh, 1, 1)
    v = np.ones(vs.n_dofs)
    z = apply_dirichlet(v, vs)
    assert np.all(z[vs.boundary_mask] == 0) and np.all(z[~vs.boundary_mask] == 1)
    s = apply_dirichlet(v, vs, "set_values", lambda p, t: np.column_stack([p[:, 0] + t, 0 * p[:, 0]]), 2.0)
    bn = np.flatnonzero(vs.scalar_boundary_mask)
    np.testing.assert_allclose(s[bn], vs.node_coords[bn, 0] + 2.0)
    with pytest.raises(ValueError):
        apply_dirichlet(v, vs, "bogus")


def test_three_d_spaces_rejected():
    mesh = build_cartesian(([0, 0, 0], [1, 1, 1]), 1, 1)
    with pytest.raises(NotImplementedError):
        build_velocity_space(mesh, 0, 1)
