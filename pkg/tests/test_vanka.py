import numpy as np
import pytest

from conftest import homogeneous, make_operator
from oracles import dense_operator, dense_vanka
from hpstmg.vanka import (apply_additive, build_cell_patches, build_patches, build_vertex_star_patches,
                          cell_block_size, tensor_block_size, smooth_step)


@pytest.mark.parametrize("r,k", [(1, 0), (1, 1), (2, 1), (2, 2)])
def test_cell_sweep_matches_dense_oracle(unit_mesh, r, k, rng):
    op = make_operator(unit_mesh, 2, r, k)
    W = dense_vanka(op, [[c] for c in range(16)])
    ps = build_cell_patches(op)
    for _ in range(3):
        x = rng.standard_normal(op.size)
        ref = W @ x
        assert np.linalg.norm(apply_additive(ps, x) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_vertex_star_sweep_matches_dense_oracle(unit_mesh, rng):
    op = make_operator(unit_mesh, 2, 1, 1)
    lvl = op.vspace.level
    W = dense_vanka(op, lvl.vertex_to_cells)
    ps = build_vertex_star_patches(op)
    assert len(ps) == lvl.n_vertices
    x = rng.standard_normal(op.size)
    np.testing.assert_allclose(apply_additive(ps, x), W @ x, rtol=1e-11, atol=1e-12)


def test_interior_patch_size(unit_mesh):
    op = make_operator(unit_mesh, 2, 2, 1)
    ps = build_cell_patches(op, keep_matrices=True)
    # cell 5 of the 4x4 mesh has no boundary nodes
    assert ps.sizes[5] == cell_block_size(1, 2) == 2 * (2 * 16 + 6)
    assert tensor_block_size(1, 2) == 2 * (2 * 16 + 9)
    p = ps.patch(5)
    np.testing.assert_allclose(p.matrix @ p.inverse, np.eye(p.size), atol=1e-10)
    assert ps.stats()["sum_nT2"] == ps.sum_nt2 == int((ps.sizes.astype(int) ** 2).sum())


def test_weights_are_inverse_valence(unit_mesh):
    op = make_operator(unit_mesh, 2, 1, 0)
    ps = build_vertex_star_patches(op)
    assert ps.n_singular == 0
    count = np.bincount(ps.index.ravel(), minlength=op.size + 1)[: op.size]
    np.testing.assert_allclose(ps.weights[count > 0], 1.0 / count[count > 0])
    assert not ps.weights[op.constrained_mask].any()


def test_single_cell_patch_is_exact(unit_mesh, rng):
    # on a 1x1 mesh the only patch covers every free dof and holds the pressure
    # constant, so it is singular; the pseudo-inverse still solves consistent systems
    op = make_operator(unit_mesh, 0, 2, 1)
    with pytest.warns(RuntimeWarning):
        ps = build_cell_patches(op)
    x_true = homogeneous(op, rng.standard_normal(op.size))
    D = dense_operator(op)
    b = D @ x_true
    u = smooth_step(ps, op, b, np.zeros(op.size), omega=1.0)
    np.testing.assert_allclose(D @ u, b, atol=1e-10)


def test_smooth_step_fixed_point_and_omega(unit_mesh, rng):
    op = make_operator(unit_mesh, 2, 1, 1)
    ps = build_cell_patches(op)
    x = homogeneous(op, rng.standard_normal(op.size))
    b = op(x)
    np.testing.assert_allclose(smooth_step(ps, op, b, x, 0.8), x, atol=1e-12)
    for bad in (0.0, 1.5):
        with pytest.raises(ValueError):
            smooth_step(ps, op, b, x, bad)


def test_singular_patch_policy(unit_mesh):
    op = make_operator(unit_mesh, 1, 1, 0)
    S = op.assembled().tolil()
    S[op.size - 1, :] = 0.0  # destroy one pressure row
    with pytest.warns(RuntimeWarning):
        ps = build_patches(op, [[3]], "cell", matrix=S.tocsr())
    assert ps.n_singular == 1
    with pytest.raises(np.linalg.LinAlgError):
        build_patches(op, [[3]], "cell", singular="raise", matrix=S.tocsr())


def test_memory_cap(unit_mesh):
    op = make_operator(unit_mesh, 2, 1, 1)
    with pytest.raises(MemoryError):
        build_cell_patches(op, memory_cap=1e3)
    with pytest.raises(ValueError):
        build_cell_patches(op.with_constraints(False))
