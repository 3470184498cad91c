"""Degree-of-freedom spaces: continuous Q_{r+1}^d velocity, discontinuous P_r pressure.

Only two space dimensions are implemented for the discrete spaces.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .fe_basis import gauss_lobatto_points, gauss_rule, pdisc_basis, velocity_basis_1d
from .mesh import Mesh, MeshLevel

__all__ = [
    "VelocitySpace",
    "PressureSpace",
    "build_velocity_space",
    "build_pressure_space",
    "project_mean_zero",
    "apply_dirichlet",
]


def _require_2d(lvl: MeshLevel):
    if lvl.dim != 2:
        raise NotImplementedError("discrete spaces are implemented for d = 2 only")


class VelocitySpace:
    """Continuous, vector-valued Q_{r+1} space on one mesh level.

    Scalar nodes form a tensor grid of Gauss-Lobatto points; the vector
    layout is component-major ``[u_x(all nodes), u_y(all nodes)]``.
    """

    def __init__(self, lvl: MeshLevel, r: int):
        _require_2d(lvl)
        if r < 1:
            raise ValueError("velocity space needs r >= 1 (degree r+1)")
        self.level = lvl
        self.r = r
        self.degree = r + 1
        self.d = lvl.dim
        self.basis = velocity_basis_1d(self.degree)
        self.n1 = self.degree + 1  # nodes per direction per cell
        ncx, ncy = lvl.cells_per_dim
        self.nodes_per_dim = (ncx * self.degree + 1, ncy * self.degree + 1)
        self.n_scalar = self.nodes_per_dim[0] * self.nodes_per_dim[1]
        self.n_dofs = self.d * self.n_scalar

    def __repr__(self):
        return f"VelocitySpace(level={self.level.level}, degree={self.degree}, n_dofs={self.n_dofs})"

    @cached_property
    def node_coords_1d(self) -> tuple[np.ndarray, np.ndarray]:
        ref = (gauss_lobatto_points(self.n1) + 1.0) / 2.0
        out = []
        for axis in range(2):
            nc = self.level.cells_per_dim[axis]
            h = self.level.h[axis]
            x = np.empty(nc * self.degree + 1)
            for c in range(nc):
                x[c * self.degree : (c + 1) * self.degree + 1] = self.level.lower[axis] + (c + ref) * h
            out.append(x)
        return tuple(out)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Scalar node coordinates, shape (n_scalar, 2)."""
        x, y = self.node_coords_1d
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def scalar_cell_dofs(self) -> np.ndarray:
        """(n_cells, n1*n1) scalar node ids; local index = j*n1 + i (x fastest)."""
        ncx, ncy = self.level.cells_per_dim
        nx = self.nodes_per_dim[0]
        cidx = self.level.cell_multi_index(np.arange(self.level.n_cells))
        loc = np.arange(self.n1)
        jj, ii = np.meshgrid(loc, loc, indexing="ij")
        gx = cidx[:, 0, None] * self.degree + ii.ravel()[None, :]
        gy = cidx[:, 1, None] * self.degree + jj.ravel()[None, :]
        return gy * nx + gx

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(n_cells, d*n1*n1) vector dof ids, component-major within the cell."""
        s = self.scalar_cell_dofs
        return np.concatenate([s + c * self.n_scalar for c in range(self.d)], axis=1)

    @cached_property
    def scalar_boundary_mask(self) -> np.ndarray:
        x, y = self.node_coords[:, 0], self.node_coords[:, 1]
        lo, hi = self.level.lower, self.level.upper
        tol = 1e-12 * float(np.max(hi - lo))
        return (
            (np.abs(x - lo[0]) < tol) | (np.abs(x - hi[0]) < tol)
            | (np.abs(y - lo[1]) < tol) | (np.abs(y - hi[1]) < tol)
        )

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return np.tile(self.scalar_boundary_mask, self.d)

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    def interpolate(self, func, t=None) -> np.ndarray:
        """Nodal interpolant of ``func(points[, t]) -> (n, d)``."""
        vals = func(self.node_coords) if t is None else func(self.node_coords, t)
        vals = np.asarray(vals, dtype=float).reshape(self.n_scalar, self.d)
        return vals.T.ravel().copy()

    def evaluate(self, coeffs, points, gradient=False):
        """Point values (n, d) or gradients (n, d, d) with ``[:, comp, axis]``."""
        pts = np.atleast_2d(points)
        cells = self.level.locate(pts)
        xi = self.level.to_reference(pts, cells)
        vx, vy = self.basis.value(xi[:, 0]), self.basis.value(xi[:, 1])
        local = coeffs[self.cell_dofs[cells]].reshape(len(pts), self.d, self.n1, self.n1)
        if not gradient:
            return np.einsum("pcji,pj,pi->pc", local, vy, vx)
        dx, dy = self.basis.derivative(xi[:, 0]), self.basis.derivative(xi[:, 1])
        h = self.level.h
        gx = np.einsum("pcji,pj,pi->pc", local, vy, dx) * (2.0 / h[0])
        gy = np.einsum("pcji,pj,pi->pc", local, dy, vx) * (2.0 / h[1])
        return np.stack([gx, gy], axis=-1)


class PressureSpace:
    """Discontinuous modal P_r space; cell ``c`` owns dofs ``c*dim .. c*dim+dim-1``."""

    def __init__(self, lvl: MeshLevel, r: int):
        _require_2d(lvl)
        self.level = lvl
        self.r = r
        self.d = lvl.dim
        self.basis = pdisc_basis(r, lvl.dim)
        self.dim_cell = self.basis.dim
        self.n_dofs = lvl.n_cells * self.dim_cell
        self.cell_dofs = np.arange(self.n_dofs).reshape(lvl.n_cells, self.dim_cell)

    def __repr__(self):
        return f"PressureSpace(level={self.level.level}, r={self.r}, n_dofs={self.n_dofs})"

    @cached_property
    def mass_diagonal(self) -> np.ndarray:
        local = self.level.cell_volume / 2**self.d * self.basis.ref_norms
        return np.tile(local, self.level.n_cells)

    @cached_property
    def const_vector(self) -> np.ndarray:
        """Coefficients of the constant function 1."""
        e = np.zeros(self.n_dofs)
        e[:: self.dim_cell] = 1.0
        return e

    @cached_property
    def mean_vector(self) -> np.ndarray:
        """``M^p e_const``: its inner product with coefficients gives the integral."""
        return self.mass_diagonal * self.const_vector

    @property
    def domain_volume(self) -> float:
        return self.level.cell_volume * self.level.n_cells

    def interpolate(self, func, t=None, n_quad=None) -> np.ndarray:
        """Cellwise L2 projection of a scalar function."""
        q = gauss_rule(n_quad or self.r + 3)
        X, Y = np.meshgrid(q.points, q.points)
        ref = np.column_stack([X.ravel(), Y.ravel()])
        W = np.outer(q.weights, q.weights).ravel()
        phi = self.basis.evaluate(ref)  # (nq, dim)
        h = self.level.h
        corners = self.level.cell_lower()
        pts = corners[:, None, :] + (ref[None, :, :] + 1.0) / 2.0 * h
        flat = pts.reshape(-1, 2)
        vals = func(flat) if t is None else func(flat, t)
        vals = np.asarray(vals, dtype=float).reshape(self.level.n_cells, -1)
        proj = (vals * W) @ phi / self.basis.ref_norms
        return proj.ravel()

    def evaluate(self, coeffs, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        cells = self.level.locate(pts)
        xi = self.level.to_reference(pts, cells)
        phi = self.basis.evaluate(xi)
        return np.einsum("pm,pm->p", phi, coeffs[self.cell_dofs[cells]])


def build_velocity_space(mesh: Mesh, level: int, r: int) -> VelocitySpace:
    return VelocitySpace(mesh[level], r)


def build_pressure_space(mesh: Mesh, level: int, r: int) -> PressureSpace:
    return PressureSpace(mesh[level], r)


def project_mean_zero(p_coeffs, space: PressureSpace) -> np.ndarray:
    """Remove the mean value: result is orthogonal to ``M^p e_const``.

    Works on a single vector or on a stack with the dofs in the last axis.
    """
    p = np.asarray(p_coeffs, dtype=float)
    if p.shape[-1] != space.n_dofs:
        raise ValueError(f"expected {space.n_dofs} pressure coefficients, got {p.shape[-1]}")
    mean = (p @ space.mean_vector) / space.domain_volume
    return p - np.multiply.outer(mean, space.const_vector)


def apply_dirichlet(velocity_coeffs, space: VelocitySpace, mode: str = "zero_rows",
                    data=None, t=None) -> np.ndarray:
    """Constrain boundary velocity dofs.

    ``mode="zero_rows"`` zeroes them; ``mode="set_values"`` writes
    ``data(points, t)`` (shape (n, d)) evaluated at the boundary nodes.
    Works on a single vector or a stack (last axis = dofs).
    """
    v = np.array(velocity_coeffs, dtype=float, copy=True)
    if v.shape[-1] != space.n_dofs:
        raise ValueError(f"expected {space.n_dofs} velocity coefficients, got {v.shape[-1]}")
    if mode == "zero_rows":
        v[..., space.boundary_mask] = 0.0
    elif mode == "set_values":
        if data is None:
            v[..., space.boundary_mask] = 0.0
        else:
            bnodes = np.flatnonzero(space.scalar_boundary_mask)
            vals = np.asarray(data(space.node_coords[bnodes], t), dtype=float)
            vals = vals.reshape(len(bnodes), space.d)
            for c in range(space.d):
                v[..., bnodes + c * space.n_scalar] = vals[:, c]
    else:
        raise ValueError(f"unknown Dirichlet mode {mode!r}")
    return v
