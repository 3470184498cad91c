"""Matrix-free spatial operators and the space-time block operator.

Spatial kernels work on cell-local coefficient arrays of shape
``(n_cells, n1, n1)`` (index order y, x) and use sum factorization: every
interpolation to the quadrature grid and every test-function integration is
a pair of 1D contractions. Cells of one level share their Jacobian, which is
a diagonal scaling on Cartesian meshes.

Sign convention: the block operator carries ``+B^T`` in the momentum rows, so
the pressure unknowns hold the coefficients of ``-p`` for the weak form
``(dv/dt, w) + nu (grad v, grad w) - (p, div w)``.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .dofs import PressureSpace, VelocitySpace
from .fe_basis import gauss_rule
from .time_basis import TemporalMatrices

__all__ = [
    "SpatialOperators",
    "SpaceTimeBlockOperator",
    "BlockLayout",
    "assemble_spatial_oracle",
    "assemble_sparse_oracle",
    "block_matrix",
    "ORACLE_DOF_GUARD",
]

ORACLE_DOF_GUARD = 200_000


def _scatter(local, cell_dofs, n, nb):
    """Sum cell contributions ``local`` (nb, n_cells, n_loc) into (nb, n)."""
    idx = (cell_dofs[None, :, :] + n * np.arange(nb)[:, None, None]).ravel()
    return np.bincount(idx, weights=local.ravel(), minlength=nb * n).reshape(nb, n)


class SpatialOperators:
    """Sum-factorized M_h, A_h, B_h, B_h^T and the diagonal M^p_h on one level."""

    def __init__(self, vspace: VelocitySpace, pspace: PressureSpace, n_quad: int | None = None):
        if vspace.level is not pspace.level:
            if vspace.level.cells_per_dim != pspace.level.cells_per_dim:
                raise ValueError("velocity and pressure spaces live on different meshes")
        self.vspace = vspace
        self.pspace = pspace
        self.n_quad = n_quad or vspace.r + 2
        q = gauss_rule(self.n_quad)
        self.quad = q
        self.B1 = vspace.basis.value(q.points)  # (nq, n1)
        self.D1 = vspace.basis.derivative(q.points)
        h = vspace.level.h
        self.hx, self.hy = float(h[0]), float(h[1])
        self.det = self.hx * self.hy / 4.0
        self.JW = np.outer(q.weights, q.weights) * self.det  # (qy, qx)
        self.psi = pspace.basis.tabulate(q.points)  # (dim, qy, qx)
        self.n1 = vspace.n1
        self.d = vspace.d

    # -- gather/scatter -------------------------------------------------
    def _gather_v(self, V):
        V = np.atleast_2d(V)
        nb = V.shape[0]
        loc = V[:, self.vspace.cell_dofs]  # (nb, nc, d*n1*n1)
        return loc.reshape(nb * self.vspace.level.n_cells, self.d, self.n1, self.n1), nb

    def _scatter_v(self, loc, nb):
        nc = self.vspace.level.n_cells
        return _scatter(loc.reshape(nb, nc, -1), self.vspace.cell_dofs, self.vspace.n_dofs, nb)

    # -- 1D contractions -------------------------------------------------
    @staticmethod
    def _to_quad(u, Ay, Ax):
        # u: (..., n1y, n1x) -> (..., qy, qx)
        return np.matmul(Ay, u @ Ax.T)

    @staticmethod
    def _from_quad(w, Ay, Ax):
        # transpose of _to_quad
        return np.matmul(Ay.T, w @ Ax)

    # -- cell kernels ------------------------------------------------------
    def mass_kernel(self, u):
        uq = self._to_quad(u, self.B1, self.B1)
        return self._from_quad(uq * self.JW, self.B1, self.B1)

    def laplace_kernel(self, u):
        gx = self._to_quad(u, self.B1, self.D1) * (2.0 / self.hx)
        gy = self._to_quad(u, self.D1, self.B1) * (2.0 / self.hy)
        return (self._from_quad(gx * self.JW, self.B1, self.D1) * (2.0 / self.hx)
                + self._from_quad(gy * self.JW, self.D1, self.B1) * (2.0 / self.hy))

    def div_kernel(self, u):
        # u: (nc, d, n1, n1) -> (nc, dim_p)
        div = (self._to_quad(u[:, 0], self.B1, self.D1) * (2.0 / self.hx)
               + self._to_quad(u[:, 1], self.D1, self.B1) * (2.0 / self.hy))
        return np.einsum("cyx,myx->cm", div * self.JW, self.psi)

    def div_transpose_kernel(self, p):
        # p: (nc, dim_p) -> (nc, d, n1, n1)
        pq = np.einsum("cm,myx->cyx", p, self.psi) * self.JW
        ux = self._from_quad(pq, self.B1, self.D1) * (2.0 / self.hx)
        uy = self._from_quad(pq, self.D1, self.B1) * (2.0 / self.hy)
        return np.stack([ux, uy], axis=1)

    def fused_block(self, V, P, K, Mt, nu):
        """Velocity and pressure rows of the block operator in one cell sweep.

        ``V`` is (nb, n_v), ``P`` is (nb, n_p). Returns
        ``(K M_h V + Mt (nu A_h V + B_h^T P), Mt B_h V)``.
        """
        nb = V.shape[0]
        nc = self.vspace.level.n_cells
        B, D = self.B1, self.D1
        sx, sy = 2.0 / self.hx, 2.0 / self.hy
        u = V[:, self.vspace.cell_dofs].reshape(nb, nc, self.d, self.n1, self.n1)
        ub = u @ B.T
        val = np.matmul(B, ub)
        gx = np.matmul(B, u @ D.T) * sx
        gy = np.matmul(D, ub) * sy
        JW = self.JW
        psi = self.psi.reshape(self.psi.shape[0], -1)
        nq2 = psi.shape[1]
        div = ((gx[:, :, 0] + gy[:, :, 1]) * JW).reshape(nb * nc, nq2) @ psi.T
        pq = (P.reshape(nb * nc, -1) @ psi).reshape(nb, nc, *JW.shape) * JW
        Fm = np.tensordot(K, val * JW, axes=(1, 0))
        Fx = nu * gx * JW
        Fy = nu * gy * JW
        Fx[:, :, 0] += pq
        Fy[:, :, 1] += pq
        Fx = np.tensordot(Mt, Fx, axes=(1, 0))
        Fy = np.tensordot(Mt, Fy, axes=(1, 0))
        loc = np.matmul(B.T, Fm @ B + sx * (Fx @ D)) + sy * np.matmul(D.T, Fy @ B)
        outV = _scatter(loc.reshape(nb, nc, -1), self.vspace.cell_dofs, self.vspace.n_dofs, nb)
        outP = np.tensordot(Mt, div.reshape(nb, -1), axes=(1, 0))
        return outV, outP

    # -- global actions (accept (M,) or (nb, M)) --------------------------------
    def _wrap(self, x, fn, n_in):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != n_in:
            raise ValueError(f"size mismatch: expected last axis {n_in}, got {x.shape[-1]}")
        out = fn(np.atleast_2d(x))
        return out[0] if x.ndim == 1 else out

    def apply_velocity_mass(self, v):
        def fn(V):
            u, nb = self._gather_v(V)
            return self._scatter_v(self.mass_kernel(u), nb)
        return self._wrap(v, fn, self.vspace.n_dofs)

    def apply_laplace(self, v):
        def fn(V):
            u, nb = self._gather_v(V)
            return self._scatter_v(self.laplace_kernel(u), nb)
        return self._wrap(v, fn, self.vspace.n_dofs)

    def apply_div(self, v):
        def fn(V):
            u, nb = self._gather_v(V)
            return self.div_kernel(u).reshape(nb, -1)
        return self._wrap(v, fn, self.vspace.n_dofs)

    def apply_div_transpose(self, p):
        def fn(P):
            nb = P.shape[0]
            loc = P.reshape(nb * self.pspace.level.n_cells, self.pspace.dim_cell)
            return self._scatter_v(self.div_transpose_kernel(loc), nb)
        return self._wrap(p, fn, self.pspace.n_dofs)

    def apply_pressure_mass(self, p):
        return self._wrap(p, lambda P: P * self.pspace.mass_diagonal, self.pspace.n_dofs)

    def load_vector(self, func, t=None, n_quad=None):
        """``int f . chi_i`` for a vector field ``func(points[, t]) -> (n, d)``."""
        q = gauss_rule(n_quad or self.n_quad)
        B1 = self.vspace.basis.value(q.points)
        JW = np.outer(q.weights, q.weights) * self.det
        lvl = self.vspace.level
        qy, qx = np.meshgrid(q.points, q.points, indexing="ij")
        ref = np.stack([qx, qy], axis=-1)  # (qy, qx, 2)
        pts = lvl.cell_lower()[:, None, None, :] + (ref[None] + 1.0) / 2.0 * lvl.h
        vals = func(pts.reshape(-1, 2)) if t is None else func(pts.reshape(-1, 2), t)
        vals = np.asarray(vals, dtype=float).reshape(lvl.n_cells, len(q), len(q), self.d)
        loc = np.stack([self._from_quad(vals[..., c] * JW, B1, B1) for c in range(self.d)], axis=1)
        return self._scatter_v(loc, 1)[0]

    # -- element matrices and kernel-consistent sparse assembly ----------------
    @cached_property
    def element_matrices(self):
        """Scalar mass/Laplace (n1^2 x n1^2) and divergence (dim_p x d n1^2) of one cell."""
        n = self.n1 * self.n1
        eye = np.eye(n).reshape(n, self.n1, self.n1)
        Me = self.mass_kernel(eye).reshape(n, n).T
        Ae = self.laplace_kernel(eye).reshape(n, n).T
        ev = np.eye(self.d * n).reshape(self.d * n, self.d, self.n1, self.n1)
        Be = self.div_kernel(ev).T  # (dim_p, d*n)
        return Me, Ae, Be

    @cached_property
    def sparse_matrices(self):
        """Global sparse (M_h, A_h, B_h, M^p_h) assembled from the kernel element matrices."""
        Me, Ae, Be = self.element_matrices
        vs, ps = self.vspace, self.pspace
        Mh = _assemble_vector_block(Me, vs)
        Ah = _assemble_vector_block(Ae, vs)
        Bh = _assemble_rect(Be, ps.cell_dofs, vs.cell_dofs, ps.n_dofs, vs.n_dofs)
        Mp = sp.diags(ps.mass_diagonal).tocsr()
        return Mh, Ah, Bh, Mp


def _assemble_vector_block(Ee, vs: VelocitySpace):
    """Block-diagonal (per component) assembly of a scalar element matrix."""
    n = Ee.shape[0]
    blocks = []
    for c in range(vs.d):
        dofs = vs.scalar_cell_dofs + c * vs.n_scalar
        blocks.append(_assemble_rect(Ee, dofs, dofs, vs.n_dofs, vs.n_dofs))
    out = blocks[0]
    for b in blocks[1:]:
        out = out + b
    assert out.shape == (vs.n_dofs, vs.n_dofs) and n == vs.n1**2
    return out.tocsr()


def _assemble_rect(Ee, rows, cols, nr, nc):
    nel = rows.shape[0]
    I = np.repeat(rows, cols.shape[1], axis=1).ravel()
    J = np.tile(cols, (1, rows.shape[1])).ravel()
    V = np.broadcast_to(Ee.ravel(), (nel, Ee.size)).ravel()
    return sp.coo_matrix((V, (I, J)), shape=(nr, nc)).tocsr()


class BlockLayout:
    """Index bookkeeping for ``X = (V^1..V^{k+1}, P^1..P^{k+1})``."""

    def __init__(self, nb: int, n_v: int, n_p: int):
        self.nb, self.n_v, self.n_p = nb, n_v, n_p
        self.size = nb * (n_v + n_p)

    def split(self, X):
        X = np.asarray(X)
        if X.shape[-1] != self.size:
            raise ValueError(f"block vector of size {self.size} expected, got {X.shape[-1]}")
        nv = self.nb * self.n_v
        V = X[..., :nv].reshape(X.shape[:-1] + (self.nb, self.n_v))
        P = X[..., nv:].reshape(X.shape[:-1] + (self.nb, self.n_p))
        return V, P

    def join(self, V, P):
        V = np.asarray(V)
        P = np.asarray(P)
        lead = V.shape[:-2]
        return np.concatenate([V.reshape(lead + (-1,)), P.reshape(lead + (-1,))], axis=-1)

    def zeros(self):
        return np.zeros(self.size)


class SpaceTimeBlockOperator:
    """Matrix-free ``D^n`` for one subinterval.

    ``[[K (x) M_h + nu M (x) A_h, M (x) B_h^T], [M (x) B_h, 0]]``.

    With ``constrained=True`` the Dirichlet velocity rows and columns are
    replaced by the identity, which is the operator for homogeneous
    corrections.
    """

    def __init__(self, spatial: SpatialOperators, temporal: TemporalMatrices, nu: float,
                 constrained: bool = True):
        self.spatial = spatial
        self.temporal = temporal
        self.nu = float(nu)
        self.constrained = constrained
        self.vspace = spatial.vspace
        self.pspace = spatial.pspace
        self.k = temporal.k
        self.layout = BlockLayout(temporal.k + 1, self.vspace.n_dofs, self.pspace.n_dofs)
        self.shape = (self.layout.size, self.layout.size)
        self.dtype = np.dtype(float)
        self._vmask = self.vspace.boundary_mask

    @property
    def size(self):
        return self.layout.size

    def with_constraints(self, constrained: bool) -> "SpaceTimeBlockOperator":
        return SpaceTimeBlockOperator(self.spatial, self.temporal, self.nu, constrained)

    @cached_property
    def constrained_mask(self) -> np.ndarray:
        """Boolean mask over the whole block vector (Dirichlet velocity entries)."""
        V = np.broadcast_to(self._vmask, (self.layout.nb, self.vspace.n_dofs))
        return self.layout.join(V, np.zeros((self.layout.nb, self.pspace.n_dofs), bool))

    def apply_block(self, X):
        V, P = self.layout.split(np.asarray(X, dtype=float))
        if self.constrained:
            V0 = V.copy()
            V0[:, self._vmask] = 0.0
        else:
            V0 = V
        tm = self.temporal
        outV, outP = self.spatial.fused_block(V0, P, tm.K, tm.M, self.nu)
        if self.constrained:
            outV[:, self._vmask] = V[:, self._vmask]
        return self.layout.join(outV, outP)

    __call__ = apply_block
    matvec = apply_block

    def __matmul__(self, X):
        return self.apply_block(X)

    def apply_coupling(self, V_prev):
        """Right-hand side contribution ``C^tau (x) M_h`` of the previous endpoint value."""
        V_prev = np.asarray(V_prev, dtype=float)
        if V_prev.shape != (self.vspace.n_dofs,):
            raise ValueError(f"expected velocity vector of length {self.vspace.n_dofs}")
        MV = self.spatial.apply_velocity_mass(V_prev)
        outV = np.outer(self.temporal.left_values, MV)
        return self.layout.join(outV, np.zeros((self.layout.nb, self.pspace.n_dofs)))

    def assemble_rhs(self, f, t_start: float):
        """``F^a = Q_n(<f, phi^a chi_i>)`` with the right Radau rule; pressure rows zero."""
        from .fe_basis import gauss_radau_right

        q = gauss_radau_right(self.k + 1)
        tau = self.temporal.tau
        outV = np.empty((self.layout.nb, self.vspace.n_dofs))
        for a in range(self.layout.nb):
            ta = t_start + 0.5 * tau * (q.points[a] + 1.0)
            outV[a] = 0.5 * tau * q.weights[a] * self.spatial.load_vector(f, ta)
        return self.layout.join(outV, np.zeros((self.layout.nb, self.pspace.n_dofs)))

    def node_times(self, t_start: float) -> np.ndarray:
        from .fe_basis import gauss_radau_right

        q = gauss_radau_right(self.k + 1)
        return t_start + 0.5 * self.temporal.tau * (q.points + 1.0)

    def assembled(self):
        """Sparse ``D^n`` built from the kernel element matrices (same constraint policy)."""
        M, A, B, _ = self.spatial.sparse_matrices
        return block_matrix(self.temporal, M, A, B, self.nu,
                            self._vmask if self.constrained else None)


def block_matrix(tm: TemporalMatrices, M, A, B, nu, vmask=None):
    """Sparse Kronecker assembly of the block operator from spatial matrices."""
    K = sp.csr_matrix(tm.K)
    Mt = sp.csr_matrix(tm.M)
    if vmask is not None:
        keep = sp.diags((~vmask).astype(float))
        M, A, B = keep @ M @ keep, keep @ A @ keep, B @ keep
    top = sp.hstack([sp.kron(K, M) + nu * sp.kron(Mt, A), sp.kron(Mt, B.T)])
    bot = sp.hstack([sp.kron(Mt, B), sp.csr_matrix((Mt.shape[0] * B.shape[0],) * 2)])
    D = sp.vstack([top, bot]).tocsr()
    if vmask is not None:
        nb = tm.K.shape[0]
        full = np.concatenate([np.tile(vmask, nb), np.zeros(nb * B.shape[0], bool)])
        D = (D + sp.diags(full.astype(float))).tocsr()
    return D


# -- independent assembly oracle ---------------------------------------------

def assemble_spatial_oracle(vspace: VelocitySpace, pspace: PressureSpace, n_quad=None):
    """Element-by-element assembly with full 2D tabulation (no sum factorization).

    Returns sparse ``(M_h, A_h, B_h, M^p_h)``. For testing only.
    """
    nq = n_quad or vspace.r + 2
    q = gauss_rule(nq)
    lvl = vspace.level
    hx, hy = lvl.h
    det = hx * hy / 4.0
    # 2D quadrature points, y-major to match the local node numbering
    W = np.kron(q.weights, q.weights) * det
    b = vspace.basis
    Bq, Dq = b.value(q.points), b.derivative(q.points)
    phi = np.kron(Bq, Bq)  # rows: (qy, qx), cols: (j, i)
    dphix = np.kron(Bq, Dq) * (2.0 / hx)
    dphiy = np.kron(Dq, Bq) * (2.0 / hy)
    Me = phi.T @ (W[:, None] * phi)
    Ae = dphix.T @ (W[:, None] * dphix) + dphiy.T @ (W[:, None] * dphiy)
    qy, qx = np.meshgrid(q.points, q.points, indexing="ij")
    psi = pspace.basis.evaluate(np.column_stack([qx.ravel(), qy.ravel()]))  # (nq^2, dim)
    Be = np.hstack([psi.T @ (W[:, None] * dphix), psi.T @ (W[:, None] * dphiy)])
    nv, npd = vspace.n_dofs, pspace.n_dofs
    M = sp.lil_matrix((nv, nv))
    A = sp.lil_matrix((nv, nv))
    B = sp.lil_matrix((npd, nv))
    ns = vspace.n_scalar
    for c in range(lvl.n_cells):
        sd = vspace.scalar_cell_dofs[c]
        for comp in range(vspace.d):
            idx = sd + comp * ns
            M[np.ix_(idx, idx)] = M[np.ix_(idx, idx)].toarray() + Me
            A[np.ix_(idx, idx)] = A[np.ix_(idx, idx)].toarray() + Ae
        vd = vspace.cell_dofs[c]
        pd = pspace.cell_dofs[c]
        B[np.ix_(pd, vd)] = B[np.ix_(pd, vd)].toarray() + Be
    Mp = sp.lil_matrix((npd, npd))
    Mpe = psi.T @ (W[:, None] * psi)
    for c in range(lvl.n_cells):
        pd = pspace.cell_dofs[c]
        Mp[np.ix_(pd, pd)] = Mpe
    return M.tocsr(), A.tocsr(), B.tocsr(), Mp.tocsr()


def assemble_sparse_oracle(op: SpaceTimeBlockOperator):
    """Explicit sparse ``D^n`` from the independent element assembly."""
    if op.size > ORACLE_DOF_GUARD:
        raise MemoryError(f"oracle assembly refused: {op.size} dofs > {ORACLE_DOF_GUARD}")
    M, A, B, _ = assemble_spatial_oracle(op.vspace, op.pspace, op.spatial.n_quad)
    return block_matrix(op.temporal, M, A, B, op.nu,
                        op.vspace.boundary_mask if op.constrained else None)
