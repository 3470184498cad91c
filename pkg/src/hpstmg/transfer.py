"""Grid transfer between hierarchy levels.

Prolongation is the canonical embedding of the coarse space into the fine
one (nodal interpolation for the velocity, exact modal re-expansion for the
pressure, Radau-nodal re-evaluation in time). Restriction is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dofs import PressureSpace, VelocitySpace, project_mean_zero
from .fe_basis import gauss_rule, legendre_1d
from .operators import BlockLayout
from .time_basis import temporal_basis, gauss_radau_right

__all__ = [
    "TransferPair",
    "velocity_prolongation",
    "pressure_prolongation",
    "time_prolongation",
    "build_h_space_transfer",
    "build_p_space_transfer",
    "build_p_time_transfer",
    "build_transfer",
    "apply_transfer",
]


def _interp_1d(coarse: VelocitySpace, fine: VelocitySpace, axis: int):
    xc = coarse.node_coords_1d[axis]
    xf = fine.node_coords_1d[axis]
    lvl = coarse.level
    nc = lvl.cells_per_dim[axis]
    h = lvl.h[axis]
    cell = np.clip(np.floor((xf - lvl.lower[axis]) / h).astype(int), 0, nc - 1)
    xi = 2.0 * (xf - lvl.lower[axis] - cell * h) / h - 1.0
    vals = coarse.basis.value(xi)  # (nf, n1c)
    cols = cell[:, None] * coarse.degree + np.arange(coarse.n1)[None, :]
    rows = np.repeat(np.arange(len(xf)), coarse.n1)
    vals[np.abs(vals) < 1e-14] = 0.0
    P = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(len(xf), len(xc)))
    P.eliminate_zeros()
    return P


def velocity_prolongation(coarse: VelocitySpace, fine: VelocitySpace):
    """Sparse nodal interpolation of the coarse velocity space into the fine one."""
    if not np.allclose(coarse.level.lower, fine.level.lower) or not np.allclose(
            coarse.level.upper, fine.level.upper):
        raise ValueError("spaces live on different domains")
    ratio = np.array(fine.level.cells_per_dim) / np.array(coarse.level.cells_per_dim)
    if np.any(ratio < 1) or np.any(ratio != np.round(ratio)):
        raise ValueError("levels are not nested")
    if fine.degree < coarse.degree:
        raise ValueError("fine velocity degree below coarse degree")
    Px = _interp_1d(coarse, fine, 0)
    Py = _interp_1d(coarse, fine, 1)
    scalar = sp.kron(Py, Px).tocsr()
    return sp.block_diag([scalar] * fine.d, format="csr")


def _legendre_reexpansion(rc: int, rf: int, scale: float, shift: float):
    """T[b, a]: coefficient of L_b(xi) in L_a(scale*xi + shift), a <= rc, b <= rf."""
    q = gauss_rule(max(rc, rf) + 2)
    La, _ = legendre_1d(rc, scale * q.points + shift)
    Lb, _ = legendre_1d(rf, q.points)
    T = (Lb * q.weights[:, None]).T @ La
    T *= ((2.0 * np.arange(rf + 1) + 1.0) / 2.0)[:, None]
    T[np.abs(T) < 1e-14] = 0.0
    return T


def pressure_prolongation(coarse: PressureSpace, fine: PressureSpace):
    """Exact re-expansion of coarse P_rc polynomials on the (child) cells of the fine level."""
    ratio = np.array(fine.level.cells_per_dim) // np.array(coarse.level.cells_per_dim)
    if np.any(ratio * np.array(coarse.level.cells_per_dim) != np.array(fine.level.cells_per_dim)):
        raise ValueError("levels are not nested")
    if fine.r < coarse.r:
        raise ValueError("fine pressure degree below coarse degree")
    if np.any((ratio != 1) & (ratio != 2)):
        raise ValueError("only one refinement step per transfer is supported")
    bc, bf = coarse.basis, fine.basis
    fidx = fine.level.cell_multi_index(np.arange(fine.level.n_cells))
    cidx = fidx // ratio
    offs = fidx % ratio
    parent = np.ravel_multi_index(cidx[:, ::-1].T, coarse.level.cells_per_dim[::-1])
    # one local block per child position
    blocks = {}
    for ox in range(ratio[0]):
        for oy in range(ratio[1]):
            Ts = []
            for axis, o in ((0, ox), (1, oy)):
                if ratio[axis] == 1:
                    Ts.append(_legendre_reexpansion(coarse.r, fine.r, 1.0, 0.0))
                else:
                    Ts.append(_legendre_reexpansion(coarse.r, fine.r, 0.5, o - 0.5))
            Tx, Ty = Ts
            blk = np.zeros((bf.dim, bc.dim))
            for mc, (ax, ay) in enumerate(bc.exponents):
                for mf, (bx, by) in enumerate(bf.exponents):
                    blk[mf, mc] = Tx[bx, ax] * Ty[by, ay]
            blk[np.abs(blk) < 1e-14] = 0.0
            blocks[(ox, oy)] = blk
    rows, cols, vals = [], [], []
    for c in range(fine.level.n_cells):
        blk = blocks[(offs[c, 0], offs[c, 1])]
        r_, c_ = np.nonzero(blk)
        rows.append(fine.cell_dofs[c][r_])
        cols.append(coarse.cell_dofs[parent[c]][c_])
        vals.append(blk[r_, c_])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(fine.n_dofs, coarse.n_dofs))


def time_prolongation(k_coarse: int, k_fine: int) -> np.ndarray:
    """E[a_f, a_c] = coarse Radau-Lagrange basis a_c at fine Radau node a_f."""
    if k_fine < k_coarse:
        raise ValueError("fine temporal degree below coarse degree")
    if k_coarse == k_fine:
        return np.eye(k_fine + 1)
    E = temporal_basis(k_coarse).value(gauss_radau_right(k_fine + 1).points)
    E[np.abs(E) < 1e-15] = 0.0
    return E


@dataclass
class TransferPair:
    """Prolongation coarse -> fine; restriction is the transpose."""

    Pv: sp.csr_matrix
    Pp: sp.csr_matrix
    E: np.ndarray
    kind: tuple[str, ...]
    coarse_layout: BlockLayout
    fine_layout: BlockLayout
    coarse_spaces: tuple[VelocitySpace, PressureSpace]
    fine_spaces: tuple[VelocitySpace, PressureSpace]

    def prolongate(self, Xc):
        Vc, Pc = self.coarse_layout.split(Xc)
        Vf = self.E @ (self.Pv @ Vc.T).T
        Pf = self.E @ (self.Pp @ Pc.T).T
        return self.fine_layout.join(Vf, Pf)

    def restrict(self, Xf):
        Vf, Pf = self.fine_layout.split(Xf)
        Vc = self.E.T @ (self.Pv.T @ Vf.T).T
        Pc = self.E.T @ (self.Pp.T @ Pf.T).T
        return self.coarse_layout.join(Vc, Pc)

    def prolongation_matrix(self):
        """Assembled block prolongation (small levels only)."""
        Es = sp.csr_matrix(self.E)
        return sp.block_diag([sp.kron(Es, self.Pv), sp.kron(Es, self.Pp)], format="csr")


def build_transfer(coarse_spaces, fine_spaces, k_coarse: int, k_fine: int) -> TransferPair:
    """General transfer between (V, Q, k) triples; the kind lists what changes."""
    vc, pc = coarse_spaces
    vf, pf = fine_spaces
    kind = []
    if vc.level.cells_per_dim != vf.level.cells_per_dim:
        kind.append("h_space")
    if vc.r != vf.r:
        kind.append("p_space")
    if k_coarse != k_fine:
        kind.append("p_time")
    if not kind:
        kind.append("identity")
    if kind == ["identity"]:
        Pv = sp.identity(vf.n_dofs, format="csr")
        Pp = sp.identity(pf.n_dofs, format="csr")
    else:
        Pv = velocity_prolongation(vc, vf)
        Pp = pressure_prolongation(pc, pf)
    E = time_prolongation(k_coarse, k_fine)
    return TransferPair(
        Pv, Pp, E, tuple(kind),
        BlockLayout(k_coarse + 1, vc.n_dofs, pc.n_dofs),
        BlockLayout(k_fine + 1, vf.n_dofs, pf.n_dofs),
        (vc, pc), (vf, pf),
    )


def build_h_space_transfer(coarse_spaces, fine_spaces, k: int = 0) -> TransferPair:
    vc, vf = coarse_spaces[0], fine_spaces[0]
    if vc.r != vf.r:
        raise ValueError("h transfer needs equal degrees")
    ratio = np.array(vf.level.cells_per_dim) / np.array(vc.level.cells_per_dim)
    if not np.all(ratio == 2):
        raise ValueError("h transfer needs levels s-1 and s")
    return build_transfer(coarse_spaces, fine_spaces, k, k)


def build_p_space_transfer(coarse_spaces, fine_spaces, k: int = 0) -> TransferPair:
    vc, vf = coarse_spaces[0], fine_spaces[0]
    if vc.level.cells_per_dim != vf.level.cells_per_dim:
        raise ValueError("p transfer needs the same mesh")
    if vc.r > vf.r:
        raise ValueError("degree mismatch: coarse degree exceeds fine degree")
    return build_transfer(coarse_spaces, fine_spaces, k, k)


def build_p_time_transfer(spaces, k_half: int, k: int) -> TransferPair:
    if k_half > k:
        raise ValueError("degree mismatch")
    return build_transfer(spaces, spaces, k_half, k)


def apply_transfer(pair: TransferPair, direction: str, X, then_project_pressure: bool = False,
                   zero_dirichlet: bool = True):
    """Prolongate (``"up"``) or restrict (``"down"``) a block vector.

    Optionally projects every pressure sub-vector to mean zero and zeroes
    the Dirichlet velocity entries of the result.
    """
    if direction in ("up", "prolongate"):
        out = pair.prolongate(X)
        layout, (vs, ps) = pair.fine_layout, pair.fine_spaces
    elif direction in ("down", "restrict"):
        out = pair.restrict(X)
        layout, (vs, ps) = pair.coarse_layout, pair.coarse_spaces
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if then_project_pressure or zero_dirichlet:
        V, P = layout.split(out)
        if zero_dirichlet:
            V = V.copy()
            V[:, vs.boundary_mask] = 0.0
        if then_project_pressure:
            P = project_mean_zero(P, ps)
        out = layout.join(V, P)
    return out
