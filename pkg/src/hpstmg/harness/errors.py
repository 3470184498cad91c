"""Space-time error norms and experimental orders of convergence."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dofs import PressureSpace, VelocitySpace
from ..fe_basis import gauss_rule
from ..time_basis import temporal_basis

__all__ = ["ErrorReport", "compute_errors", "eoc", "CellEvaluator"]


class CellEvaluator:
    """Tabulates discrete fields at tensor Gauss points of every cell."""

    def __init__(self, vspace: VelocitySpace, pspace: PressureSpace, n_quad: int):
        self.vspace, self.pspace = vspace, pspace
        q = gauss_rule(n_quad)
        lvl = vspace.level
        self.hx, self.hy = lvl.h
        b = vspace.basis
        self.B = b.value(q.points)
        self.D = b.derivative(q.points)
        self.psi = pspace.basis.tabulate(q.points)  # (dim, qy, qx)
        self.JW = np.outer(q.weights, q.weights) * (self.hx * self.hy / 4.0)  # (qy, qx)
        corners = lvl.cell_lower()
        ref = (q.points + 1.0) / 2.0
        X = corners[:, 0, None, None] + ref[None, None, :] * self.hx
        Y = corners[:, 1, None, None] + ref[None, :, None] * self.hy
        X, Y = np.broadcast_arrays(X, Y)
        self.points = np.stack([X, Y], axis=-1).reshape(-1, 2)  # cell-major, (qy, qx)
        self.shape = (lvl.n_cells, n_quad, n_quad)

    def velocity(self, V):
        """Values (nc, qy, qx, d) and gradients (nc, qy, qx, d, d)."""
        vs = self.vspace
        loc = V[vs.cell_dofs].reshape(-1, vs.d, vs.n1, vs.n1)  # (nc, comp, j, i)
        val = np.einsum("ncji,yj,xi->nyxc", loc, self.B, self.B, optimize=True)
        gx = np.einsum("ncji,yj,xi->nyxc", loc, self.B, self.D, optimize=True) * (2.0 / self.hx)
        gy = np.einsum("ncji,yj,xi->nyxc", loc, self.D, self.B, optimize=True) * (2.0 / self.hy)
        return val, np.stack([gx, gy], axis=-1)

    def pressure(self, P):
        loc = P[self.pspace.cell_dofs]  # (nc, dim)
        return np.einsum("nm,myx->nyx", loc, self.psi)


@dataclass
class ErrorReport:
    e_v_L2: float
    e_p_L2: float
    e_v_H1: float
    e_div: float
    e_v_Linf: float
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {"e_v_L2": self.e_v_L2, "e_p_L2": self.e_p_L2, "e_v_H1": self.e_v_H1,
                "e_div": self.e_div, "e_v_Linf": self.e_v_Linf}


def compute_errors(trajectory, levels_or_spaces, problem, tau: float, k: int, t0: float = 0.0,
                   n_time=None, n_space=None, pressure_sign: float = -1.0) -> ErrorReport:
    """Space-time errors of a trajectory of block vectors against ``problem``.

    Parameters
    ----------
    trajectory : list of ndarray
        One block vector ``(V^1..V^{k+1}, P^1..P^{k+1})`` per time step.
    levels_or_spaces : (VelocitySpace, PressureSpace)
    pressure_sign : float
        Sign that maps the pressure unknowns to the physical pressure; the
        block operator's ``+B^T`` coupling makes the unknowns ``-p``.
    """
    vs, ps = levels_or_spaces
    nq_t = n_time or k + 2
    nq_s = n_space or vs.r + 3
    ev = CellEvaluator(vs, ps, nq_s)
    qt = gauss_rule(nq_t)
    phi = temporal_basis(k).value(qt.points)  # (qt, k+1)
    nb = k + 1
    nv, npd = vs.n_dofs, ps.n_dofs
    sq = dict(v=0.0, p=0.0, h1=0.0, div=0.0)
    linf = 0.0
    for n, X in enumerate(trajectory):
        V = X[: nb * nv].reshape(nb, nv)
        P = X[nb * nv:].reshape(nb, npd) * pressure_sign
        ts = t0 + n * tau
        for w, row, xi in zip(qt.weights, phi, qt.points):
            t = ts + 0.5 * tau * (xi + 1.0)
            wt = 0.5 * tau * w
            val, grad = ev.velocity(row @ V)
            pv = ev.pressure(row @ P)
            ve = problem.velocity(ev.points, t).reshape(val.shape)
            ge = problem.velocity_gradient(ev.points, t).reshape(grad.shape)
            pe = problem.pressure(ev.points, t).reshape(pv.shape)
            dv, dg, dp = val - ve, grad - ge, pv - pe
            JW = ev.JW[None]
            sq["v"] += wt * np.sum(JW[..., None] * dv**2)
            sq["h1"] += wt * np.sum(JW[..., None, None] * dg**2)
            sq["p"] += wt * np.sum(JW * dp**2)
            sq["div"] += wt * np.sum(JW * (grad[..., 0, 0] + grad[..., 1, 1]) ** 2)
            linf = max(linf, float(np.abs(dv).max()))
    return ErrorReport(np.sqrt(sq["v"]), np.sqrt(sq["p"]), np.sqrt(sq["h1"]), np.sqrt(sq["div"]), linf)


def eoc(errors) -> list:
    """``log2(e_coarse / e_fine)`` for consecutive halvings; first entry is None."""
    out = [None]
    for a, b in zip(errors, errors[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else None)
    return out
