"""V-cycle preconditioner, coarse direct solve, GMRES and the time-marching driver."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dofs import project_mean_zero
from .operators import SpaceTimeBlockOperator
from .transfer import apply_transfer
from .vanka import DEFAULT_OMEGA, smooth_step

__all__ = [
    "VCycleConfig",
    "KrylovConfig",
    "CoarseSolver",
    "GMRESResult",
    "ConvergenceError",
    "v_cycle",
    "make_preconditioner",
    "gmres",
    "StepRecord",
    "MarchResult",
    "time_march",
]

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """GMRES did not reach its tolerance."""


@dataclass
class VCycleConfig:
    nu1: int = 1
    nu2: int = 1
    omega: float = DEFAULT_OMEGA
    coarse: str = "direct"
    project_pressure: bool = True

    def __post_init__(self):
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("smoothing counts must be non-negative")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("omega must lie in (0, 1]")
        if self.coarse != "direct":
            raise ValueError(f"unknown coarse solver {self.coarse!r}")


@dataclass
class KrylovConfig:
    rtol: float = 1e-8
    atol: float = 1e-14
    maxit: int = 200
    max_basis: int | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.maxit < 1:
            raise ValueError("maxit must be >= 1")


class CoarseSolver:
    """Sparse LU of the assembled coarse operator.

    The pressure is determined up to one constant per temporal node; the
    constant mode of cell 0 is pinned for every node and the result is
    shifted to mean zero afterwards.
    """

    def __init__(self, op: SpaceTimeBlockOperator, cap: int = 50_000):
        if op.size > cap:
            raise MemoryError(f"coarse level has {op.size} dofs > cap {cap}")
        self.op = op
        lay = op.layout
        self.pinned = lay.nb * lay.n_v + np.arange(lay.nb) * lay.n_p
        D = op.assembled().tolil()
        for i in self.pinned:
            D.rows[i] = [i]
            D.data[i] = [1.0]
        D = D.tocsc()
        keep = np.ones(op.size)
        keep[self.pinned] = 0.0
        Kc = sp.diags(keep)
        D = (D @ Kc + sp.diags(1.0 - keep)).tocsc()
        self._matrix = D
        self._lu = spla.splu(D)

    def solve(self, b):
        rhs = np.array(b, dtype=float, copy=True)
        rhs[self.pinned] = 0.0
        x = self._lu.solve(rhs)
        V, P = self.op.layout.split(x)
        return self.op.layout.join(V, project_mean_zero(P, self.op.pspace))


def _project(level, X):
    lay = level.operator.layout
    V, P = lay.split(X)
    return lay.join(V, project_mean_zero(P, level.pspace))


def v_cycle(levels, ell: int, b, config: VCycleConfig | None = None):
    """One V-cycle on level ``ell`` with zero initial guess (a linear map of ``b``)."""
    cfg = config or VCycleConfig()
    lv = levels[ell]
    if ell == 0:
        return lv.coarse_solver.solve(b)
    S = lv.operator
    x = np.zeros(S.size)
    for _ in range(cfg.nu1):
        x = smooth_step(lv.smoother, S, b, x, cfg.omega)
    r = b - S(x)
    rc = apply_transfer(lv.transfer, "down", r, then_project_pressure=cfg.project_pressure)
    ec = v_cycle(levels, ell - 1, rc, cfg)
    x = x + apply_transfer(lv.transfer, "up", ec)
    for _ in range(cfg.nu2):
        x = smooth_step(lv.smoother, S, b, x, cfg.omega)
    if cfg.project_pressure:
        x = _project(lv, x)
    return x


def make_preconditioner(levels, config: VCycleConfig | None = None):
    top = len(levels) - 1
    return lambda r: v_cycle(levels, top, r, config)


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    history: list
    converged: bool

    def __iter__(self):
        return iter((self.x, self.iterations, self.history))


def gmres(operator, preconditioner, b, x0=None, config: KrylovConfig | None = None,
          raise_on_failure: bool = False) -> GMRESResult:
    """Right-preconditioned GMRES without restart.

    Stops once ``||b - A x|| <= max(rtol ||b||, atol)``. The residual
    history holds the Arnoldi residual estimates, which equal the true
    residual norms in exact arithmetic.
    """
    cfg = config or KrylovConfig()
    A = operator if callable(operator) else (lambda v: operator @ v)
    Minv = preconditioner if preconditioner is not None else (lambda v: v)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    target = max(cfg.rtol * np.linalg.norm(b), cfg.atol)
    history = [beta]
    if beta <= target:
        return GMRESResult(x, 0, history, True)
    m = min(cfg.maxit, cfg.max_basis or cfg.maxit)
    Q = np.zeros((m + 1, b.size))
    Z = np.zeros((m, b.size))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    Q[0] = r / beta
    j = 0
    converged = False
    for j in range(m):
        Z[j] = Minv(Q[j])
        w = A(Z[j])
        for i in range(j + 1):  # modified Gram-Schmidt
            H[i, j] = Q[i] @ w
            w = w - H[i, j] * Q[i]
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] > 0:
            Q[j + 1] = w / H[j + 1, j]
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        den = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = (1.0, 0.0) if den == 0 else (H[j, j] / den, H[j + 1, j] / den)
        H[j, j] = den
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        history.append(abs(g[j + 1]))
        if abs(g[j + 1]) <= target or H[j, j] == 0:
            converged = abs(g[j + 1]) <= target
            break
    n = j + 1
    y = np.linalg.solve(np.triu(H[:n, :n]), g[:n]) if n else np.zeros(0)
    x = x + y @ Z[:n]
    if not converged and raise_on_failure:
        raise ConvergenceError(f"GMRES stalled after {n} iterations at residual {history[-1]:.3e}")
    return GMRESResult(x, n, history, converged)


@dataclass
class StepRecord:
    step: int
    t_start: float
    iterations: int
    residual: float
    rel_residual: float
    wall_time: float
    div_ratio: float = 0.0
    pressure_mean_ratio: float = 0.0


@dataclass
class MarchResult:
    """Per-step records plus the coefficient trajectory (if kept)."""

    steps: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    final_velocity: np.ndarray | None = None
    n_dofs: int = 0
    wall_time: float = 0.0

    @property
    def avg_iterations(self) -> float:
        its = [s.iterations for s in self.steps]
        return float(np.mean(its)) if its else 0.0

    @property
    def throughput(self) -> float:
        """Space-time dofs processed per second of wall time."""
        return self.n_dofs * len(self.steps) / self.wall_time if self.wall_time > 0 else 0.0


def _dirichlet_lift(op: SpaceTimeBlockOperator, data, t_start: float):
    lay = op.layout
    V = np.zeros((lay.nb, lay.n_v))
    if data is not None:
        vs = op.vspace
        bnodes = np.flatnonzero(vs.scalar_boundary_mask)
        for a, ta in enumerate(op.node_times(t_start)):
            vals = np.asarray(data(vs.node_coords[bnodes], ta), dtype=float).reshape(len(bnodes), vs.d)
            for c in range(vs.d):
                V[a, bnodes + c * vs.n_scalar] = vals[:, c]
    return lay.join(V, np.zeros((lay.nb, lay.n_p)))


def time_march(levels, N: int, t0: float, forcing=None, dirichlet=None, v0=None,
               vcycle: VCycleConfig | None = None, krylov: KrylovConfig | None = None,
               keep_trajectory: bool = False, callback=None, initial_guess: str = "zero",
               check_saddle: bool = True) -> MarchResult:
    """Solve ``D^n X_n = B_n + C^n V_{n-1}`` for ``n = 1..N``.

    Parameters
    ----------
    levels : list of Level
        Multigrid hierarchy; the finest level defines the discretization and
        its time step.
    forcing : callable ``f(points, t) -> (n, d)``, optional
    dirichlet : callable ``g(points, t) -> (n, d)``, optional
        Boundary velocity; zero if omitted.
    v0 : ndarray, optional
        Initial velocity coefficients (zero if omitted).
    callback : callable ``(step, t_start, X)``, optional
        Called after every converged step.
    """
    kcfg = krylov or KrylovConfig()
    fine = levels[-1]
    op = fine.operator
    free = op.with_constraints(False)
    lay = op.layout
    tau = op.temporal.tau
    prec = make_preconditioner(levels, vcycle)
    V_prev = np.zeros(lay.n_v) if v0 is None else np.asarray(v0, dtype=float)
    X_prev = None
    res = MarchResult(n_dofs=op.size)
    Mp = fine.pspace.mass_diagonal
    t_all = time.perf_counter()
    for n in range(N):
        t_start = t0 + n * tau
        t_step = time.perf_counter()
        rhs = op.apply_coupling(V_prev)
        if forcing is not None:
            rhs = rhs + op.assemble_rhs(forcing, t_start)
        xD = _dirichlet_lift(op, dirichlet, t_start)
        rhs_h = rhs - free(xD)
        rhs_h[op.constrained_mask] = 0.0
        x0 = None
        if initial_guess == "previous" and X_prev is not None:
            x0 = X_prev - xD
            x0[op.constrained_mask] = 0.0
        out = gmres(op, prec, rhs_h, x0, kcfg)
        X = xD + out.x
        V, P = lay.split(X)
        P = project_mean_zero(P, fine.pspace)
        X = lay.join(V, P)
        true_res = np.linalg.norm(rhs_h - op(out.x))
        bnorm = np.linalg.norm(rhs_h)
        wall = time.perf_counter() - t_step
        rec = StepRecord(n + 1, t_start, out.iterations, true_res,
                         true_res / bnorm if bnorm > 0 else 0.0, wall)
        if check_saddle:
            BV = fine.operator.spatial.apply_div(V)
            MV = fine.operator.spatial.apply_velocity_mass(V)
            vn = np.sqrt(np.maximum(np.einsum("ai,ai->a", V, MV), 0.0))
            bn = np.linalg.norm(BV, axis=1)
            rec.div_ratio = float(np.max(np.where(vn > 0, bn / np.where(vn > 0, vn, 1.0), bn)))
            pm = np.abs(P @ (Mp * fine.pspace.const_vector))
            pn = np.linalg.norm(P, axis=1)
            rec.pressure_mean_ratio = float(np.max(np.where(pn > 0, pm / np.where(pn > 0, pn, 1.0), pm)))
        res.steps.append(rec)
        if not out.converged:
            res.wall_time = time.perf_counter() - t_all
            raise ConvergenceError(
                f"step {n + 1} (t={t_start:.4g}) did not converge: {out.iterations} iterations, "
                f"residual {true_res:.3e} vs target {max(kcfg.rtol * bnorm, kcfg.atol):.3e}")
        log.debug("step %d: %d iterations, residual %.3e", n + 1, out.iterations, true_res)
        if keep_trajectory:
            res.trajectory.append(X)
        if callback is not None:
            callback(n + 1, t_start, X)
        V_prev = V[-1].copy()
        X_prev = X
    res.wall_time = time.perf_counter() - t_all
    res.final_velocity = V_prev
    return res
