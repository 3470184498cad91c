"""Convergence and iteration-robustness studies on the manufactured problem."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..hierarchy import LevelConfig, build_levels
from ..mesh import build_cartesian
from ..solver import KrylovConfig, VCycleConfig, time_march
from .errors import ErrorReport, compute_errors, eoc
from .problems import manufactured_problem

__all__ = [
    "StudySettings",
    "ConvergenceRow",
    "RobustnessRow",
    "solve_manufactured",
    "convergence_study",
    "robustness_sweep",
    "write_convergence_csv",
    "write_robustness_csv",
    "CONVERGENCE_COLUMNS",
    "ROBUSTNESS_COLUMNS",
]

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["r", "c", "h", "e_v_L2", "eoc_v_L2", "e_p_L2", "eoc_p_L2", "e_v_H1",
                       "eoc_v_H1", "e_div", "eoc_div", "e_v_Linf", "avg_iters", "saturated"]
ROBUSTNESS_COLUMNS = ["r", "c", "mode", "smoother", "n_sm", "avg_iters", "sum_nT2", "n_dofs",
                      "steps", "wall_time", "throughput"]


@dataclass
class StudySettings:
    """Solver and discretization knobs shared by the studies."""

    nu: float = 0.1
    T: float = 1.0
    base_cells: int = 1
    coarse_level: int = 0
    omega: float = 0.8
    smoother: str = "cell"
    mode: str = "hp"
    nu1: int = 1
    nu2: int = 1
    rtol: float = 1e-8
    atol: float = 1e-14
    maxit: int = 200
    project_pressure: bool = True
    coarse_cap: int = 50_000
    k_offset: int = 0  # k = r + k_offset
    steps: int | None = None  # truncate the time march (robustness only)

    def vcycle(self, n_sm=None):
        n1 = self.nu1 if n_sm is None else n_sm
        n2 = self.nu2 if n_sm is None else n_sm
        return VCycleConfig(nu1=n1, nu2=n2, omega=self.omega, project_pressure=self.project_pressure)

    def krylov(self):
        return KrylovConfig(rtol=self.rtol, atol=self.atol, maxit=self.maxit)

    def level_config(self, smoother=None):
        return LevelConfig(nu=self.nu, smoother=smoother or self.smoother, omega=self.omega,
                           coarse_cap=self.coarse_cap)


def solve_manufactured(r: int, c: int, settings: StudySettings | None = None, k=None, mode=None,
                       smoother=None, n_sm=None, keep_trajectory=True, steps=None):
    """Time-march the manufactured problem on the ``2^c`` x ``2^c`` mesh with ``tau = h``.

    Returns ``(levels, march_result, problem, tau, k)``.
    """
    st = settings or StudySettings()
    k = r + st.k_offset if k is None else k
    prob = manufactured_problem(st.nu, st.T)
    mesh = build_cartesian((prob.lower, prob.upper), st.base_cells, c + 1)
    h = float(mesh[c].h[0])
    N = int(round(st.T / h))
    tau = st.T / N
    levels = build_levels(mesh, c, r, k, tau, mode or st.mode, st.coarse_level,
                          st.level_config(smoother))
    n_steps = N if steps is None else min(N, steps)
    res = time_march(levels, n_steps, 0.0, forcing=prob.forcing, dirichlet=None,
                     vcycle=st.vcycle(n_sm), krylov=st.krylov(), keep_trajectory=keep_trajectory)
    return levels, res, prob, tau, k


@dataclass
class ConvergenceRow:
    r: int
    c: int
    h: float
    errors: ErrorReport
    avg_iters: float
    saturated: bool = False
    eocs: dict = field(default_factory=dict)

    def as_dict(self):
        e = self.errors
        return {"r": self.r, "c": self.c, "h": self.h,
                "e_v_L2": e.e_v_L2, "eoc_v_L2": self.eocs.get("v"),
                "e_p_L2": e.e_p_L2, "eoc_p_L2": self.eocs.get("p"),
                "e_v_H1": e.e_v_H1, "eoc_v_H1": self.eocs.get("h1"),
                "e_div": e.e_div, "eoc_div": self.eocs.get("div"),
                "e_v_Linf": e.e_v_Linf, "avg_iters": self.avg_iters, "saturated": self.saturated}


def convergence_study(r_list, c_list, settings: StudySettings | None = None) -> list[ConvergenceRow]:
    """Errors and EOCs for every ``r`` over the refinements ``c_list`` (``k = r``).

    A row is flagged ``saturated`` when its velocity error drops below
    ``10 * rtol`` times the solution's space-time norm.
    """
    st = settings or StudySettings()
    rows = []
    for r in r_list:
        block = []
        for c in sorted(c_list):
            t0 = time.perf_counter()
            levels, res, prob, tau, k = solve_manufactured(r, c, st)
            vs, ps = levels[-1].vspace, levels[-1].pspace
            err = compute_errors(res.trajectory, (vs, ps), prob, tau, k)
            zero = [np.zeros_like(x) for x in res.trajectory]
            scale = compute_errors(zero, (vs, ps), prob, tau, k).e_v_L2
            sat = err.e_v_L2 < 10.0 * st.rtol * scale
            block.append(ConvergenceRow(r, c, float(vs.level.h[0]), err, res.avg_iterations, sat))
            log.info("r=%d c=%d: e_v=%.3e e_p=%.3e (%.1fs)", r, c, err.e_v_L2, err.e_p_L2,
                     time.perf_counter() - t0)
        for key, attr in (("v", "e_v_L2"), ("p", "e_p_L2"), ("h1", "e_v_H1"), ("div", "e_div")):
            for row, val in zip(block, eoc([getattr(b.errors, attr) for b in block])):
                row.eocs[key] = val
        rows.extend(block)
    return rows


@dataclass
class RobustnessRow:
    r: int
    c: int
    mode: str
    smoother: str
    n_sm: int
    avg_iters: float
    sum_nT2: int
    n_dofs: int
    steps: int
    wall_time: float
    throughput: float
    iterations: list = field(default_factory=list)

    def as_dict(self):
        d = asdict(self)
        d.pop("iterations")
        return d


def robustness_sweep(r_list, c_list, smoother_kinds=("cell",), n_sm_list=(1,), modes=("hp",),
                     settings: StudySettings | None = None) -> list[RobustnessRow]:
    """Average GMRES iterations per time step for every configuration."""
    st = settings or StudySettings()
    rows = []
    for r in r_list:
        for c in c_list:
            for mode in modes:
                for sm in smoother_kinds:
                    for n_sm in n_sm_list:
                        levels, res, *_ = solve_manufactured(
                            r, c, st, mode=mode, smoother=sm, n_sm=n_sm, keep_trajectory=False,
                            steps=st.steps)
                        fine = levels[-1]
                        row = RobustnessRow(r, c, mode, sm, n_sm, res.avg_iterations,
                                            fine.smoother.sum_nt2, fine.n_dofs, len(res.steps),
                                            res.wall_time, res.throughput,
                                            [s.iterations for s in res.steps])
                        log.info("r=%d c=%d %s/%s n_sm=%d: %.2f iterations", r, c, mode, sm, n_sm,
                                 row.avg_iters)
                        rows.append(row)
    return rows


def _write(path, columns, dicts):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for d in dicts:
            w.writerow({k: ("" if d.get(k) is None else d.get(k)) for k in columns})
    return path


def write_convergence_csv(rows, path):
    return _write(path, CONVERGENCE_COLUMNS, [r.as_dict() for r in rows])


def write_robustness_csv(rows, path):
    return _write(path, ROBUSTNESS_COLUMNS, [r.as_dict() for r in rows])
