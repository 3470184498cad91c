"""Quick oracle-equivalence checks behind ``hpstmg selftest``."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from .dofs import build_pressure_space, build_velocity_space, project_mean_zero
from .fe_basis import gauss_radau_right
from .hierarchy import build_levels, combine_hierarchies, construct_hierarchy
from .mesh import build_cartesian
from .operators import SpaceTimeBlockOperator, SpatialOperators, assemble_sparse_oracle
from .solver import VCycleConfig, v_cycle
from .time_basis import dg_ode_step, temporal_matrices
from .transfer import build_transfer
from .vanka import apply_additive, build_cell_patches

__all__ = ["radau_iia_stability", "run_selftest"]


def radau_iia_stability(s: int, z: complex) -> complex:
    """``R(z) = 1 + z b^T (I - z A)^{-1} 1`` of the s-stage Radau IIA collocation method.

    Nodes are the roots of ``P_s - P_{s-1}`` mapped to (0, 1]; A and b come
    from integrating the Lagrange polynomials exactly.
    """
    coef = np.zeros(s + 1)
    coef[s] = 1.0
    coef[s - 1] -= 1.0
    x = np.sort(np.real(npleg.legroots(coef)))
    c = (x + 1.0) / 2.0
    A = np.zeros((s, s))
    b = np.zeros(s)
    for j in range(s):
        others = np.delete(c, j)
        lj = np.poly1d(np.poly(others) / np.prod(c[j] - others)) if s > 1 else np.poly1d([1.0])
        Lj = np.polyint(lj)
        A[:, j] = Lj(c) - Lj(0.0)
        b[j] = Lj(1.0) - Lj(0.0)
    return complex(1.0 + z * b @ np.linalg.solve(np.eye(s) - z * A, np.ones(s)))


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    results = []

    def check(name, ok, detail=""):
        results.append(bool(ok))
        out(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")

    # quadrature
    worst = 0.0
    for n in range(1, 7):
        q = gauss_radau_right(n)
        for p in range(2 * n - 1):
            exact = (1.0 - (-1.0) ** (p + 1)) / (p + 1)
            worst = max(worst, abs(q.integrate(lambda x: x**p) - exact))
    check("Radau rules exact to degree 2n-2", worst < 1e-13, f"max err {worst:.1e}")

    # DG(k) = Radau IIA
    worst = 0.0
    for k in range(4):
        for z in (-0.1, -1.0, -4.0):
            worst = max(worst, abs(dg_ode_step(k, 1.0, z, 1.0) - radau_iia_stability(k + 1, z).real))
    check("DG(k) endpoint = Radau IIA", worst < 1e-12, f"max diff {worst:.1e}")

    # operators against element-assembly oracle
    mesh = build_cartesian(([0.0, 0.0], [1.0, 1.0]), 1, 3)
    worst = 0.0
    for r in (1, 2):
        for k in (0, 1, 2):
            vs, ps = build_velocity_space(mesh, 2, r), build_pressure_space(mesh, 2, r)
            op = SpaceTimeBlockOperator(SpatialOperators(vs, ps), temporal_matrices(k, 0.25), 0.1)
            D = assemble_sparse_oracle(op)
            for _ in range(3):
                x = rng.standard_normal(op.size)
                ref = D @ x
                worst = max(worst, np.linalg.norm(op(x) - ref) / np.linalg.norm(ref))
    check("matrix-free block operator = sparse oracle", worst < 1e-12, f"max rel {worst:.1e}")

    # transfers
    vc, pc = build_velocity_space(mesh, 1, 1), build_pressure_space(mesh, 1, 1)
    vf, pf = build_velocity_space(mesh, 2, 1), build_pressure_space(mesh, 2, 1)
    tr = build_transfer((vc, pc), (vf, pf), 1, 2)
    xc = rng.standard_normal(tr.coarse_layout.size)
    yf = rng.standard_normal(tr.fine_layout.size)
    adj = abs(tr.prolongate(xc) @ yf - xc @ tr.restrict(yf)) / (np.linalg.norm(xc) * np.linalg.norm(yf))
    check("restriction = prolongation transpose", adj < 1e-14, f"{adj:.1e}")
    p = project_mean_zero(rng.standard_normal(pc.n_dofs), pc)
    m = abs((tr.Pp @ p) @ pf.mean_vector - p @ pc.mean_vector)
    check("pressure mean preserved", m < 1e-13, f"{m:.1e}")

    # four-level hierarchy example
    h, tau = 0.125, 0.1
    desc = combine_hierarchies(construct_hierarchy(h, 4 * h, 2, 1), construct_hierarchy(tau, tau, 2, 1))
    got = [(d.h / h, d.r, d.k) for d in desc]
    check("hierarchy reproduces the 4-level example", got == [(4, 1, 1), (2, 1, 2), (1, 1, 2), (1, 2, 2)],
          str(got))

    # smoother and V-cycle linearity
    levels = build_levels(mesh, 2, 2, 1, 0.25)
    fine = levels[-1]
    b1, b2 = rng.standard_normal((2, fine.n_dofs))
    b1[fine.operator.constrained_mask] = 0.0
    b2[fine.operator.constrained_mask] = 0.0
    a, c = 0.7, -1.3
    cfg = VCycleConfig()
    lhs = v_cycle(levels, len(levels) - 1, a * b1 + c * b2, cfg)
    rhs = a * v_cycle(levels, len(levels) - 1, b1, cfg) + c * v_cycle(levels, len(levels) - 1, b2, cfg)
    lin = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
    check("V-cycle is linear", lin < 1e-12, f"{lin:.1e}")
    ps_ = build_cell_patches(fine.operator)
    y = apply_additive(ps_, b1)
    check("additive Vanka output finite", np.all(np.isfinite(y)))

    ok = all(results)
    out(f"{sum(results)}/{len(results)} checks passed")
    return ok
