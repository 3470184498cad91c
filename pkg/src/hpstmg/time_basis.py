"""DG(k) in time with a Lagrange basis at the right Gauss-Radau points."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fe_basis import NodalBasis1D, gauss_radau_right, gauss_rule

__all__ = ["TemporalMatrices", "temporal_matrices", "temporal_basis", "dg_ode_step"]


@lru_cache(maxsize=None)
def temporal_basis(k: int) -> NodalBasis1D:
    """Lagrange basis of degree k at the (k+1) right Radau points of [-1, 1]."""
    return NodalBasis1D(gauss_radau_right(k + 1).points)


@dataclass(frozen=True)
class TemporalMatrices:
    """Local matrices of one subinterval of length ``tau``.

    ``K[a, b] = int phi_b' phi_a dt + phi_b(t_{n-1}^+) phi_a(t_{n-1}^+)``,
    ``M[a, b] = int phi_b phi_a dt`` and ``C[a, b] = phi_b(t_{n-1}) phi_a(t_{n-1}^+)``
    where the previous interval's basis is evaluated at its right end, so
    only the last column of ``C`` is nonzero.
    """

    k: int
    tau: float
    K: np.ndarray
    M: np.ndarray
    C: np.ndarray

    @property
    def left_values(self) -> np.ndarray:
        """``phi_a(t_{n-1}^+)`` for a = 1..k+1."""
        return self.C[:, -1]


@lru_cache(maxsize=None)
def _reference_matrices(k: int):
    basis = temporal_basis(k)
    q = gauss_rule(k + 1)
    val = basis.value(q.points)
    der = basis.derivative(q.points)
    left = basis.value(-1.0)[0]
    right = np.zeros(k + 1)
    right[-1] = 1.0  # +1 is the last node
    K = np.einsum("q,qa,qb->ab", q.weights, val, der) + np.outer(left, left)
    M = np.einsum("q,qa,qb->ab", q.weights, val, val)
    C = np.outer(left, right)
    for a in (K, M, C):
        a.setflags(write=False)
    return K, M, C


def temporal_matrices(k: int, tau: float) -> TemporalMatrices:
    """K, M, C for DG(k) on a subinterval of length ``tau``.

    With the Radau-nodal basis, ``M`` is diagonal: ``tau/2 * diag(weights)``.
    """
    if k < 0:
        raise ValueError("temporal degree must be >= 0")
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    K, Mref, C = _reference_matrices(k)
    return TemporalMatrices(k, float(tau), K, 0.5 * tau * Mref, C)


def dg_ode_step(k: int, tau: float, lam: float, y_prev: float) -> float:
    """One DG(k) step of ``y' = lam * y``; returns the value at the step end.

    Solves ``(K - lam M) y = C e_{k+1} y_prev``.
    """
    tm = temporal_matrices(k, tau)
    lhs = tm.K - lam * tm.M
    rhs = tm.left_values * y_prev
    try:
        y = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ZeroDivisionError(
            f"temporal system singular for lam*tau = {lam * tau}"
        ) from exc
    return float(y[-1])
