"""Quadrature rules and reference bases on [-1, 1] and [-1, 1]^d.

Velocity shape functions are nodal Lagrange polynomials at Gauss-Lobatto
points (one factor per direction), pressure shape functions are tensor
Legendre products truncated to total degree ``r``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import legendre as leg

__all__ = [
    "QuadratureRule",
    "NodalBasis1D",
    "PDiscBasis",
    "gauss_rule",
    "gauss_radau_right",
    "gauss_lobatto_points",
    "lagrange_basis",
    "pdisc_basis",
    "legendre_1d",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a rule on [-1, 1].

    ``degree`` is the polynomial degree integrated exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.points)

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.points)))


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule, exact up to degree 2n-1."""
    if n < 1:
        raise ValueError(f"Gauss rule needs n >= 1, got {n}")
    x, w = leg.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, 2 * n - 1)


@lru_cache(maxsize=None)
def gauss_radau_right(n: int) -> QuadratureRule:
    """n-point right-sided Gauss-Radau rule (contains x = +1).

    Exact up to degree 2n-2. The nodes are the mirror image of the left
    Radau nodes, i.e. of the roots of ``P_{n-1} + P_n``.

    Examples
    --------
    >>> q = gauss_radau_right(2)
    >>> q.points.round(12).tolist(), q.weights.round(12).tolist()
    ([-0.333333333333, 1.0], [1.5, 0.5])
    """
    if n < 1:
        raise ValueError(f"Gauss-Radau rule needs n >= 1, got {n}")
    if n == 1:
        x = np.array([1.0])
        w = np.array([2.0])
    else:
        c = np.zeros(n + 1)
        c[n - 1] = 1.0
        c[n] = 1.0
        left = np.sort(np.real(leg.legroots(c)))
        left[0] = -1.0
        # polish interior roots by Newton on P_{n-1} + P_n
        dc = leg.legder(c)
        for _ in range(3):
            left[1:] -= leg.legval(left[1:], c) / leg.legval(left[1:], dc)
        pn1 = np.zeros(n)
        pn1[n - 1] = 1.0
        w_left = (1.0 - left) / (n**2 * leg.legval(left, pn1) ** 2)
        w_left[0] = 2.0 / n**2
        x = -left[::-1].copy()
        w = w_left[::-1].copy()
        x[-1] = 1.0
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, 2 * n - 2)


@lru_cache(maxsize=None)
def gauss_lobatto_points(n: int) -> np.ndarray:
    """The n Gauss-Lobatto points on [-1, 1] (n >= 2), endpoints included."""
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    c = np.zeros(n)
    c[n - 1] = 1.0
    interior = np.sort(np.real(leg.legroots(leg.legder(c)))) if n > 2 else np.empty(0)
    x = np.concatenate([[-1.0], interior, [1.0]])
    x.setflags(write=False)
    return x


class NodalBasis1D:
    """Lagrange basis on [-1, 1] for the given nodes.

    Internally each basis function is stored by its Legendre coefficients,
    which keeps evaluation well conditioned for the node sets used here.
    """

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes must be a non-empty 1D array")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing (no duplicates)")
        self.nodes = nodes
        self.degree = nodes.size - 1
        vander = leg.legvander(nodes, self.degree)
        # column i holds the Legendre coefficients of basis_i
        self._coef = np.linalg.solve(vander, np.eye(nodes.size))
        self._dcoef = leg.legder(self._coef, axis=0) if self.degree > 0 else np.zeros((1, 1))

    def __len__(self):
        return self.nodes.size

    def value(self, x) -> np.ndarray:
        """Table ``V[q, i] = basis_i(x_q)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return leg.legvander(x, self.degree) @ self._coef

    def derivative(self, x) -> np.ndarray:
        """Table ``D[q, i] = basis_i'(x_q)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.degree == 0:
            return np.zeros((x.size, 1))
        return leg.legvander(x, self.degree - 1) @ self._dcoef


def lagrange_basis(nodes) -> NodalBasis1D:
    return NodalBasis1D(nodes)


@lru_cache(maxsize=None)
def velocity_basis_1d(degree: int) -> NodalBasis1D:
    """Gauss-Lobatto nodal basis of the given degree (velocity factor)."""
    return NodalBasis1D(gauss_lobatto_points(degree + 1))


def legendre_1d(n: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of ``L_0..L_n`` at ``x``; arrays of shape (len(x), n+1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val = leg.legvander(x, n)
    der = np.zeros_like(val)
    for j in range(1, n + 1):
        c = np.zeros(j + 1)
        c[j] = 1.0
        der[:, j] = leg.legval(x, leg.legder(c))
    return val, der


class PDiscBasis:
    """Modal basis of total degree ``r`` on the reference cell [-1, 1]^d.

    Function ``m`` is ``prod_i L_{e_i}(x_i)`` for the exponent tuple
    ``exponents[m]``; exponents are sorted by total degree, so function 0 is
    the constant 1. The basis is L2-orthogonal with
    ``int phi_m^2 = prod_i 2/(2 e_i + 1)``.
    """

    def __init__(self, r: int, d: int = 2):
        if r < 1:
            raise ValueError("pressure degree r must be >= 1 (r = 0 is excluded)")
        if d not in (2, 3):
            raise ValueError("only d = 2 or d = 3 are supported")
        self.r = r
        self.d = d
        exps = [e for e in np.ndindex(*(r + 1,) * d) if sum(e) <= r]
        exps.sort(key=lambda e: (sum(e), tuple(reversed(e))))
        self.exponents = np.array(exps, dtype=int)
        self.dim = len(exps)
        assert self.dim == comb(r + d, d)
        self.ref_norms = np.prod(2.0 / (2.0 * self.exponents + 1.0), axis=1)
        self._index = {tuple(e): i for i, e in enumerate(exps)}

    def index(self, exps) -> int:
        return self._index[tuple(exps)]

    def tabulate(self, pts_1d) -> np.ndarray:
        """Values on the tensor grid ``pts_1d^d``.

        Returns shape ``(dim, n, n)`` in 2D (last axis is x) or
        ``(dim, n, n, n)`` in 3D.
        """
        val, _ = legendre_1d(self.r, pts_1d)
        if self.d == 2:
            ex, ey = self.exponents[:, 0], self.exponents[:, 1]
            return val[:, ey].T[:, :, None] * val[:, ex].T[:, None, :]
        ex, ey, ez = self.exponents.T
        return (
            val[:, ez].T[:, :, None, None]
            * val[:, ey].T[:, None, :, None]
            * val[:, ex].T[:, None, None, :]
        )

    def evaluate(self, xi) -> np.ndarray:
        """Values at scattered reference points ``xi`` of shape (npts, d)."""
        xi = np.atleast_2d(xi)
        out = np.ones((xi.shape[0], self.dim))
        for axis in range(self.d):
            val, _ = legendre_1d(self.r, xi[:, axis])
            out *= val[:, self.exponents[:, axis]]
        return out


@lru_cache(maxsize=None)
def pdisc_basis(r: int, d: int = 2) -> PDiscBasis:
    return PDiscBasis(r, d)
