"""Closed-form test problems."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ManufacturedProblem", "manufactured_problem", "CavityProblem", "cavity_problem"]

PI = np.pi


@dataclass(frozen=True)
class ManufacturedProblem:
    """Prescribed Stokes solution on the unit square.

    All callables take ``points`` of shape (n, 2) and a scalar time.
    Velocities return (n, 2), the pressure returns (n,).
    """

    nu: float
    T: float
    velocity: Callable
    pressure: Callable
    forcing: Callable
    velocity_gradient: Callable
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)

    def initial_velocity(self, points):
        return self.velocity(points, 0.0)

    def dirichlet(self, points, t):
        return self.velocity(points, t)


def manufactured_problem(nu: float = 0.1, T: float = 1.0) -> ManufacturedProblem:
    """``v = sin t (sin^2(pi x) sin(pi y) cos(pi y), -sin(pi x) cos(pi x) sin^2(pi y))``,
    ``p = sin t sin(pi x) cos(pi x) sin(pi y) cos(pi y)``.

    The forcing ``f = v_t - nu lap v + grad p`` is differentiated by hand.
    """

    def parts(points):
        x, y = points[:, 0], points[:, 1]
        sx, cx = np.sin(PI * x), np.cos(PI * x)
        sy, cy = np.sin(PI * y), np.cos(PI * y)
        return x, y, sx, cx, sy, cy

    def velocity(points, t):
        _, _, sx, cx, sy, cy = parts(np.atleast_2d(points))
        s = np.sin(t)
        return np.column_stack([s * sx**2 * sy * cy, -s * sx * cx * sy**2])

    def pressure(points, t):
        _, _, sx, cx, sy, cy = parts(np.atleast_2d(points))
        return np.sin(t) * sx * cx * sy * cy

    def velocity_gradient(points, t):
        x, y, sx, cx, sy, cy = parts(np.atleast_2d(points))
        s = np.sin(t)
        a, da = sx**2, PI * np.sin(2 * PI * x)
        b, db = sy * cy, PI * np.cos(2 * PI * y)
        c, dc = sx * cx, PI * np.cos(2 * PI * x)
        e, de = sy**2, PI * np.sin(2 * PI * y)
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = s * da * b
        g[:, 0, 1] = s * a * db
        g[:, 1, 0] = -s * dc * e
        g[:, 1, 1] = -s * c * de
        return g

    def forcing(points, t):
        x, y, sx, cx, sy, cy = parts(np.atleast_2d(points))
        s, ds = np.sin(t), np.cos(t)
        a, b = sx**2, sy * cy
        c, e = sx * cx, sy**2
        lap1 = 2 * PI**2 * np.cos(2 * PI * x) * b - 4 * PI**2 * a * b
        lap2 = -(-4 * PI**2 * c * e + 2 * PI**2 * c * np.cos(2 * PI * y))
        px = s * PI * np.cos(2 * PI * x) * b
        py = s * PI * c * np.cos(2 * PI * y)
        f1 = ds * a * b - nu * s * lap1 + px
        f2 = -ds * c * e - nu * s * lap2 + py
        return np.column_stack([f1, f2])

    return ManufacturedProblem(nu, T, velocity, pressure, forcing, velocity_gradient)


@dataclass(frozen=True)
class CavityProblem:
    """Lid-driven cavity on the unit square with a time-periodic lid."""

    nu: float
    T: float
    probes: tuple = ((0.875, 0.125), (0.875, 0.875))
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)

    def lid_speed(self, t):
        return np.sin(PI * t / 4.0)

    def dirichlet(self, points, t):
        """Lid velocity on ``y = 1`` strictly between the corners, no-slip elsewhere."""
        pts = np.atleast_2d(points)
        x, y = pts[:, 0], pts[:, 1]
        tol = 1e-12
        lid = (np.abs(y - self.upper[1]) < tol) & (x > self.lower[0] + tol) & (x < self.upper[0] - tol)
        out = np.zeros((len(pts), 2))
        out[lid, 0] = self.lid_speed(t)
        return out


def cavity_problem(nu: float = 0.1, T: float = 8.0) -> CavityProblem:
    return CavityProblem(nu, T)
