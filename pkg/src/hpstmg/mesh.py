"""Nested Cartesian meshes of an axis-aligned box.

Cells and vertices are numbered lexicographically with the x index running
fastest. Level ``s`` has ``base * 2**s`` cells per direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["Mesh", "MeshLevel", "VertexStarPatch", "build_cartesian", "cells_of_vertex",
           "enumerate_vertex_star_patches"]


@dataclass(frozen=True)
class VertexStarPatch:
    vertex: int
    cells: tuple[int, ...]


@dataclass(frozen=True)
class MeshLevel:
    """One level of the hierarchy."""

    level: int
    lower: np.ndarray
    upper: np.ndarray
    cells_per_dim: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.cells_per_dim)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_dim))

    @property
    def vertices_per_dim(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cells_per_dim)

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.vertices_per_dim))

    @property
    def h(self) -> np.ndarray:
        """Cell extents per direction."""
        return (self.upper - self.lower) / np.array(self.cells_per_dim)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def cell_multi_index(self, cell) -> np.ndarray:
        # unravel with x fastest
        return np.array(np.unravel_index(cell, self.cells_per_dim[::-1]))[::-1].T

    def cell_lower(self, cell=None) -> np.ndarray:
        """Lower-left corners of cells, shape (n, dim)."""
        if cell is None:
            cell = np.arange(self.n_cells)
        return self.lower + self.cell_multi_index(np.asarray(cell)) * self.h

    def cell_centroids(self) -> np.ndarray:
        return self.cell_lower() + 0.5 * self.h

    def locate(self, points) -> np.ndarray:
        """Cell id containing each point (points on faces go to the lower-index cell
        unless they sit on the upper domain boundary)."""
        pts = np.atleast_2d(points)
        idx = np.floor((pts - self.lower) / self.h).astype(int)
        idx = np.clip(idx, 0, np.array(self.cells_per_dim) - 1)
        return np.ravel_multi_index(idx[:, ::-1].T, self.cells_per_dim[::-1])

    def to_reference(self, points, cells) -> np.ndarray:
        """Reference coordinates in [-1, 1]^d of ``points`` inside ``cells``."""
        pts = np.atleast_2d(points)
        return 2.0 * (pts - self.cell_lower(cells)) / self.h - 1.0

    @cached_property
    def vertex_to_cells(self) -> list[tuple[int, ...]]:
        return [tuple(cells_of_vertex_level(self, v)) for v in range(self.n_vertices)]


def cells_of_vertex_level(lvl: MeshLevel, vertex: int) -> list[int]:
    if not 0 <= vertex < lvl.n_vertices:
        raise KeyError(f"unknown vertex id {vertex} on level {lvl.level}")
    vidx = np.array(np.unravel_index(vertex, lvl.vertices_per_dim[::-1]))[::-1]
    ncell = np.array(lvl.cells_per_dim)
    cells = []
    for offset in np.ndindex(*(2,) * lvl.dim):
        c = vidx - 1 + np.array(offset)
        if np.all(c >= 0) and np.all(c < ncell):
            cells.append(int(np.ravel_multi_index(c[::-1], lvl.cells_per_dim[::-1])))
    return sorted(cells)


@dataclass(frozen=True)
class Mesh:
    """Hierarchy of uniformly refined Cartesian meshes."""

    lower: np.ndarray
    upper: np.ndarray
    base_cells_per_dim: tuple[int, ...]
    levels: tuple[MeshLevel, ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.base_cells_per_dim)

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> int:
        return len(self.levels) - 1

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def __getitem__(self, s: int) -> MeshLevel:
        if not 0 <= s < len(self.levels):
            raise IndexError(f"mesh level {s} out of range 0..{len(self.levels) - 1}")
        return self.levels[s]

    def children(self, s: int, cell: int) -> list[int]:
        """The 2^d level-(s+1) cells refining ``cell`` on level ``s``."""
        coarse = self[s]
        fine = self[s + 1]
        cidx = coarse.cell_multi_index(cell)
        out = []
        for offset in np.ndindex(*(2,) * self.dim):
            f = 2 * cidx + np.array(offset[::-1])
            out.append(int(np.ravel_multi_index(f[::-1], fine.cells_per_dim[::-1])))
        return sorted(out)

    def parent(self, s: int, cell) -> np.ndarray:
        """Parent on level ``s-1`` of level-``s`` cells."""
        fine = self[s]
        coarse = self[s - 1]
        fidx = fine.cell_multi_index(np.asarray(cell))
        cidx = np.atleast_2d(fidx // 2)
        return np.ravel_multi_index(cidx[:, ::-1].T, coarse.cells_per_dim[::-1])

    def parent_child(self, s: int) -> np.ndarray:
        """Array (n_cells(s), 2^d) of children on level s+1."""
        return np.array([self.children(s, c) for c in range(self[s].n_cells)])


def build_cartesian(domain_box, base_cells_per_dim, levels: int) -> Mesh:
    """Build a nested hierarchy with ``levels`` levels (finest index ``levels-1``).

    Parameters
    ----------
    domain_box : pair of sequences
        ``(lower, upper)`` corners of the box.
    base_cells_per_dim : int or sequence of int
        Cells per direction on level 0.
    levels : int
        Number of levels, at least 1.
    """
    lower = np.asarray(domain_box[0], dtype=float)
    upper = np.asarray(domain_box[1], dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("domain box corners must be 1D and of equal length")
    dim = lower.size
    if dim not in (2, 3):
        raise ValueError("only 2D and 3D boxes are supported")
    if np.any(upper - lower <= 0.0):
        raise ValueError("domain box extents must be positive")
    base = np.broadcast_to(np.asarray(base_cells_per_dim, dtype=int), (dim,))
    if np.any(base < 1):
        raise ValueError("need at least one cell per direction")
    if levels < 1:
        raise ValueError("need at least one level")
    lvls = tuple(
        MeshLevel(s, lower, upper, tuple(int(b) * 2**s for b in base)) for s in range(levels)
    )
    return Mesh(lower, upper, tuple(int(b) for b in base), lvls)


def cells_of_vertex(mesh: Mesh, level: int, vertex: int) -> list[int]:
    return cells_of_vertex_level(mesh[level], vertex)


def enumerate_vertex_star_patches(mesh: Mesh, level: int) -> list[VertexStarPatch]:
    lvl = mesh[level]
    return [VertexStarPatch(v, tuple(cells_of_vertex_level(lvl, v)))
            for v in range(lvl.n_vertices)]
