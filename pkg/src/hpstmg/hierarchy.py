"""Merged hp space-time level sequences and their per-level bundles.

Spatial and temporal hierarchies are generated independently
(:func:`construct_hierarchy`) and then zipped level by level
(:func:`combine_hierarchies`), padding the shorter one at its fine end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dofs import PressureSpace, VelocitySpace
from .mesh import Mesh
from .operators import SpaceTimeBlockOperator, SpatialOperators
from .time_basis import temporal_matrices
from .transfer import TransferPair, build_transfer
from .vanka import DEFAULT_OMEGA, DEFAULT_PATCH_MEMORY_CAP, build_cell_patches, build_vertex_star_patches

__all__ = [
    "LevelDescriptor",
    "Level",
    "LevelConfig",
    "construct_hierarchy",
    "combine_hierarchies",
    "hp_descriptors",
    "h_only_descriptors",
    "instantiate_levels",
    "format_hierarchy",
    "build_levels",
]

_REL = 1e-9


def construct_hierarchy(h_fine: float, h_coarse: float, p_fine: int, p_coarse: int):
    """Polynomial-over-geometric coarsening of one direction.

    The degree is halved (``r // 2``) at the finest mesh size while it stays
    at or above ``p_coarse``; the mesh size is then doubled at the reached
    degree up to ``h_coarse``.

    Returns
    -------
    list of (mesh_size, degree)
        Ordered coarse to fine.
    """
    if not (h_fine > 0 and h_coarse > 0):
        raise ValueError("mesh sizes must be positive")
    if h_fine > h_coarse * (1 + _REL):
        raise ValueError("h_fine must not exceed h_coarse")
    if p_coarse < 1 or p_fine < p_coarse:
        raise ValueError("need p_fine >= p_coarse >= 1")
    levels = []
    r = p_fine
    while True:
        levels.append((h_fine, r))
        if r // 2 < p_coarse:
            break
        r //= 2
    h = 2.0 * h_fine
    while h <= h_coarse * (1 + _REL):
        levels.append((h, r))
        h *= 2.0
    if not levels:
        raise ValueError("empty hierarchy")
    return levels[::-1]


@dataclass(frozen=True)
class LevelDescriptor:
    """One level of the merged hierarchy (index 0 is the coarsest)."""

    index: int
    h: float
    r: int
    tau: float
    k: int
    s: int = -1  # spatial mesh level, filled in once a mesh is known
    l: int = 0  # temporal level (single subinterval)
    transfer_kind: tuple[str, ...] = ()

    def row(self) -> str:
        return f"{self.index}:({_fmt_h(self.h)},{self.r};{_fmt_h(self.tau)},{self.k})"


def _fmt_h(x: float) -> str:
    return f"{x:g}"


def _kind(a, b) -> tuple[str, ...]:
    kinds = []
    if not math.isclose(a.h, b.h, rel_tol=_REL):
        kinds.append("h_space")
    if a.r != b.r:
        kinds.append("p_space")
    if not math.isclose(a.tau, b.tau, rel_tol=_REL):
        kinds.append("h_time")
    if a.k != b.k:
        kinds.append("p_time")
    return tuple(kinds) or ("identity",)


def combine_hierarchies(spatial_list, temporal_list) -> list[LevelDescriptor]:
    """Zip spatial ``(h, r)`` and temporal ``(tau, k)`` lists, coarse to fine."""
    if not spatial_list or not temporal_list:
        raise ValueError("empty hierarchy")
    L = max(len(spatial_list), len(temporal_list))
    sp_ = list(spatial_list) + [spatial_list[-1]] * (L - len(spatial_list))
    tm = list(temporal_list) + [temporal_list[-1]] * (L - len(temporal_list))
    out = []
    for i, ((h, r), (tau, k)) in enumerate(zip(sp_, tm)):
        d = LevelDescriptor(i, float(h), int(r), float(tau), int(k))
        if out:
            d = LevelDescriptor(i, d.h, d.r, d.tau, d.k, transfer_kind=_kind(out[-1], d))
        out.append(d)
    for a, b in zip(out, out[1:]):
        if b.h > a.h * (1 + _REL) or b.r < a.r or b.k < a.k:
            raise ValueError("hierarchy is not monotone")
    return out


def _with_mesh_levels(desc, mesh: Mesh, s_fine: int):
    h_ref = float(mesh[s_fine].h[0])
    out = []
    for d in desc:
        ratio = d.h / h_ref
        step = round(math.log2(ratio))
        if not math.isclose(2.0**step, ratio, rel_tol=1e-9):
            raise ValueError(f"mesh size {d.h} is not a level of the mesh")
        s = s_fine - step
        if not 0 <= s < mesh.level_count:
            raise ValueError(f"mesh size {d.h} falls outside the mesh hierarchy")
        out.append(LevelDescriptor(d.index, d.h, d.r, d.tau, d.k, s, d.l, d.transfer_kind))
    return out


def hp_descriptors(mesh: Mesh, s_fine: int, s_coarse: int, r: int, k: int, tau: float,
                   r_coarse: int = 1, k_coarse: int = 1) -> list[LevelDescriptor]:
    """hp space-time hierarchy on ``mesh`` between levels ``s_coarse`` and ``s_fine``."""
    h_f = float(mesh[s_fine].h[0])
    h_c = float(mesh[s_coarse].h[0])
    spatial = construct_hierarchy(h_f, h_c, r, min(r_coarse, r))
    temporal = construct_hierarchy(tau, tau, max(k, 1), max(min(k_coarse, k), 1)) if k > 0 else [(tau, 0)]
    return _with_mesh_levels(combine_hierarchies(spatial, temporal), mesh, s_fine)


def h_only_descriptors(mesh: Mesh, s_fine: int, s_coarse: int, r: int, k: int,
                       tau: float) -> list[LevelDescriptor]:
    """Spatial geometric multigrid: fixed r and k, h coarsened down to level ``s_coarse``."""
    h_f = float(mesh[s_fine].h[0])
    spatial = [(h_f * 2.0**j, r) for j in range(s_fine - s_coarse, -1, -1)]
    return _with_mesh_levels(combine_hierarchies(spatial, [(tau, k)]), mesh, s_fine)


def format_hierarchy(desc) -> str:
    """Plain-text table of a hierarchy (one row per level, coarsest first)."""
    with_s = any(d.s >= 0 for d in desc)
    head = f"{'level':>5}  {'h':>10}  {'r':>2}  {'tau':>10}  {'k':>2}  " + ("  s  " if with_s else "")
    lines = [head + "transfer"]
    for d in desc:
        row = f"{d.index:>5}  {_fmt_h(d.h):>10}  {d.r:>2}  {_fmt_h(d.tau):>10}  {d.k:>2}  "
        if with_s:
            row += f"{d.s:>3}  "
        lines.append(row + ("+".join(d.transfer_kind) or "-"))
    return "\n".join(lines)


@dataclass
class LevelConfig:
    """Per-level instantiation options."""

    nu: float = 0.1
    smoother: str = "cell"
    omega: float = DEFAULT_OMEGA
    coarse_cap: int = 50_000
    patch_memory_cap: float = DEFAULT_PATCH_MEMORY_CAP
    singular_patches: str = "pinv"


@dataclass
class Level:
    """Operator, smoother and transfer of one hierarchy level."""

    descriptor: LevelDescriptor
    vspace: VelocitySpace
    pspace: PressureSpace
    operator: SpaceTimeBlockOperator
    transfer: TransferPair | None = None
    is_coarse: bool = False
    config: LevelConfig = field(default_factory=LevelConfig)
    _smoother: object = field(default=None, repr=False)
    _coarse: object = field(default=None, repr=False)

    @property
    def smoother(self):
        if self._smoother is None and not self.is_coarse:
            kw = dict(singular=self.config.singular_patches, memory_cap=self.config.patch_memory_cap)
            if self.config.smoother == "cell":
                self._smoother = build_cell_patches(self.operator, **kw)
            elif self.config.smoother == "vertex_star":
                self._smoother = build_vertex_star_patches(self.operator, **kw)
            else:
                raise ValueError(f"unknown smoother {self.config.smoother!r}")
        return self._smoother

    @property
    def coarse_solver(self):
        if self._coarse is None and self.is_coarse:
            from .solver import CoarseSolver

            self._coarse = CoarseSolver(self.operator, cap=self.config.coarse_cap)
        return self._coarse

    @property
    def n_dofs(self) -> int:
        return self.operator.size


def instantiate_levels(descriptors, mesh: Mesh, config: LevelConfig | None = None,
                       build: bool = False) -> list[Level]:
    """Build spaces, operators and transfers for every descriptor.

    Smoothers and the coarse factorization are created on first use unless
    ``build`` is set.
    """
    cfg = config or LevelConfig()
    spaces: dict = {}
    levels = []
    for d in descriptors:
        if d.s < 0:
            raise ValueError("descriptor lacks a mesh level; use hp_descriptors/h_only_descriptors")
        key = (d.s, d.r)
        if key not in spaces:
            vs = VelocitySpace(mesh[d.s], d.r)
            ps = PressureSpace(mesh[d.s], d.r)
            spaces[key] = (vs, ps, SpatialOperators(vs, ps))
        vs, ps, so = spaces[key]
        op = SpaceTimeBlockOperator(so, temporal_matrices(d.k, d.tau), cfg.nu)
        tr = None
        if levels:
            prev = levels[-1]
            tr = build_transfer((prev.vspace, prev.pspace), (vs, ps), prev.descriptor.k, d.k)
        levels.append(Level(d, vs, ps, op, tr, is_coarse=not levels, config=cfg))
    if build:
        for lv in levels:
            _ = lv.coarse_solver if lv.is_coarse else lv.smoother
    return levels


def build_levels(mesh: Mesh, s_fine: int, r: int, k: int, tau: float, mode: str = "hp",
                 s_coarse: int = 0, config: LevelConfig | None = None, r_coarse: int = 1,
                 k_coarse: int = 1) -> list[Level]:
    """Descriptors plus instantiation in one call (``mode`` is ``"hp"`` or ``"h"``)."""
    s_coarse = min(s_coarse, s_fine)
    if mode == "hp":
        desc = hp_descriptors(mesh, s_fine, s_coarse, r, k, tau, r_coarse, k_coarse)
    elif mode in ("h", "h_only"):
        desc = h_only_descriptors(mesh, s_fine, s_coarse, r, k, tau)
    else:
        raise ValueError(f"unknown multigrid mode {mode!r}")
    return instantiate_levels(desc, mesh, config)
