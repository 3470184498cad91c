"""Additive space-time Vanka smoothers on cell and vertex-star patches.

Every patch owns all temporal dofs of the subinterval together with the
unconstrained velocity dofs and all pressure dofs of its cells. Local
matrices are stored as explicit dense inverses so that one sweep is a
batched matrix-vector product followed by a weighted scatter.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .operators import SpaceTimeBlockOperator

__all__ = [
    "PatchFactorization",
    "PatchSet",
    "patch_spatial_dofs",
    "build_cell_patches",
    "build_vertex_star_patches",
    "build_patches",
    "apply_additive",
    "smooth_step",
    "tensor_block_size",
    "DEFAULT_OMEGA",
    "DEFAULT_PATCH_MEMORY_CAP",
]

DEFAULT_OMEGA = 0.8
DEFAULT_PATCH_MEMORY_CAP = 1.5e9  # bytes of stored local inverses per level


@dataclass
class PatchFactorization:
    """One patch: global dof ids, local matrix and its inverse, valence weights."""

    dofs: np.ndarray
    matrix: np.ndarray
    inverse: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.dofs)


@dataclass
class PatchSet:
    """All patches of one level, padded to a common size for batched solves.

    Padding indices point to a dummy slot ``n`` that is dropped after the
    scatter; padded rows of the inverses are zero.
    """

    kind: str
    n: int
    index: np.ndarray  # (n_patches, n_max)
    inverses: np.ndarray  # (n_patches, n_max, n_max)
    sizes: np.ndarray
    weights: np.ndarray  # (n,) post-scatter valence weights
    matrices: list = field(default_factory=list, repr=False)
    n_singular: int = 0

    def __len__(self):
        return len(self.sizes)

    @property
    def sum_nt2(self) -> int:
        """Total number of stored local matrix entries."""
        return int(np.sum(self.sizes.astype(np.int64) ** 2))

    def patch(self, i: int) -> PatchFactorization:
        m = self.sizes[i]
        dofs = self.index[i, :m]
        return PatchFactorization(dofs, self.matrices[i] if self.matrices else None,
                                  self.inverses[i, :m, :m], self.weights[dofs])

    def stats(self) -> dict:
        return {"kind": self.kind, "patches": len(self), "n_T_max": int(self.sizes.max()),
                "sum_nT2": self.sum_nt2, "singular": self.n_singular}


def tensor_block_size(k: int, r: int, d: int = 2) -> int:
    """Block size counting ``(r+1)^d`` pressure dofs, as for a tensor pressure space (comparison only)."""
    return (k + 1) * (d * (r + 2) ** d + (r + 1) ** d)


def cell_block_size(k: int, r: int, d: int = 2) -> int:
    """True size of an unconstrained cell patch, with ``dim P_r = C(r+d, d)``."""
    return (k + 1) * (d * (r + 2) ** d + comb(r + d, d))


def patch_spatial_dofs(op: SpaceTimeBlockOperator, cells) -> tuple[np.ndarray, np.ndarray]:
    """Sorted unconstrained velocity dofs and pressure dofs of a cell set."""
    vs, ps = op.vspace, op.pspace
    cells = np.atleast_1d(np.asarray(cells, dtype=int))
    v = np.unique(vs.cell_dofs[cells].ravel())
    v = v[~vs.boundary_mask[v]]
    p = np.unique(ps.cell_dofs[cells].ravel())
    return v, p


def _space_time_index(op: SpaceTimeBlockOperator, v, p) -> np.ndarray:
    lay = op.layout
    vv = (np.arange(lay.nb)[:, None] * lay.n_v + v[None, :]).ravel()
    pp = (lay.nb * lay.n_v + np.arange(lay.nb)[:, None] * lay.n_p + p[None, :]).ravel()
    return np.concatenate([vv, pp])


def _invert_batch(mats: np.ndarray, singular: str):
    try:
        inv = np.linalg.inv(mats)
    except np.linalg.LinAlgError:
        inv = np.empty_like(mats)
        for i, A in enumerate(mats):
            try:
                inv[i] = np.linalg.inv(A)
            except np.linalg.LinAlgError:
                inv[i] = np.full_like(A, np.nan)
    n = mats.shape[-1]
    defect = np.abs(mats @ inv - np.eye(n)).max(axis=(1, 2))
    bad = np.flatnonzero(~(defect < 1e-8))
    if len(bad) and singular == "raise":
        raise np.linalg.LinAlgError(f"{len(bad)} singular patch matrices")
    for i in bad:
        inv[i] = np.linalg.pinv(mats[i], rcond=1e-12)
    return inv, len(bad)


def build_patches(op: SpaceTimeBlockOperator, cell_sets, kind: str, singular: str = "pinv",
                  memory_cap: float = DEFAULT_PATCH_MEMORY_CAP, keep_matrices: bool = False,
                  matrix=None) -> PatchSet:
    """Factorize ``R_T S R_T^T`` for every cell set.

    Local matrices are extracted from the assembled constrained operator,
    which agrees with the matrix-free action to rounding.
    """
    if not op.constrained:
        raise ValueError("patches are built from the constrained operator")
    idx = [_space_time_index(op, *patch_spatial_dofs(op, cs)) for cs in cell_sets]
    sizes = np.array([len(i) for i in idx])
    nmax = int(sizes.max())
    need = 8.0 * len(idx) * nmax * nmax
    if need > memory_cap:
        raise MemoryError(f"{kind} patches need {need / 1e6:.0f} MB > cap {memory_cap / 1e6:.0f} MB")
    S = (op.assembled() if matrix is None else matrix).tocsr()
    n = op.size
    index = np.full((len(idx), nmax), n, dtype=np.int64)
    mats = np.zeros((len(idx), nmax, nmax))
    kept = []
    for j, ids in enumerate(idx):
        m = len(ids)
        index[j, :m] = ids
        local = S[ids][:, ids].toarray()
        mats[j, :m, :m] = local
        mats[j, m:, m:] = np.eye(nmax - m)
        if keep_matrices:
            kept.append(local)
    inv, n_bad = _invert_batch(mats, singular)
    if n_bad:
        warnings.warn(f"{n_bad} singular {kind} patch matrices replaced by pseudo-inverses",
                      RuntimeWarning, stacklevel=2)
    for j, m in enumerate(sizes):
        inv[j, m:, :] = 0.0
        inv[j, :, m:] = 0.0
    del mats
    count = np.bincount(index.ravel(), minlength=n + 1)[:n]
    weights = np.zeros(n)
    covered = count > 0
    weights[covered] = 1.0 / count[covered]
    return PatchSet(kind, n, index, inv, sizes, weights, kept, n_bad)


def build_cell_patches(op: SpaceTimeBlockOperator, **kw) -> PatchSet:
    """One patch per spatial cell (all temporal dofs of the subinterval)."""
    cells = [[c] for c in range(op.vspace.level.n_cells)]
    return build_patches(op, cells, "cell", **kw)


def build_vertex_star_patches(op: SpaceTimeBlockOperator, **kw) -> PatchSet:
    """One patch per mesh vertex, made of all cells sharing it."""
    lvl = op.vspace.level
    return build_patches(op, lvl.vertex_to_cells, "vertex_star", **kw)


def apply_additive(patches: PatchSet, residual) -> np.ndarray:
    """``sum_T w * R_T^T [R_T S R_T^T]^{-1} R_T r`` with post-scatter valence weights."""
    r = np.asarray(residual, dtype=float)
    ext = np.append(r, 0.0)
    loc = ext[patches.index]
    sol = np.matmul(patches.inverses, loc[:, :, None])[:, :, 0]
    acc = np.bincount(patches.index.ravel(), weights=sol.ravel(), minlength=patches.n + 1)
    return acc[: patches.n] * patches.weights


def smooth_step(patches: PatchSet, operator, b, u, omega: float = DEFAULT_OMEGA):
    """One damped additive Vanka step ``u + omega * smoother(b - S u)``."""
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    return u + omega * apply_additive(patches, b - operator(u))
