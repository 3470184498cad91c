"""Matplotlib figures written next to the CSV output."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_convergence", "plot_robustness", "plot_cavity"]


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_convergence(rows, path):
    """Log-log error curves per degree, one panel per norm."""
    by_r = defaultdict(list)
    for row in rows:
        by_r[row.r].append(row)
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, attr, title in zip(axes, ("e_v_L2", "e_p_L2", "e_v_H1"),
                               ("velocity L2(L2)", "pressure L2(L2)", "velocity H1(L2)")):
        for r, block in sorted(by_r.items()):
            h = [b.h for b in block]
            e = [getattr(b.errors, attr) for b in block]
            ax.loglog(h, e, "o-", label=f"r={r}")
        ax.set_xlabel("h")
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.invert_xaxis()
    axes[0].set_ylabel("error")
    axes[0].legend()
    return _save(fig, path)


def plot_robustness(rows, path):
    """Average iterations against refinement level for every configuration."""
    groups = defaultdict(list)
    for row in rows:
        groups[(row.r, row.mode, row.smoother, row.n_sm)].append(row)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (r, mode, sm, n_sm), block in sorted(groups.items()):
        block.sort(key=lambda b: b.c)
        ax.plot([b.c for b in block], [b.avg_iters for b in block], "o-",
                label=f"r={r} {mode} {sm} n_sm={n_sm}")
    ax.set_xlabel("refinements c")
    ax.set_ylabel("average GMRES iterations")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_cavity(traces, path):
    """Normalized probe pressure difference over time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for tr in traces:
        ax.plot(tr.t, np.asarray(tr.p_diff, dtype=float), label=f"c={tr.c} r={tr.r} n_sm={tr.n_sm}")
    ax.set_xlabel("t")
    ax.set_ylabel("p_diff")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)
