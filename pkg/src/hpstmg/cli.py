"""Command line entry point: ``hpstmg <subcommand> [options]``.

Exit codes: 0 success, 1 failed selftest gate or solver failure,
2 usage or configuration error, 3 missing config file.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .harness.config import ConfigError, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NO_CONFIG = 0, 1, 2, 3

# CLI option -> (section, key)
_OVERRIDES = {
    "nu": ("problem", "nu"), "T": ("problem", "T"), "N": ("problem", "N"),
    "k": ("discretization", "k"),
    "base_cells": ("mesh", "base_cells"), "coarse_level": ("mesh", "coarse_level"),
    "nu1": ("mg", "nu1"), "nu2": ("mg", "nu2"), "omega": ("mg", "omega"),
    "smoother": ("mg", "smoother"), "coarse_cap": ("mg", "coarse_cap"),
    "project_pressure": ("mg", "project_pressure"), "mode": ("mg", "mode"),
    "rtol": ("gmres", "rtol"), "atol": ("gmres", "atol"), "maxit": ("gmres", "maxit"),
    "csv_path": ("output", "csv_path"),
}


def _common(p):
    p.add_argument("--config", help="INI file with sections problem/discretization/mesh/mg/gmres/output")
    p.add_argument("--nu", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--N", type=int, help="time steps (cavity; 0 = default)")
    p.add_argument("--k", type=int, help="temporal degree (default k = r)")
    p.add_argument("--base-cells", dest="base_cells", type=int)
    p.add_argument("--coarse-level", dest="coarse_level", type=int)
    p.add_argument("--nu1", type=int)
    p.add_argument("--nu2", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--smoother", choices=["cell", "vertex_star"])
    p.add_argument("--coarse-cap", dest="coarse_cap", type=int)
    p.add_argument("--project-pressure", dest="project_pressure", choices=["true", "false"])
    p.add_argument("--mode", choices=["hp", "h"])
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--maxit", type=int)
    p.add_argument("--csv", dest="csv_path", help="CSV output path (figure uses the same stem)")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--allow-large", action="store_true", help="lift the desk-scale guard (r <= 5, c <= 5)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpstmg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="manufactured-solution error table with EOCs")
    _common(p)
    p.add_argument("--r", type=int, nargs="+", default=[2])
    p.add_argument("--c", type=int, nargs="+", default=[1, 2, 3])

    p = sub.add_parser("robustness", help="average GMRES iterations per time step")
    _common(p)
    p.add_argument("--r", type=int, nargs="+", default=[2])
    p.add_argument("--c", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--n-sm", dest="n_sm", type=int, nargs="+", default=[1])
    p.add_argument("--smoothers", nargs="+", default=None, choices=["cell", "vertex_star"])
    p.add_argument("--modes", nargs="+", default=None, choices=["hp", "h"])
    p.add_argument("--steps", type=int, default=None, help="only march this many steps")

    p = sub.add_parser("cavity", help="2D lid-driven cavity pressure-difference trace")
    _common(p)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--n-sm", dest="n_sm", type=int, default=1)

    p = sub.add_parser("hierarchy", help="print the merged hp hierarchy")
    p.add_argument("--h-fine", type=float, default=0.125)
    p.add_argument("--h-coarse", type=float, default=None, help="default 4 * h_fine")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--r-coarse", type=int, default=1)
    p.add_argument("--tau", type=float, default=0.125)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--k-coarse", type=int, default=1)

    p = sub.add_parser("selftest", help="oracle-equivalence checks on small meshes")
    p.add_argument("--seed", type=int, default=0)
    return ap


def _config(args):
    over = {}
    for name, key in _OVERRIDES.items():
        val = getattr(args, name, None)
        if val is not None:
            over[key] = val
    if getattr(args, "r", None) is not None and isinstance(args.r, int):
        over[("discretization", "r")] = args.r
    return load_config(args.config, over)


def _guard(args, rs, cs):
    if not args.allow_large and (max(rs) > 5 or max(cs) > 5):
        raise ConfigError("r > 5 or c > 5 exceeds the desk-scale guard; pass --allow-large")


def _settings(cfg, T=None):
    from .harness.studies import StudySettings

    p, m, mg, g = cfg["problem"], cfg["mesh"], cfg["mg"], cfg["gmres"]
    return StudySettings(nu=p["nu"], T=T if T is not None else p["T"], base_cells=m["base_cells"],
                         coarse_level=m["coarse_level"], omega=mg["omega"], smoother=mg["smoother"],
                         mode=mg["mode"], nu1=mg["nu1"], nu2=mg["nu2"], rtol=g["rtol"], atol=g["atol"],
                         maxit=g["maxit"], project_pressure=mg["project_pressure"],
                         coarse_cap=mg["coarse_cap"], k_offset=cfg.k - cfg["discretization"]["r"])


def _fmt(x):
    return "-" if x is None else (f"{x:.3e}" if isinstance(x, float) and abs(x) < 1e-2 else f"{x:.2f}")


def cmd_convergence(args, cfg):
    from .harness.plotting import plot_convergence
    from .harness.studies import convergence_study, write_convergence_csv

    _guard(args, args.r, args.c)
    st = _settings(cfg)
    out = []
    for r in args.r:
        st.k_offset = (cfg["discretization"]["k"] - r) if cfg["discretization"]["k"] >= 0 else 0
        out.extend(convergence_study([r], args.c, st))
    csv_path = write_convergence_csv(out, cfg["output"]["csv_path"])
    print(f"{'r':>2} {'c':>2} {'e_v_L2':>10} {'eoc':>5} {'e_p_L2':>10} {'eoc':>5} {'e_v_H1':>10} {'eoc':>5} {'iters':>6}")
    for row in out:
        d = row.as_dict()
        print(f"{row.r:>2} {row.c:>2} {d['e_v_L2']:>10.3e} {_fmt(d['eoc_v_L2']):>5} {d['e_p_L2']:>10.3e} "
              f"{_fmt(d['eoc_p_L2']):>5} {d['e_v_H1']:>10.3e} {_fmt(d['eoc_v_H1']):>5} {row.avg_iters:>6.2f}")
    print(f"wrote {csv_path}")
    if not args.no_figure and cfg["output"]["figure"]:
        print(f"wrote {plot_convergence(out, Path(csv_path).with_suffix('.png'))}")
    return EXIT_OK


def cmd_robustness(args, cfg):
    from .harness.plotting import plot_robustness
    from .harness.studies import robustness_sweep, write_robustness_csv

    _guard(args, args.r, args.c)
    st = _settings(cfg)
    st.steps = args.steps
    rows = robustness_sweep(args.r, args.c, args.smoothers or [cfg["mg"]["smoother"]], args.n_sm,
                            args.modes or [cfg["mg"]["mode"]], st)
    csv_path = write_robustness_csv(rows, cfg["output"]["csv_path"])
    print(f"{'r':>2} {'c':>2} {'mode':>4} {'smoother':>11} {'n_sm':>4} {'avg_iters':>9} {'sum_nT2':>12}")
    for row in rows:
        print(f"{row.r:>2} {row.c:>2} {row.mode:>4} {row.smoother:>11} {row.n_sm:>4} "
              f"{row.avg_iters:>9.2f} {row.sum_nT2:>12d}")
    print(f"wrote {csv_path}")
    if not args.no_figure and cfg["output"]["figure"]:
        print(f"wrote {plot_robustness(rows, Path(csv_path).with_suffix('.png'))}")
    return EXIT_OK


def cmd_cavity(args, cfg):
    from .harness.cavity import cavity_demo_2d, write_cavity_csv
    from .harness.plotting import plot_cavity
    from .harness.problems import CavityProblem

    _guard(args, [args.r], [args.c])
    T = cfg["problem"]["T"] if ("problem", "T") in cfg.explicit else 8.0
    prob = CavityProblem(nu=cfg["problem"]["nu"], T=T)
    N = cfg["problem"]["N"]
    base = N / 2**args.c if N > 0 else 16
    if N > 0 and N % 2**args.c:
        raise ConfigError("problem.N must be a multiple of 2^c")
    mg, g = cfg["mg"], cfg["gmres"]
    tr = cavity_demo_2d(args.c, args.r, cfg.k if cfg["discretization"]["k"] >= 0 else args.r,
                        args.n_sm, prob, int(base), mg["omega"], mg["smoother"],
                        cfg["mesh"]["coarse_level"], g["rtol"], g["atol"], g["maxit"], mode=mg["mode"])
    csv_path = write_cavity_csv(tr, cfg["output"]["csv_path"])
    m = tr.march
    print(f"steps {len(m.steps)}, average iterations {m.avg_iterations:.2f}, "
          f"throughput {m.throughput:.3e} dofs/s")
    finite = [x for x in tr.p_diff if np.isfinite(x)]
    if finite:
        print(f"p_diff at t={tr.t[-1]:g}: {tr.p_diff[-1]:.6g}")
    print(f"wrote {csv_path}")
    if not args.no_figure and cfg["output"]["figure"]:
        print(f"wrote {plot_cavity([tr], Path(csv_path).with_suffix('.png'))}")
    return EXIT_OK


def cmd_hierarchy(args):
    from .hierarchy import combine_hierarchies, construct_hierarchy, format_hierarchy

    hc = args.h_coarse if args.h_coarse is not None else 4 * args.h_fine
    spatial = construct_hierarchy(args.h_fine, hc, args.r, args.r_coarse)
    temporal = construct_hierarchy(args.tau, args.tau, args.k, args.k_coarse)
    desc = combine_hierarchies(spatial, temporal)
    print(format_hierarchy(desc))
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(seed=args.seed, out=print)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "hierarchy":
            return cmd_hierarchy(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        cfg = _config(args)
        return {"convergence": cmd_convergence, "robustness": cmd_robustness,
                "cavity": cmd_cavity}[args.command](args, cfg)
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
