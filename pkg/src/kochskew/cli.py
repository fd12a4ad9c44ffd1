"""Command-line entry point: geometry, simulate, estimate, oracle, regimes, rr-check."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .diffusion import SimConfig, run_paths
from .errors import KochSkewError, StatisticalFailure
from .functionals import (estimate_dirichlet, estimate_robin, estimate_u_n, laplace_local_time,
                          level_step, resolvent_estimate)
from .geometry import build_domain, sigma_n, svg_sketch, vertex_rings_text
from .lab import COLUMNS, RegimeSchedule, StudyConfig, check_prop_rr, classify_limit, \
    run_regime_study
from .radial import IntervalModel, convergence_sweep, fd_mean_exit, fixed_c_schedule, \
    halving_eps, mean_exit_closed_form, simulate_1d_skew

G_FIELDS = {"one": lambda x, y: np.ones_like(x), "zero": lambda x, y: np.zeros_like(x),
            "x+y": lambda x, y: x + y, "x2+y2": lambda x, y: x * x + y * y,
            "cos": lambda x, y: np.cos(3 * x) * np.cos(2 * y)}

# flag name -> config key
SIM_FLAGS = {"alpha": "alpha", "level": "level", "b": "b", "cn": "c_n", "deltan": "delta_n",
             "kill_mode": "kill_mode", "h": "h", "shell": "shell", "tmax": "tmax",
             "paths": "paths", "seed": "seed", "nu_eval": "nu_eval", "kappa_L": "kappa_L"}


def _params(args) -> dict:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    over = {}
    for flag, key in SIM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    for key in ("levels", "horizon", "robin_c0", "h0"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "x0", None):
        over["x0"] = args.x0[0]
    return io.override(io.parse_config(text), over)


def _domain(p):
    return build_domain(p["alpha"], p["level"], p["b"])


def _sim(p) -> SimConfig:
    h = p["h"] if p["h"] is not None else level_step(p["level"], p["h0"], p["alpha"])
    return SimConfig(h=h, shell=p["shell"], tmax=p["tmax"], delta_n=p["delta_n"], c_n=p["c_n"],
                     kill_mode=p["kill_mode"], seed=p["seed"], n_paths=p["paths"],
                     nu_eval=p["nu_eval"], aggregate=p["aggregate"], kappa=p["kappa"],
                     bridge=p["bridge"], kappa_L=p["kappa_L"])


def _out(args, name: str) -> Path:
    return Path(args.out) if args.out else io.output_root() / name


def _x0_list(args, p):
    if getattr(args, "x0", None):
        return [io._point(s) for s in args.x0]
    return [p["x0"]]


def cmd_geometry(args):
    p = _params(args)
    d = _domain(p)
    bd = d.boundary
    summary = {"alpha": d.alpha, "level": d.level, "b": d.b, "segments": bd.n_segments,
               "segment_length": bd.segment_length, "arclength": bd.arclength(),
               "normalized_arclength": sigma_n(d.alpha, d.level) * bd.arclength(),
               "area_omega": d.area_omega, "cells": d.n_cells, "max_weight": d.max_weight}
    m = io.RunManifest(p, p["seed"], "geometry")
    io.emit_results(_out(args, "geometry"), m, summaries={"geometry": summary},
                    texts={"rings.txt": vertex_rings_text(d), "sketch.svg": svg_sketch(d)})
    print(io.json_text(summary), end="")


FUNCTIONAL_COLUMNS = ("path", "lifetime", "cause", "L_sym", "L_left", "L_right", "gamma_omega",
                      "gamma_sigma", "crossings", "sigma_choices", "zeta", "integral")


def cmd_simulate(args):
    p = _params(args)
    d = _domain(p)
    cfg = _sim(p)
    rt = np.linspace(0.0, cfg.tmax, args.trace_points) if args.trace else None
    b = run_paths(p["x0"], cfg, d, record_times=rt)
    rows = [(int(b.path_ids[i]), b.lifetime[i], int(b.cause[i]), b.L_sym[i], b.L_left[i],
             b.L_right[i], b.gamma_omega[i], b.gamma_sigma[i], int(b.crossings[i]),
             int(b.sigma_choices[i]), b.zeta[i], b.integral[i]) for i in range(len(b))]
    tables = {"paths": (FUNCTIONAL_COLUMNS, rows)}
    if args.trace:
        trows = []
        for i in range(min(args.trace, len(b))):
            for k, t in enumerate(rt):
                x, y, reg, L = b.records[i, k]
                trows.append((i, t, x, y, reg, L))
        tables["traces"] = (("path", "t", "x", "y", "region", "L_sym"), trows)
    summary = {"causes": b.cause_counts(), "mean_lifetime": float(b.lifetime.mean()),
               "mean_L_sym": float(b.L_sym.mean()), "crossings": int(b.crossings.sum()),
               "sigma_choices": int(b.sigma_choices.sum()), "anomalies": int(b.anomalies.sum()),
               "elapsed": b.elapsed}
    io.emit_results(_out(args, "simulate"), io.RunManifest(p, p["seed"], "simulate"),
                    tables=tables, summaries={"summary": summary})
    print(io.json_text(summary), end="")


ESTIMATE_COLUMNS = ("estimator", "x", "y", "mean", "stderr", "ci_lo", "ci_hi", "n_paths", "seed")


def cmd_estimate(args):
    p = _params(args)
    d = _domain(p)
    cfg = _sim(p)
    f = args.f
    records, rows = [], []
    for x0 in _x0_list(args, p):
        if args.estimator == "u_n":
            e = estimate_u_n(x0, f, cfg, d)
        elif args.estimator == "robin":
            e = estimate_robin(x0, f, args.delta0, args.c0, domain=d, h=cfg.h, n_paths=cfg.n_paths,
                               seed=cfg.seed, tmax=cfg.tmax)
        elif args.estimator == "dirichlet":
            e = estimate_dirichlet(x0, f, args.delta0, domain=d, h=cfg.h, n_paths=cfg.n_paths,
                                   seed=cfg.seed, tmax=cfg.tmax)
        elif args.estimator == "resolvent":
            e = resolvent_estimate(x0, f, args.lam, cfg, d)
        else:
            e = laplace_local_time(x0, args.t or cfg.tmax, args.c0, cfg, d)
        lo, hi = e.ci()
        rec = {"estimator": args.estimator, "x0": list(x0), **e.as_dict(), "seed": cfg.seed,
               "params": {"f": f, "delta0": args.delta0, "c0": args.c0, "lam": args.lam}}
        for k in ("tail_bound", "horizon_fraction", "absorbed_fraction"):
            if hasattr(e, k):
                rec[k] = getattr(e, k)
        records.append(rec)
        rows.append((args.estimator, x0[0], x0[1], e.mean, e.stderr, lo, hi, e.n_paths, cfg.seed))
    io.emit_results(_out(args, "estimate"), io.RunManifest(p, p["seed"], "estimate"),
                    tables={"estimates": (ESTIMATE_COLUMNS, rows)},
                    summaries={"estimates": records})
    for r in records:
        print(io.json_text(r), end="")


def cmd_oracle(args):
    p = _params(args)
    left = args.left
    if args.sweep_c is not None:
        sched = fixed_c_schedule(args.sweep_c, halving_eps(args.eps0, args.steps))
        rows = convergence_sweep(args.sweep_c, sched, args.r1, left, args.delta)
        tab = (("k", "eps", "nu", "c_eff", "sup_error"),
               [(r.k, r.eps, r.nu, r.c_eff, r.sup_error) for r in rows])
        io.emit_results(_out(args, "oracle"), io.RunManifest(p, p["seed"], "oracle"),
                        tables={"sweep": tab})
        print(io.csv_text(*tab), end="")
        return
    m = IntervalModel(args.r1, args.r2, args.nu, left)
    xs = [float(x) for x in args.points] if args.points else list(np.linspace(0, args.r2, 11))
    fd_x, fd_v = fd_mean_exit(m, args.nodes, args.delta)
    rows = []
    for x in xs:
        cf = mean_exit_closed_form(x, m, args.delta)
        fd = float(np.interp(x, fd_x, fd_v))
        mc = se = math.nan
        if args.mc_paths > 0 and args.delta == 0:
            est, _ = simulate_1d_skew(x, m, args.mc_h, args.mc_paths, p["seed"])
            mc, se = est.mean, est.stderr
        rows.append((x, cf, fd, abs(fd - cf) / max(abs(cf), 1e-300), mc, se))
    tab = (("x", "closed_form", "finite_difference", "rel_diff", "monte_carlo", "mc_stderr"), rows)
    io.emit_results(_out(args, "oracle"), io.RunManifest(p, p["seed"], "oracle"),
                    tables={"oracle": tab})
    print(io.csv_text(*tab), end="")


def cmd_regimes(args):
    p = _params(args)
    sch = RegimeSchedule.parse(args.schedule, p["alpha"])
    study = StudyConfig(x0=tuple(p["x0"]), horizon=p["horizon"], n_paths=p["paths"],
                        seed=p["seed"], alpha=p["alpha"], b=p["b"], h0=p["h0"],
                        robin_c0=p["robin_c0"])
    tab = run_regime_study(sch, p["levels"], study)
    label = classify_limit(tab) if len(tab) >= 3 else "Inconclusive"
    rows = [tuple(r.record()[c] for c in COLUMNS) for r in tab.rows]
    curves = {f"survival_n{r.level}": r.curve for r in tab.rows}
    summary = {"schedule": sch.ident, "levels": tab.levels, "classification": label,
               "rows": tab.records()}
    io.emit_results(_out(args, "regimes"), io.RunManifest(p, p["seed"], "regimes"),
                    tables={"levels": (COLUMNS, rows)}, curves=curves,
                    summaries={"summary": summary})
    print(io.json_text({"schedule": sch.ident, "classification": label}), end="")
    if args.expect and label != args.expect:
        raise StatisticalFailure(f"classified {label}, expected {args.expect}")


def cmd_rr_check(args):
    p = _params(args)
    g = G_FIELDS[args.g]
    rows = check_prop_rr(g, p["levels"], args.ref_level, p["alpha"], args.node)
    tab = (("level", "arclength", "reference", "error"),
           [(r.level, r.arclength, r.reference, r.error) for r in rows])
    io.emit_results(_out(args, "rr-check"), io.RunManifest(p, p["seed"], "rr-check"),
                    tables={"rr": tab})
    print(io.csv_text(*tab), end="")
    if args.g in ("one", "zero") and any(r.error != 0.0 for r in rows):
        raise StatisticalFailure("constant field is not integrated exactly")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kochskew", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, sim=False):
        sp.add_argument("--config", help="key = value parameter file")
        sp.add_argument("--out", help=f"output directory (default ${io.ENV_OUT}/<command>)")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--level", type=int)
        sp.add_argument("--b", type=float)
        sp.add_argument("--seed", type=int)
        if sim:
            sp.add_argument("--cn", type=float)
            sp.add_argument("--deltan", type=float)
            sp.add_argument("--kill-mode", dest="kill_mode")
            sp.add_argument("--nu-eval", dest="nu_eval")
            sp.add_argument("--h", type=float)
            sp.add_argument("--shell", type=float)
            sp.add_argument("--tmax", type=float)
            sp.add_argument("--paths", type=int)
            sp.add_argument("--kappa-L", dest="kappa_L", type=float)
            sp.add_argument("--x0", action="append", metavar="X,Y")
        return sp

    common(sub.add_parser("geometry", help="build a domain and export rings/SVG")).set_defaults(
        func=cmd_geometry)

    sp = common(sub.add_parser("simulate", help="simulate paths and dump functionals"), True)
    sp.add_argument("--trace", type=int, default=0, help="number of paths to trace")
    sp.add_argument("--trace-points", type=int, default=101)
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("estimate", help="Monte Carlo estimators"), True)
    sp.add_argument("--estimator", choices=("u_n", "robin", "dirichlet", "resolvent", "laplace"),
                    default="u_n")
    sp.add_argument("--f", type=float, default=1.0, help="constant source term")
    sp.add_argument("--delta0", type=float, default=0.0)
    sp.add_argument("--c0", type=float, default=1.0)
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--t", type=float)
    sp.set_defaults(func=cmd_estimate)

    sp = common(sub.add_parser("oracle", help="1D interval oracle"))
    sp.add_argument("--r1", type=float, default=1.0)
    sp.add_argument("--r2", type=float, default=1.5)
    sp.add_argument("--nu", type=float, default=0.5)
    sp.add_argument("--left", choices=("ReflectAtZero", "ZeroValueAtZero"), default="ReflectAtZero")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--nodes", type=int, default=10_000)
    sp.add_argument("--points", nargs="*")
    sp.add_argument("--mc-paths", dest="mc_paths", type=int, default=0,
                    help="Monte Carlo paths per point (0: skip)")
    sp.add_argument("--mc-h", dest="mc_h", type=float, default=1e-5)
    sp.add_argument("--sweep-c", dest="sweep_c", type=float)
    sp.add_argument("--eps0", type=float, default=0.1)
    sp.add_argument("--steps", type=int, default=5)
    sp.set_defaults(func=cmd_oracle)

    sp = common(sub.add_parser("regimes", help="regime study across levels"))
    sp.add_argument("--schedule", required=True, help="const:c0 | vanish:cbar | explode:cbar")
    sp.add_argument("--levels", help="e.g. 2..4")
    sp.add_argument("--paths", type=int)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--robin-c0", dest="robin_c0", type=float)
    sp.add_argument("--h0", type=float)
    sp.add_argument("--x0", action="append", metavar="X,Y")
    sp.add_argument("--expect", choices=("Robin", "Neumann", "Dirichlet"))
    sp.set_defaults(func=cmd_regimes)

    sp = common(sub.add_parser("rr-check", help="arc-length vs self-similar quadrature"))
    sp.add_argument("--g", choices=tuple(G_FIELDS), default="x+y")
    sp.add_argument("--levels", default="2..8")
    sp.add_argument("--ref-level", dest="ref_level", type=int, default=12)
    sp.add_argument("--node", choices=("base-midpoint", "barycenter"), default="base-midpoint")
    sp.set_defaults(func=cmd_rr_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except KochSkewError as e:
        print(f"kochskew: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"kochskew: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
