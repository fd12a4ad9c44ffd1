"""Acceptance criteria 1-9 at their stated tolerances.

Each test records its clauses with `verdict`; the terminal summary prints one
PASS/FAIL line per criterion followed by the clause details.
"""

import math
import time

import numpy as np
import pytest

from conftest import verdict
from kochskew.cli import main
from kochskew.diffusion import SimConfig, run_paths
from kochskew.functionals import estimate_robin
from kochskew.geometry import PrefractalBoundary, build_domain, overlapping_cells, sigma_n
from kochskew.lab import RegimeSchedule, StudyConfig, check_prop_rr, classify_limit, \
    run_regime_study
from kochskew.radial import (IntervalModel, calibrate_local_time, convergence_sweep,
                             fd_mean_exit, fixed_c_schedule, halving_eps, laplace_local_time,
                             local_time_mean, mean_exit_closed_form, simulate_1d_skew)
from kochskew.stats import binomial_ci

pytestmark = pytest.mark.acceptance


# ---------------------------------------------------------------- 1 geometry

def test_criterion_1_geometry():
    t0 = time.perf_counter()
    ok_count = ok_len = ok_arc = ok_cells = True
    for n in range(1, 7):
        bd = PrefractalBoundary.build(3.0, n)
        seg = bd.segments
        ok_count &= len(seg) == 3 * 4 ** n
        lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
        ok_len &= bool(np.max(np.abs(lengths - 3.0 ** -n)) <= 1e-12)
        ok_arc &= abs(sigma_n(3.0, n) * bd.arclength() - 3.0) <= 1e-12
        d = build_domain(3.0, n)
        tol = 1e-12 * 3.0 ** -n
        ok_cells &= overlapping_cells(d.cells, tol, exhaustive=n <= 4) is None
    dt = time.perf_counter() - t0
    checks = [
        verdict(1, "3*4^n segments, n = 1..6", ok_count),
        verdict(1, "segment length 3^-n within 1e-12", ok_len),
        verdict(1, "sigma_n * arclength = 3 within 1e-12", ok_arc),
        verdict(1, "fiber cells interior-disjoint (exhaustive n <= 4)", ok_cells),
        verdict(1, "runtime < 10 s", dt < 10, f"{dt:.2f} s"),
    ]
    assert all(checks)


# ---------------------------------------------------------------- 2 quadrature

def _rr(g):
    t0 = time.perf_counter()
    rows = check_prop_rr(g, range(2, 9), ref_level=12)
    return rows, time.perf_counter() - t0


def test_criterion_2_exact_and_final():
    one, t1 = _rr(lambda x, y: np.ones_like(x))
    lin, t2 = _rr(lambda x, y: x + y)
    errs = [r.error for r in lin]
    checks = [
        verdict(2, "g = 1 error 0 at every level", all(r.error == 0.0 for r in one),
                f"max {max(r.error for r in one):.1e}"),
        verdict(2, "g = x + y final error < 1e-3", errs[-1] < 1e-3, f"{errs[-1]:.1e}"),
        verdict(2, "runtime < 1 min", t1 + t2 < 60, f"{t1 + t2:.1f} s"),
    ]
    assert all(checks)


@pytest.mark.xfail(strict=True, reason="affine g is integrated exactly at every level, so its "
                   "error sequence is identically zero and cannot strictly decrease")
def test_criterion_2_strict_decrease():
    lin, _ = _rr(lambda x, y: x + y)
    errs = [r.error for r in lin]
    ok = all(a > b for a, b in zip(errs, errs[1:]))
    verdict(2, "g = x + y error strictly decreasing over n = 2..8", ok,
            "errors " + ", ".join(f"{e:.1e}" for e in errs)
            + "; the four-subsegment midpoint sums cancel exactly for affine g")
    assert ok


def test_criterion_2_companion_per_side_decay():
    # restricted to one side the affine cancellation disappears and the error shows its rate
    side, _ = _rr(lambda x, y: (x + y) * (y > -1e-9))
    errs = np.array([r.error for r in side])
    ratios = errs[:-1] / errs[1:]
    total, _ = _rr(lambda x, y: x + y)
    assert np.all(np.abs(ratios - 4.0) < 0.05)
    assert max(r.error for r in total) <= 1e-14


# ---------------------------------------------------------------- 3 1D oracle

GRID_X = (0.0, 0.06, 0.12, 0.15, 0.18)
GRID_NU = (0.3, 0.5, 0.7)


def test_criterion_3_oracle():
    t0 = time.perf_counter()
    worst_z, fails = 0.0, []
    worst_fd = 0.0
    for j, nu in enumerate(GRID_NU):
        m = IntervalModel(0.12, 0.2, nu)
        x, fd = fd_mean_exit(m, nodes=10_000)
        cf = mean_exit_closed_form(x, m)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - cf) / np.max(np.abs(cf)))))
        for i, x0 in enumerate(GRID_X):
            est, _ = simulate_1d_skew(x0, m, 1e-5, 100_000, seed=100 + 10 * j + i)
            z = (est.mean - mean_exit_closed_form(x0, m)) / est.stderr
            worst_z = max(worst_z, abs(z))
            if abs(z) > 3:
                fails.append((x0, nu, round(z, 2)))
    dt = time.perf_counter() - t0
    checks = [
        verdict(3, "MC within 3 stderr on 5x3 grid", not fails,
                f"max |z| = {worst_z:.2f}" + (f", outside: {fails}" if fails else "")),
        verdict(3, "closed form vs 1e4-node FD <= 1e-6 relative", worst_fd <= 1e-6,
                f"{worst_fd:.1e}"),
        verdict(3, "runtime < 5 min", dt < 300, f"{dt:.0f} s"),
    ]
    assert all(checks)


# ---------------------------------------------------------------- 4 local time

def test_criterion_4_local_time():
    t0 = time.perf_counter()
    cal = calibrate_local_time(t=1.0, h=1e-6, n_paths=100_000, seed=4, cs=(0.5, 1.0, 2.0))
    dt = time.perf_counter() - t0
    lt = cal.local_time
    z = (lt.mean - local_time_mean(1.0)) / lt.stderr
    checks = [verdict(4, "E L_1 = sqrt(2/pi) within 3 stderr", abs(z) <= 3,
                      f"{lt.mean:.5f} vs {local_time_mean(1.0):.5f}, z = {z:.2f}")]
    for c, (est, closed) in sorted(cal.laplace.items()):
        assert closed == pytest.approx(laplace_local_time(c, 1.0))
        zc = (est.mean - closed) / est.stderr
        checks.append(verdict(4, f"E exp(-{c:g} L_1) within 3 stderr", abs(zc) <= 3,
                              f"{est.mean:.5f} vs {closed:.5f}, z = {zc:.2f}"))
    checks.append(verdict(4, "kappa_L in [0.9, 1.1]", cal.calibrated, f"{cal.kappa_L:.4f}"))
    checks.append(verdict(4, "runtime < 5 min", dt < 300, f"{dt:.0f} s"))
    assert all(checks)


# ---------------------------------------------------------------- 5 sweep

def test_criterion_5_sweep():
    t0 = time.perf_counter()
    checks = []
    for c in (0.5, 2.0):
        rows = convergence_sweep(c, fixed_c_schedule(c, halving_eps(0.1, 5)))
        errs = [r.sup_error for r in rows]
        fixed = all(abs(r.c_eff - c) <= 1e-12 * c for r in rows)
        mono = all(a > b for a, b in zip(errs, errs[1:]))
        checks.append(verdict(5, f"c = {c:g}: monotone decrease over 5 halvings", mono and fixed,
                              ", ".join(f"{e:.2e}" for e in errs)))
    dt = time.perf_counter() - t0
    checks.append(verdict(5, "runtime < 1 min", dt < 60, f"{dt:.2f} s"))
    assert all(checks)


# ---------------------------------------------------------------- 6 skew mechanism

def test_criterion_6_side_choice():
    t0 = time.perf_counter()
    dom = build_domain(3, 2)
    checks = []
    for nu in (0.1, 0.5, 0.9):
        cfg = SimConfig(h=8.1e-6, tmax=0.05, c_n=nu / (1 - nu), nu_eval="constant",
                        kill_mode="ElasticClock", seed=11, n_paths=2000)
        k = n = 0
        first = 0
        while n < 100_000:
            b = run_paths((0.5, 0.0), cfg, dom, path_ids=np.arange(first, first + 2000))
            k += int(b.sigma_choices.sum())
            n += int(b.crossings.sum())
            first += 2000
        lo, hi = binomial_ci(k, n, 0.99)
        checks.append(verdict(6, f"nu = {nu:g} inside 99% CI", lo <= nu <= hi,
                              f"{k}/{n} = {k / n:.4f}, CI [{lo:.4f}, {hi:.4f}]"))
    dt = time.perf_counter() - t0
    checks.append(verdict(6, "runtime < 2 min", dt < 120, f"{dt:.1f} s"))
    assert all(checks)


# ---------------------------------------------------------------- 7 regime study

def test_criterion_7_regimes():
    t0 = time.perf_counter()
    study = StudyConfig(n_paths=10_000, seed=7)
    cache = {}
    tabs = {s: run_regime_study(RegimeSchedule.parse(s), [2, 3, 4], study, cache)
            for s in ("const:1", "vanish:4", "explode:5")}
    dt = time.perf_counter() - t0
    van = tabs["vanish:4"].column("survival_at_horizon")
    exp_ks = tabs["explode:5"].column("ks_dirichlet")
    con_ks = tabs["const:1"].column("ks_robin")
    labels = {s: classify_limit(t) for s, t in tabs.items()}
    fmt = lambda a: ", ".join(f"{v:.4f}" for v in a)
    checks = [
        verdict(7, "Vanishing survival increases, final > 0.99",
                bool(np.all(np.diff(van) > 0) and van[-1] > 0.99), fmt(van)),
        verdict(7, "Exploding KS to Dirichlet decreases, final < 0.05",
                bool(np.all(np.diff(exp_ks) < 0) and exp_ks[-1] < 0.05), fmt(exp_ks)),
        verdict(7, "ConstantC0 KS to Robin < 0.05", bool(np.all(con_ks < 0.05)), fmt(con_ks)),
        verdict(7, "three distinct labels", len(set(labels.values())) == 3
                and "Inconclusive" not in labels.values(), str(labels)),
        verdict(7, "runtime < 30 min", dt < 1800, f"{dt:.0f} s"),
    ]
    assert all(checks)


# ---------------------------------------------------------------- 8 monotonicity

def test_criterion_8_monotonicity():
    dom = build_domain(3, 2)
    base = SimConfig(h=8.1e-6, tmax=0.05, kill_mode="ElasticClock", nu_c=1.0, seed=8,
                     n_paths=2000)
    rates = (0.25, 0.5, 1.0, 2.0, 4.0, 16.0)
    lives = [run_paths((0.5, -0.2), base.replace(c_n=c), dom).lifetime for c in rates]
    bad = sum(int(np.sum(a < b)) for a, b in zip(lives, lives[1:]))
    robin = [estimate_robin((0.5, -0.2), 1.0, 2.0, c0, domain=dom, h=8.1e-6, n_paths=300,
                            tmax=1.0, seed=8).mean for c0 in (0.0, 0.5, 1.0, 2.0, 8.0)]
    checks = [
        verdict(8, "lifetimes non-increasing in c_n per path", bad == 0,
                f"{bad} violations over {len(rates)} rates x {base.n_paths} paths"),
        verdict(8, "Robin estimate strictly decreasing in c_0",
                all(a > b for a, b in zip(robin, robin[1:])),
                ", ".join(f"{v:.5f}" for v in robin)),
    ]
    assert all(checks)


# ---------------------------------------------------------------- 9 determinism

def test_criterion_9_determinism(tmp_path, capsys):
    args = ["simulate", "--level", "2", "--paths", "200", "--tmax", "0.05", "--cn", "2",
            "--kill-mode", "ElasticClock", "--seed", "9", "--trace", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    # second run driven only by the first run's manifest
    from kochskew.io import RunManifest
    cfg = tmp_path / "a.conf"
    cfg.write_text(RunManifest.as_dict(RunManifest.load(tmp_path / "a" / "manifest.json"))["config"])
    assert main(["simulate", "--config", str(cfg), "--trace", "3",
                 "--out", str(tmp_path / "b")]) == 0
    assert main(["regimes", "--schedule", "vanish:4", "--levels", "1..2", "--paths", "300",
                 "--horizon", "0.02", "--seed", "9", "--out", str(tmp_path / "c")]) == 0
    assert main(["regimes", "--schedule", "vanish:4", "--levels", "1..2", "--paths", "300",
                 "--horizon", "0.02", "--seed", "9", "--out", str(tmp_path / "d")]) == 0
    capsys.readouterr()
    same = []
    for x, y in (("a", "b"), ("c", "d")):
        files = sorted(p.name for p in (tmp_path / x).glob("*.csv"))
        assert files
        same += [(tmp_path / x / f).read_bytes() == (tmp_path / y / f).read_bytes() for f in files]
    assert verdict(9, "byte-identical CSV output from identical manifests", all(same),
                   f"{sum(same)}/{len(same)} files identical")
