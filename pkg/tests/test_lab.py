import math

import numpy as np
import pytest

from conftest import CENTROID
from kochskew.diffusion import SimConfig, run_paths
from kochskew.errors import ParameterError
from kochskew.lab import (COLUMNS, LevelRow, RegimeSchedule, ResultTable, StudyConfig,
                          check_prop_rr, classify_limit, moment_diagnostics, run_regime_study)
from kochskew.stats import Estimate, ks_critical


def test_schedule_parse_and_values():
    s = RegimeSchedule.parse("const:1")
    assert s.kind == "ConstantC0" and [s.c(n) for n in (1, 5)] == [1.0, 1.0]
    v = RegimeSchedule.parse("vanish:4")
    assert v.c(2) == pytest.approx(4 / 9)
    assert RegimeSchedule.parse("vanish:2:inverse").c(4) == 0.5
    e = RegimeSchedule.parse("explode:5")
    assert e.c(4) == pytest.approx(45.0)
    assert RegimeSchedule.parse("explode:2:linear").c(3) == 6.0
    assert RegimeSchedule.parse(e.ident) == e
    for bad in ("const", "fast:1", "const:x", "const:-1", "const:1:geometric", "vanish:1:linear"):
        with pytest.raises(ParameterError):
            RegimeSchedule.parse(bad)


def test_exploding_constraint():
    e = RegimeSchedule.parse("explode:5")
    assert e.first_violation(range(1, 9)) is None
    w = [e.conductance(n) for n in range(1, 9)]
    assert all(a > b for a, b in zip(w, w[1:]))
    # linear growth is eventually beaten by alpha^{-n}, but huge cbar breaks c_n max(w) < 1
    assert RegimeSchedule.parse("explode:100:linear").first_violation(range(1, 6)) == 1
    assert RegimeSchedule.parse("vanish:4").first_violation(range(1, 6)) is None


def _row(level, ks_d, ks_r, ks_n, n=10_000):
    return LevelRow(level, "x", 1.0, 1e-6, Estimate(0.03, 1e-4, n, 0.0), 0.5, ks_d, ks_r, ks_n,
                    ks_critical(n, n), 0.5, 0.1, 0.2, True)


def test_classify_synthetic():
    crit = ks_critical(10_000, 10_000)
    t = ResultTable()
    for lv in (2, 3, 4):
        t.add(_row(lv, 0.3, 0.01, 0.2))
    assert classify_limit(t) == "Robin"
    t = ResultTable()
    for lv in (2, 3, 4):
        t.add(_row(lv, 0.2, 0.2 - crit / 2, 0.3))
    assert classify_limit(t) == "Inconclusive"
    t = ResultTable()
    for lv in (2, 3, 4):
        t.add(_row(lv, 0.02, 0.1, 0.9))
    assert classify_limit(t) == "Dirichlet"
    t = ResultTable()
    t.add(_row(2, 0.3, 0.2, 0.001))
    t.add(_row(3, 0.3, 0.2, 0.001))
    with pytest.raises(ParameterError):
        classify_limit(t)
    with pytest.raises(ParameterError):
        t.add(_row(3, 0.3, 0.2, 0.001))


def test_table_columns():
    t = ResultTable()
    t.add(_row(2, 0.3, 0.01, 0.2))
    assert tuple(t.records()[0]) == COLUMNS
    assert t.column("ks_robin")[0] == 0.01 and t.levels == [2]


def test_small_regime_study():
    study = StudyConfig(n_paths=200, seed=3, horizon=0.02)
    cache = {}
    seen = []
    t = run_regime_study(RegimeSchedule.parse("explode:5"), [1, 2], study, cache, seen.append)
    assert len(t) == 2 and len(seen) == 2 and len(cache) == 2
    assert all(r.dominates_dirichlet for r in t.rows)
    assert all(len(r.curve) == study.grid_points for r in t.rows)
    with pytest.raises(ParameterError):
        run_regime_study(RegimeSchedule.parse("const:1"), [2, 1], study)


def test_quadrature_constant_and_affine():
    rows = check_prop_rr(lambda x, y: np.ones_like(x), [1, 3, 5], ref_level=8)
    for r in rows:
        assert r.reference == pytest.approx(3.0, abs=1e-12)
        assert r.error < 1e-12
    rows = check_prop_rr(lambda x, y: x + y, [2, 4], ref_level=8)
    for r in rows:
        assert r.reference == pytest.approx(0.633974596216, abs=1e-11)
        assert r.error < 1e-12
    assert all(r.error == 0 for r in check_prop_rr(lambda x, y: 0 * x, [2], ref_level=6))


def test_quadrature_converges_for_curved_g():
    rows = check_prop_rr(lambda x, y: x * x + y * y, range(1, 7), ref_level=10)
    errs = [r.error for r in rows]
    assert errs[-1] < errs[0] / 100


def test_moment_diagnostics(dom2):
    cfg = SimConfig(h=8.1e-6, tmax=0.05, kill_mode="ReflectInterface", n_paths=200, seed=9)
    b = run_paths((0.5, 0.0), cfg, dom2, record_times=np.linspace(0, 0.05, 6))
    rep = moment_diagnostics(b)
    same = rep.pairs[:, 0] == rep.pairs[:, 1]
    assert np.all(rep.second_moment[same] == 0)
    assert np.all(rep.second_moment[~same] > 0)
    assert math.isfinite(rep.exponent) and rep.C > 0
    short = run_paths((0.5, 0.0), cfg.replace(n_paths=3), dom2, record_times=[0.0, 0.05])
    with pytest.warns(RuntimeWarning):
        assert moment_diagnostics(short) is None
