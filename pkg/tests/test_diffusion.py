import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CENTROID
from kochskew.diffusion import (ParticleState, SimConfig, accumulate_local_time, nu_of, run_path,
                                run_paths, skew_resolve, step)
from kochskew.errors import DomainError, IntegrityError, ParameterError
from kochskew.rng import PathStream
from kochskew.stats import binomial_ci

H = 8.1e-6


def test_nu_of_examples():
    assert nu_of(0.0, 0.3) == 0.0
    assert nu_of(2.0, 0.5) == 0.5
    assert nu_of(1e300, 1e10) == 1.0
    assert nu_of(1e12, 1.0) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        nu_of(-1.0, 1.0)
    with pytest.raises(ParameterError):
        nu_of(1.0, -1.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_nu_range(c, w):
    v = nu_of(c, w)
    assert 0.0 <= v <= 1.0


def test_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(h=0)
    with pytest.raises(ParameterError):
        SimConfig(kill_mode="Bogus")
    with pytest.raises(ParameterError):
        SimConfig(c_n=-1)
    with pytest.raises(ParameterError):
        SimConfig(nu_eval="other")
    with pytest.warns(RuntimeWarning, match="3 sqrt"):
        SimConfig(h=1e-4, shell=0.01)
    cfg = SimConfig(h=1e-6)
    assert cfg.shell_width == pytest.approx(3e-3)
    assert cfg.n_steps == 1_000_000


SEG = np.array([0.0, 0.0, 1.0, 0.0])  # fiber side is y > 0 (left of the direction)


def test_skew_resolve_extremes():
    s = PathStream(0, 0)
    hit = np.array([0.5, 0.0])
    for _ in range(50):
        assert skew_resolve(hit, [0.5, 0.01], 0.0, SEG, s)[1] == pytest.approx(-0.01)
        assert skew_resolve(hit, [0.5, -0.01], 0.0, SEG, s)[1] == pytest.approx(-0.01)
        assert skew_resolve(hit, [0.5, -0.01], 1.0, SEG, s)[1] == pytest.approx(0.01)
    assert np.array_equal(skew_resolve(hit, hit, 0.3, SEG, s), hit)
    with pytest.raises(ParameterError):
        skew_resolve(hit, [0.5, 0.1], 1.5, SEG, s)


@pytest.mark.parametrize("nu", [0.5, 0.9])
def test_skew_resolve_frequency(nu):
    s = PathStream(21, 0)
    hit = np.array([0.3, 0.0])
    n = 100_000
    k = sum(skew_resolve(hit, [0.31, -0.02], nu, SEG, s)[1] > 0 for _ in range(n))
    lo, hi = binomial_ci(k, n, 0.99)
    assert lo <= nu <= hi


@given(st.floats(0.01, 0.99), st.floats(-1, 1), st.floats(0.001, 1))
@settings(max_examples=50, deadline=None)
def test_skew_resolve_preserves_distance_to_line(nu, x, y):
    s = PathStream(1, 0)
    q = skew_resolve([0.5, 0.0], [x, y], nu, SEG, s)
    assert abs(abs(q[1]) - y) < 1e-12 and q[0] == pytest.approx(x)


def test_step_interior(dom2):
    cfg = SimConfig(h=H)
    p = ParticleState(np.array(CENTROID))
    s = PathStream(0, 0)
    q, inc = step(p, cfg, dom2, s)
    assert q.alive and q.clock == pytest.approx(cfg.dt, rel=1e-12) and q.region == "Omega"
    assert inc["L_sym"] == 0.0 and inc["crossings"] == 0
    assert inc["gamma_omega"] == pytest.approx(cfg.dt, rel=1e-12)
    assert np.hypot(*(q.position - p.position)) < 10 * math.sqrt(H)
    with pytest.raises(IntegrityError):
        step(ParticleState(np.array([5.0, 5.0])), cfg, dom2, s)


def test_step_clock_monotone(dom2):
    cfg = SimConfig(h=H, c_n=1.0, nu_eval="constant")
    seg = dom2.interface_segments[3]
    p = ParticleState(0.5 * (seg[:2] + seg[2:]) + np.array([0.0, -1e-4]))
    s = PathStream(2, 0)
    t = 0.0
    for _ in range(300):
        p, _ = step(p, cfg, dom2, s)
        assert p.clock >= t
        t = p.clock
        if not p.alive:
            break


def test_accumulate_local_time(dom2):
    cfg = SimConfig(h=H)
    seg = dom2.interface_segments[0]
    near = ParticleState(0.5 * (seg[:2] + seg[2:]) + np.array([0.0, -1e-4]))
    far = ParticleState(np.array(CENTROID))
    ls, ll, lr = accumulate_local_time(near, dom2, cfg)
    assert ls == pytest.approx(cfg.dt / (2 * cfg.shell_width)) and ll == 2 * ls and lr == 0
    assert accumulate_local_time(far, dom2, cfg) == (0.0, 0.0, 0.0)
    ls, ll, lr = accumulate_local_time(ParticleState(near.position, region="Sigma"), dom2, cfg)
    assert lr == 2 * ls and ll == 0


@pytest.fixture(scope="module")
def batch(dom2):
    cfg = SimConfig(h=H, tmax=0.1, c_n=2.0, kill_mode="ElasticClock", n_paths=300, seed=3)
    return run_paths(CENTROID, cfg, dom2, record_times=np.linspace(0, 0.1, 11))


def test_accounting_identities(batch):
    assert np.allclose(batch.L_sym, 0.5 * (batch.L_left + batch.L_right), rtol=0, atol=1e-12)
    assert np.all(batch.gamma_omega + batch.gamma_sigma <= batch.lifetime + 1e-12)
    assert np.all(batch.sigma_choices <= batch.crossings)
    L = batch.records[:, :, 3]
    assert np.all(np.diff(L, axis=1) >= 0)
    killed = batch.cause == 2
    assert np.all(batch.L_sym[killed] > batch.zeta[killed])
    alive = batch.cause == 3
    assert np.all(batch.L_sym[alive] <= batch.zeta[alive])
    assert np.all(batch.anomalies == 0)


def test_determinism(dom2, batch):
    again = run_paths(CENTROID, batch.config, dom2, path_ids=np.array([5, 17]),
                      record_times=batch.record_times)
    for j, i in enumerate((5, 17)):
        assert again.functionals(j) == batch.functionals(i)


def test_run_path_matches_batch(dom2, batch):
    plain = run_paths(CENTROID, batch.config, dom2, path_ids=np.arange(10))
    assert run_path(CENTROID, batch.config, dom2, path_index=7) == plain.functionals(7)


def test_start_on_outer_boundary(dom2):
    apex = dom2.cells[4, 2]
    f = run_path(apex, SimConfig(h=H), dom2)
    assert f.cause == "Absorbed" and f.lifetime == 0.0


def test_start_outside(dom2):
    with pytest.raises(DomainError):
        run_paths((3.0, 3.0), SimConfig(h=H), dom2)
    c = dom2.cells[4]
    inside_fiber = (c[0] + c[1] + c[2]) / 3
    with pytest.raises(DomainError):
        run_paths(inside_fiber, SimConfig(h=H, kill_mode="ReflectInterface"), dom2)


def test_exp_zero_is_infinite(dom2):
    b = run_paths(CENTROID, SimConfig(h=H, tmax=0.05, kill_mode="ElasticClock", n_paths=50), dom2)
    assert np.all(np.isinf(b.zeta)) and not np.any(b.cause == 2)


def test_reflect_never_absorbs(dom2):
    cfg = SimConfig(h=H, tmax=0.1, kill_mode="ReflectInterface", n_paths=100, seed=1)
    b = run_paths(CENTROID, cfg, dom2)
    assert np.all(b.cause == 3) and b.sigma_choices.sum() == 0 and b.crossings.sum() > 0
    assert np.all(b.L_right == 0) and np.all(b.gamma_sigma == 0)


def test_huge_rate_kills_at_first_shell_entry(dom2):
    base = SimConfig(h=H, tmax=0.1, n_paths=200, seed=2)
    d = run_paths(CENTROID, base.replace(kill_mode="AbsorbInterface"), dom2)
    e = run_paths(CENTROID, base.replace(kill_mode="ElasticClock", c_n=1e9), dom2)
    hit = d.cause == 1
    assert np.array_equal(e.lifetime[hit], d.lifetime[hit])
    assert np.all(e.cause[hit] == 2)


def test_right_local_time_vanishes_with_rate(dom2):
    ratios = []
    for c in (10.0, 1.0, 0.1, 0.01):
        cfg = SimConfig(h=H, tmax=0.1, c_n=c, nu_eval="constant", n_paths=200, seed=4)
        b = run_paths(CENTROID, cfg, dom2)
        ratios.append(b.L_right.sum() / b.L_sym.sum())
    assert ratios[0] > ratios[1] > ratios[2] > ratios[3]
    assert ratios[3] < 0.05


def test_side_frequency_in_planar_runs(dom2):
    cfg = SimConfig(h=H, tmax=0.05, c_n=1.0, nu_eval="constant", n_paths=2000, seed=11)
    b = run_paths((0.5, 0.0), cfg, dom2)
    k, n = int(b.sigma_choices.sum()), int(b.crossings.sum())
    lo, hi = binomial_ci(k, n, 0.99)
    assert n > 10_000 and lo <= 0.5 <= hi


def test_occupation_of_interior_disc(dom2):
    # reflected BM equidistributes: the occupation share of a disc approaches its area share
    from kochskew.diffusion import Field
    r = 0.1
    ind = lambda x, y: ((x - 0.5) ** 2 + (y + 0.3) ** 2 < r * r).astype(float)
    cfg = SimConfig(h=H, tmax=20.0, kill_mode="ReflectInterface", n_paths=40, seed=5)
    b = run_paths(CENTROID, cfg, dom2, f=Field.sample(ind, dom2, 1024))
    share = b.integral.sum() / b.lifetime.sum()
    assert share == pytest.approx(math.pi * r * r / dom2.area_omega, rel=0.05)
