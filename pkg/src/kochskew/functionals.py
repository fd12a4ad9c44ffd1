"""Monte Carlo estimators built on path batches: solutions, resolvents, survival curves."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._core import ABSORBED, HORIZON, KILLED
from .diffusion import PathBatch, SimConfig, as_field, run_paths
from .errors import DomainError, ParameterError
from .geometry import DomainModel, build_domain
from .stats import Estimate, wilson_interval

MAX_DISCARD = 1e-3


@dataclass(frozen=True)
class SurvivalCurve:
    times: np.ndarray
    survival: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_paths: int
    level: int
    c_n: float
    kill_mode: str

    @classmethod
    def from_batch(cls, batch: PathBatch, times, level: int) -> "SurvivalCurve":
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ParameterError("time grid must be increasing")
        s = batch.survival(times)
        n = len(batch)
        lo, hi = wilson_interval(np.round(s * n), n)
        cfg = batch.config
        return cls(times, s, lo, hi, n, level, cfg.c_n, cfg.kill_mode)

    def rows(self):
        return [(float(t), float(s), float(a), float(b))
                for t, s, a, b in zip(self.times, self.survival, self.ci_lo, self.ci_hi)]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class TruncatedEstimate(Estimate):
    """Estimate of an integral over [0, inf) cut at a horizon.

    tail_bound is an analytic bound on the omitted part (inf when none is
    available); horizon_fraction is the share of paths still running at the horizon.
    """

    tail_bound: float = math.inf
    horizon_fraction: float = 0.0
    discarded: int = 0


def _integral_estimate(batch: PathBatch, values: np.ndarray, tail: float = math.inf
                       ) -> TruncatedEstimate:
    bad = batch.discarded
    nbad = int(bad.sum())
    if nbad > MAX_DISCARD * len(batch):
        raise DomainError(f"f is not finite along {nbad} of {len(batch)} paths")
    e = Estimate.from_samples(values[~bad], batch.elapsed)
    return TruncatedEstimate(e.mean, e.stderr, e.n_paths, e.elapsed, tail,
                             float(np.mean(batch.cause == HORIZON)), nbad)


def _sup_abs(f, domain: DomainModel) -> float:
    fld = as_field(f, domain)
    if fld.meta[6] != 0.0:
        return abs(float(fld.meta[7]))
    with np.errstate(invalid="ignore"):
        return float(np.nanmax(np.abs(fld.values)))


def _tail(delta: float, tmax: float, sup_f: float) -> float:
    if sup_f == 0.0:
        return 0.0
    if delta <= 0.0:
        return math.inf
    return math.exp(-delta * tmax) / delta * sup_f


def level_step(n: int, h0: float = 6.561e-4, alpha: float = 3.0, floor: float = 1e-7) -> float:
    """Step size resolving the level-n cell height: h0 alpha^{-2n}, not below floor."""
    return max(h0 * alpha ** (-2 * n), floor)


def estimate_u_n(x0, f, cfg: SimConfig, domain: DomainModel, n_paths: int | None = None
                 ) -> TruncatedEstimate:
    """E int_0^lifetime e^{-delta_n t} f(X_t) dt for skew BM absorbed on the roof polyline."""
    cfg = cfg.replace(kill_mode="AbsorbOuter", n_paths=n_paths or cfg.n_paths)
    b = run_paths(x0, cfg, domain, f=f)
    return _integral_estimate(b, b.integral, _tail(cfg.delta_n, cfg.tmax, _sup_abs(f, domain)))


def _proxy(level: int, alpha: float, b: float | None, h: float | None, domain):
    if domain is None:
        domain = build_domain(alpha, level, b)
    return domain, (h if h is not None else level_step(domain.level, alpha=domain.alpha))


def estimate_robin(x0, f, delta0: float, c0: float, level: int = 4, n_paths: int = 1000,
                   seed: int = 0, tmax: float = 5.0, h: float | None = None, alpha: float = 3.0,
                   b: float | None = None, weight_cut: float = 1e-6,
                   domain: DomainModel | None = None) -> TruncatedEstimate:
    """E int_0^inf e^{-delta0 t - c0 L_t} f(X_t) dt for reflected BM on Omega^level.

    The integral is cut at tmax, or earlier once e^{-c0 L} drops below weight_cut.
    """
    if delta0 < 0 or c0 < 0:
        raise ParameterError("delta0 and c0 must be non-negative")
    if delta0 == 0 and c0 == 0:
        raise ParameterError("delta0 = c0 = 0 gives a non-integrable Robin functional")
    domain, h = _proxy(level, alpha, b, h, domain)
    cfg = SimConfig(h=h, tmax=tmax, delta_n=delta0, c_n=0.0, kill_mode="ReflectInterface",
                    seed=seed, n_paths=n_paths)
    batch = run_paths(x0, cfg, domain, f=f, c_weight=c0, weight_cut=weight_cut)
    vals = batch.weighted_integral if c0 > 0 else batch.integral
    sup_f = _sup_abs(f, domain)
    tail = 0.0
    if np.any(batch.cause == HORIZON):
        tail = _tail(delta0, tmax, sup_f)
    if np.any(batch.cause == KILLED) and sup_f > 0:
        # a path stopped by the weight cut omits at most weight_cut * sup|f| / delta0
        tail = max(tail, weight_cut * sup_f / delta0 if delta0 > 0 else math.inf)
    return _integral_estimate(batch, vals, tail)


def estimate_dirichlet(x0, f, delta0: float = 0.0, level: int = 4, n_paths: int = 1000,
                       seed: int = 0, tmax: float = 5.0, h: float | None = None,
                       alpha: float = 3.0, b: float | None = None,
                       domain: DomainModel | None = None) -> TruncatedEstimate:
    """E int_0^tau e^{-delta0 t} f(X_t) dt, tau the first contact with the interface shell."""
    if delta0 < 0:
        raise ParameterError("delta0 must be non-negative")
    domain, h = _proxy(level, alpha, b, h, domain)
    cfg = SimConfig(h=h, tmax=tmax, delta_n=delta0, kill_mode="AbsorbInterface", seed=seed,
                    n_paths=n_paths)
    batch = run_paths(x0, cfg, domain, f=f)
    return _integral_estimate(batch, batch.integral, _tail(delta0, tmax, _sup_abs(f, domain)))


def survival_curve(cfg: SimConfig, domain: DomainModel, times, x0, n_paths: int | None = None
                   ) -> SurvivalCurve:
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ParameterError("time grid must be increasing")
    if times[-1] > cfg.tmax:
        raise ParameterError("time grid extends past the horizon")
    cfg = cfg.replace(n_paths=n_paths or cfg.n_paths)
    return SurvivalCurve.from_batch(run_paths(x0, cfg, domain), times, domain.level)


@dataclass(frozen=True)
class LaplaceEstimate(Estimate):
    """E exp(-c L_sym(t ^ lifetime)); absorbed_fraction is the mass absorbed before t."""

    c: float = 0.0
    t: float = 0.0
    absorbed_fraction: float = 0.0


def laplace_local_time(x0, t: float, c, cfg: SimConfig, domain: DomainModel,
                       n_paths: int | None = None):
    """Monte Carlo E exp(-c L_sym(t)); c may be a sequence, evaluated on one path set."""
    if not 0 < t <= cfg.tmax:
        raise ParameterError("need 0 < t <= tmax")
    cs = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(cs < 0):
        raise ParameterError("c must be non-negative")
    cfg = cfg.replace(n_paths=n_paths or cfg.n_paths)
    batch = run_paths(x0, cfg, domain, record_times=[t])
    lt = batch.records[:, 0, 3]
    absorbed = float(np.mean((batch.cause == ABSORBED) & (batch.lifetime < t)))
    out = []
    for ci in cs:
        e = Estimate.from_samples(np.exp(-ci * lt), batch.elapsed)
        out.append(LaplaceEstimate(e.mean, e.stderr, e.n_paths, e.elapsed, float(ci), t, absorbed))
    return out if np.ndim(c) else out[0]


def resolvent_estimate(x0, f, lam: float, cfg: SimConfig, domain: DomainModel,
                       n_paths: int | None = None) -> TruncatedEstimate:
    """E int_0^lifetime e^{-(lam + delta_n) t} f(X_t) dt."""
    if not lam > 0:
        raise ParameterError("resolvent parameter lambda must be positive")
    cfg = cfg.replace(delta_n=cfg.delta_n + lam, n_paths=n_paths or cfg.n_paths)
    b = run_paths(x0, cfg, domain, f=f)
    if np.mean(b.cause == HORIZON) > 0 and math.exp(-lam * cfg.tmax) > 1e-3:
        warnings.warn("horizon cuts a visible part of the resolvent integral", RuntimeWarning,
                      stacklevel=2)
    return _integral_estimate(b, b.integral, _tail(cfg.delta_n, cfg.tmax, _sup_abs(f, domain)))
