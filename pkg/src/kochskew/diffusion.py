"""Skew Brownian motion on Omega^n_eps: configuration, single steps and path batches.

The heavy lifting is in the numba kernel `_walk2d`; this module validates
inputs, packs parameters and unpacks per-path functionals.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _walk2d as K
from ._core import CAUSES, HORIZON, KILLED
from .errors import DomainError, IntegrityError, ParameterError
from .geometry import DomainModel, classify, point_segment_distance
from .rng import PathStream

KILL_MODES = ("AbsorbOuter", "ElasticClock", "ReflectInterface", "AbsorbInterface")
NU_EVAL = ("sigma-side", "constant")
REGION_NAMES = ("Omega", "Sigma")


def nu_of(c_n: float, w_val: float) -> float:
    """Transmission probability nu = c w / (1 + c w)."""
    if c_n < 0 or w_val < 0 or math.isnan(c_n) or math.isnan(w_val):
        raise ParameterError("c_n and w must be non-negative")
    cw = c_n * w_val
    if math.isinf(cw):
        return 1.0
    return cw / (1.0 + cw)


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    kill_mode:
      AbsorbOuter       skew transmission, absorption on the roof polyline
      ElasticClock      as AbsorbOuter plus an Exp(c_n) threshold on L_sym
      ReflectInterface  nu = 0 (reflected BM on Omega^n); an Exp(c_n) clock
                        on L_sym is applied when c_n > 0 (Robin proxy)
      AbsorbInterface   plain BM stopped on first contact with the shell of
                        the interface (Dirichlet reference)
    nu_c overrides the rate used inside nu (default c_n), which decouples the
    transmission from the clock for coupled comparisons.
    """

    h: float = 1e-5
    shell: float | None = None
    tmax: float = 1.0
    delta_n: float = 0.0
    c_n: float = 0.0
    kill_mode: str = "AbsorbOuter"
    seed: int = 0
    n_paths: int = 1000
    nu_eval: str = "sigma-side"
    nu_c: float | None = None
    aggregate: bool = True
    kappa: float = 5.0
    bridge: bool = True
    kappa_L: float = 1.0

    def __post_init__(self):
        if not (self.h > 0) or not math.isfinite(self.h):
            raise ParameterError("h must be positive")
        if self.shell is not None and not self.shell > 0:
            raise ParameterError("shell width must be positive")
        if not (self.tmax > 0):
            raise ParameterError("tmax must be positive")
        if self.delta_n < 0 or self.c_n < 0 or (self.nu_c is not None and self.nu_c < 0):
            raise ParameterError("delta_n, c_n and nu_c must be non-negative")
        if self.kill_mode not in KILL_MODES:
            raise ParameterError(f"kill_mode must be one of {KILL_MODES}")
        if self.nu_eval not in NU_EVAL:
            raise ParameterError(f"nu_eval must be one of {NU_EVAL}")
        if self.seed < 0 or self.n_paths < 1:
            raise ParameterError("seed must be >= 0 and n_paths >= 1")
        if not self.kappa_L > 0:
            raise ParameterError("kappa_L must be positive")
        if self.kappa < 3:
            raise ParameterError("kappa (block safety factor) must be >= 3")
        if self.shell_width < 3.0 * math.sqrt(self.h) * (1 - 1e-12):
            warnings.warn(f"shell width {self.shell_width:.3g} below 3 sqrt(h)", RuntimeWarning,
                          stacklevel=3)

    @property
    def shell_width(self) -> float:
        return 3.0 * math.sqrt(self.h) if self.shell is None else float(self.shell)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.tmax / self.h)))

    @property
    def dt(self) -> float:
        # h adjusted so that n_steps steps end exactly at tmax
        return self.tmax / self.n_steps

    @property
    def clock_rate(self) -> float:
        if self.kill_mode in ("ElasticClock", "ReflectInterface"):
            return self.c_n
        return 0.0

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ParticleState:
    position: np.ndarray
    clock: float = 0.0
    region: str = "Omega"
    alive: bool = True
    cause: str = "Running"


@dataclass(frozen=True)
class PathFunctionals:
    gamma_omega: float
    gamma_sigma: float
    L_sym: float
    L_left: float
    L_right: float
    crossings: int
    sigma_choices: int
    lifetime: float
    zeta: float
    cause: str
    integral: float = 0.0
    weighted_integral: float = 0.0


@dataclass
class PathBatch:
    """Per-path results of one run, as parallel arrays."""

    lifetime: np.ndarray
    cause: np.ndarray
    L_sym: np.ndarray
    L_left: np.ndarray
    L_right: np.ndarray
    gamma_omega: np.ndarray
    gamma_sigma: np.ndarray
    crossings: np.ndarray
    sigma_choices: np.ndarray
    zeta: np.ndarray
    integral: np.ndarray
    weighted_integral: np.ndarray
    discarded: np.ndarray
    anomalies: np.ndarray
    end: np.ndarray
    records: np.ndarray
    record_times: np.ndarray
    config: SimConfig
    elapsed: float
    path_ids: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.lifetime)

    def functionals(self, i: int) -> PathFunctionals:
        return PathFunctionals(
            float(self.gamma_omega[i]), float(self.gamma_sigma[i]), float(self.L_sym[i]),
            float(self.L_left[i]), float(self.L_right[i]), int(self.crossings[i]),
            int(self.sigma_choices[i]), float(self.lifetime[i]), float(self.zeta[i]),
            CAUSES[int(self.cause[i])], float(self.integral[i]), float(self.weighted_integral[i]))

    def survival(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        life = np.sort(self.lifetime)
        alive = self.cause == HORIZON
        # paths reaching the horizon survive every t <= tmax
        dead_life = np.sort(self.lifetime[~alive])
        return 1.0 - np.searchsorted(dead_life, t, side="right") / len(life)

    @property
    def killed_fraction(self) -> float:
        return float(np.mean(self.cause == KILLED))

    def cause_counts(self) -> dict:
        return {name: int(np.sum(self.cause == k)) for k, name in enumerate(CAUSES)}


# ------------------------------------------------------------------ plumbing

_TRANS = {"AbsorbOuter": K.SKEW, "ElasticClock": K.SKEW, "ReflectInterface": K.REFLECT,
          "AbsorbInterface": K.ABSORB_SHELL}


def kernel_params(cfg: SimConfig, domain: DomainModel, c_weight: float = 0.0,
                  weight_cut: float = 1e-6) -> np.ndarray:
    prm = np.zeros(K.N_PARAMS)
    prm[K.P_H] = cfg.dt
    prm[K.P_SHELL] = cfg.shell_width
    prm[K.P_NSTEPS] = cfg.n_steps
    prm[K.P_CKILL] = cfg.clock_rate
    prm[K.P_CNU] = cfg.c_n if cfg.nu_c is None else cfg.nu_c
    prm[K.P_NUMODE] = NU_EVAL.index(cfg.nu_eval)
    prm[K.P_TRANS] = _TRANS[cfg.kill_mode]
    prm[K.P_B] = domain.b
    prm[K.P_SEGLEN] = domain.alpha ** (-domain.level)
    prm[K.P_DELTA] = cfg.delta_n
    prm[K.P_CWEIGHT] = c_weight
    prm[K.P_WCUT] = weight_cut
    prm[K.P_AGG] = 1.0 if cfg.aggregate else 0.0
    prm[K.P_KAPPA] = cfg.kappa
    prm[K.P_BRIDGE] = 1.0 if cfg.bridge else 0.0
    prm[K.P_KAPPAL] = cfg.kappa_L
    return prm


@dataclass(frozen=True)
class Field:
    """Scalar field handed to the kernel: a constant or a bilinear raster."""

    values: np.ndarray
    meta: np.ndarray

    @classmethod
    def constant(cls, value: float) -> "Field":
        return cls(np.zeros((2, 2)), np.array([0, 0, 1, 1, 2, 2, 1.0, float(value)]))

    @classmethod
    def sample(cls, f, domain: DomainModel, resolution: int = 512) -> "Field":
        lo, hi = domain.bounding_box(pad=0.02)
        xs = np.linspace(lo[0], hi[0], resolution)
        ys = np.linspace(lo[1], hi[1], resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        with np.errstate(all="ignore"):
            vals = np.broadcast_to(np.asarray(f(gx, gy), dtype=float), gx.shape).copy()
        meta = np.array([lo[0], lo[1], xs[1] - xs[0], ys[1] - ys[0], resolution, resolution,
                         0.0, 0.0])
        return cls(vals, meta)


def as_field(f, domain: DomainModel) -> Field:
    if f is None:
        return Field.constant(1.0)
    if isinstance(f, Field):
        return f
    if np.isscalar(f):
        return Field.constant(float(f))
    return Field.sample(f, domain)


def start_region(x0, domain: DomainModel, cfg: SimConfig) -> int:
    """0 for the closure of Omega^n, 1 for the fiber, -1 on the roof polyline."""
    tol = 1e-12 * domain.alpha ** (-domain.level)
    lab = classify(np.asarray(x0, dtype=float), domain, tol)
    if lab in ("InteriorOmega", "OnInterface"):
        return 0
    if lab == "OnOuterBoundary":
        return -1
    if lab == "Fiber":
        if cfg.kill_mode in ("ReflectInterface", "AbsorbInterface"):
            raise DomainError(f"{cfg.kill_mode} paths must start in the closure of Omega^n")
        return 1
    raise DomainError(f"start point {list(x0)} lies outside Omega^n_eps")


def run_paths(x0, cfg: SimConfig, domain: DomainModel, f=None, path_ids=None,
              record_times=None, c_weight: float = 0.0, weight_cut: float = 1e-6) -> PathBatch:
    """Simulate cfg.n_paths paths (or the given path indices) from x0."""
    x0 = np.asarray(x0, dtype=float)
    region0 = start_region(x0, domain, cfg)
    if cfg.kill_mode == "AbsorbInterface":
        d = point_segment_distance(x0[0], x0[1], domain.interface_segments)[0].min()
        if d < cfg.shell_width:
            warnings.warn("start point lies in the boundary shell: paths stop immediately",
                          RuntimeWarning, stacklevel=2)
    if path_ids is None:
        path_ids = np.arange(cfg.n_paths, dtype=np.int64)
    path_ids = np.ascontiguousarray(path_ids, dtype=np.int64)
    rt = np.zeros(0) if record_times is None else np.asarray(record_times, dtype=float)
    if np.any(np.diff(rt) < 0) or np.any(rt < 0) or np.any(rt > cfg.tmax + 1e-12):
        raise ParameterError("record times must be sorted within [0, tmax]")
    rec_steps = np.round(rt / cfg.dt).astype(np.int64)
    idx = domain.index(cfg.h)
    fld = as_field(f, domain)
    prm = kernel_params(cfg, domain, c_weight, weight_cut)
    t0 = time.perf_counter()
    fout, sout, rec = K.run_paths(x0, region0, path_ids, int(cfg.seed), idx.as_tuple(), prm,
                                  fld.values, fld.meta, rec_steps)
    elapsed = time.perf_counter() - t0
    life = fout[:, K.F_LIFE].copy()
    life[sout[:, K.S_CAUSE] == HORIZON] = cfg.tmax
    batch = PathBatch(
        lifetime=life, cause=sout[:, K.S_CAUSE].astype(np.int8),
        L_sym=fout[:, K.F_LSYM], L_left=fout[:, K.F_LLEFT], L_right=fout[:, K.F_LRIGHT],
        gamma_omega=fout[:, K.F_GOM], gamma_sigma=fout[:, K.F_GSG],
        crossings=sout[:, K.S_HITS], sigma_choices=sout[:, K.S_SIGMA], zeta=fout[:, K.F_ZETA],
        integral=fout[:, K.F_INT], weighted_integral=fout[:, K.F_WINT],
        discarded=sout[:, K.S_DISCARD].astype(bool), anomalies=sout[:, K.S_ANOM],
        end=fout[:, [K.F_X, K.F_Y]], records=rec, record_times=rt, config=cfg, elapsed=elapsed,
        path_ids=path_ids)
    return batch


def run_path(x0, cfg: SimConfig, domain: DomainModel, path_index: int = 0, f=None
             ) -> PathFunctionals:
    """One path of the batch run_paths would produce; record times cut aggregated
    steps, so only runs with the same record grid share realizations."""
    b = run_paths(x0, cfg, domain, f=f, path_ids=np.array([path_index]))
    return b.functionals(0)


# ------------------------------------------------------------------ single-step API

def skew_resolve(hit, proposed, nu: float, segment, stream: PathStream) -> np.ndarray:
    """Side selection at an interface hit: keep the endpoint if it lies on the
    drawn side (fiber with probability nu), otherwise mirror it across the
    segment's line."""
    if not 0.0 <= nu <= 1.0:
        raise ParameterError("nu must lie in [0, 1]")
    hit = np.asarray(hit, dtype=float)
    q = np.asarray(proposed, dtype=float)
    if np.allclose(q, hit, rtol=0.0, atol=1e-300):
        return hit.copy()
    s = np.asarray(segment, dtype=float).ravel()
    qx, qy, _ = K.skew_choice(q[0], q[1], s[0], s[1], s[2], s[3], float(nu), stream.ustate)
    return np.array([qx, qy])


def accumulate_local_time(p: ParticleState, domain: DomainModel, cfg: SimConfig):
    """(dL_sym, dL_left, dL_right) contributed by one sub-step at p."""
    d = point_segment_distance(p.position[0], p.position[1], domain.interface_segments)[0].min()
    inc = cfg.kappa_L * cfg.dt / (2.0 * cfg.shell_width) if d < cfg.shell_width else 0.0
    if p.region == "Omega":
        return inc, 2.0 * inc, 0.0
    return inc, 0.0, 2.0 * inc


def step(p: ParticleState, cfg: SimConfig, domain: DomainModel, stream: PathStream):
    """Advance a running particle by one step of size h.

    Returns the new state and a dict of functional increments. The clock
    threshold is not applied here (see run_path).
    """
    if not p.alive:
        return p, {}
    x = np.asarray(p.position, dtype=float)
    lab = classify(x, domain, 1e-12 * domain.alpha ** (-domain.level))
    if lab == "Outside":
        raise IntegrityError(f"particle at {x.tolist()} is outside Omega^n_eps")
    fs = np.zeros(K.NF)
    st = np.zeros(K.NS, dtype=np.int64)
    fs[K.F_X], fs[K.F_Y] = x
    fs[K.F_ZETA] = math.inf
    st[K.S_REGION] = REGION_NAMES.index(p.region)
    st[K.S_STEP] = int(round(p.clock / cfg.dt))
    idx = domain.index(cfg.h)
    fld = Field.constant(1.0)
    K.advance(fs, st, stream.ustate, stream.nstate, idx.as_tuple(),
              kernel_params(cfg, domain), fld.values, fld.meta, 1, False)
    cause = CAUSES[int(st[K.S_CAUSE])]
    alive = cause == "Running"
    new = ParticleState(np.array([fs[K.F_X], fs[K.F_Y]]),
                        float(st[K.S_STEP] * cfg.dt) if alive else p.clock,
                        REGION_NAMES[int(st[K.S_REGION])], alive, cause)
    inc = {"L_sym": fs[K.F_LSYM], "L_left": fs[K.F_LLEFT], "L_right": fs[K.F_LRIGHT],
           "gamma_omega": fs[K.F_GOM], "gamma_sigma": fs[K.F_GSG], "crossings": int(st[K.S_HITS]),
           "sigma_choices": int(st[K.S_SIGMA])}
    return new, inc
