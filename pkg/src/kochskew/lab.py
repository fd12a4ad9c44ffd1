"""Regime study across pre-fractal levels: schedules c_n, reference processes, classification."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._core import HORIZON, KILLED
from .diffusion import PathBatch, SimConfig, run_paths
from .errors import ParameterError
from .functionals import SurvivalCurve, level_step
from .geometry import arclength_quadrature, build_domain, check_alpha, max_fiber_b, \
    selfsimilar_quadrature
from .stats import Estimate, ks_critical, ks_distance, ks_to_constant_survival

KINDS = ("ConstantC0", "Vanishing", "Exploding")
RULES = {
    "ConstantC0": ("constant",),
    "Vanishing": ("geometric", "inverse"),
    "Exploding": ("sqrt-geometric", "linear"),
}
_PREFIX = {"const": "ConstantC0", "vanish": "Vanishing", "explode": "Exploding"}
LABELS = ("Robin", "Neumann", "Dirichlet", "Inconclusive")


@dataclass(frozen=True)
class RegimeSchedule:
    """c_n as a function of the level.

    constant        c_n = cbar
    geometric       c_n = cbar alpha^{-n}
    inverse         c_n = cbar / n
    sqrt-geometric  c_n = cbar alpha^{n/2}
    linear          c_n = cbar n
    """

    kind: str
    cbar: float
    rule: str = ""
    alpha: float = 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"schedule kind must be one of {KINDS}")
        if not (self.cbar > 0 and math.isfinite(self.cbar)):
            raise ParameterError("schedule constant must be positive and finite")
        if not self.rule:
            object.__setattr__(self, "rule", RULES[self.kind][0])
        if self.rule not in RULES[self.kind]:
            raise ParameterError(f"rule {self.rule!r} not allowed for {self.kind}")
        check_alpha(self.alpha)

    @classmethod
    def parse(cls, text: str, alpha: float = 3.0) -> "RegimeSchedule":
        """'const:1', 'vanish:4', 'explode:5', optionally 'vanish:2:inverse'."""
        parts = text.strip().split(":")
        if len(parts) not in (2, 3) or parts[0] not in _PREFIX:
            raise ParameterError(f"bad schedule {text!r}; use const:c0|vanish:cbar|explode:cbar")
        try:
            cbar = float(parts[1])
        except ValueError:
            raise ParameterError(f"bad schedule constant in {text!r}") from None
        return cls(_PREFIX[parts[0]], cbar, parts[2] if len(parts) == 3 else "", alpha)

    @property
    def ident(self) -> str:
        short = {v: k for k, v in _PREFIX.items()}[self.kind]
        return f"{short}:{self.cbar:g}:{self.rule}"

    def c(self, n: int) -> float:
        a = self.alpha
        return {"constant": self.cbar, "geometric": self.cbar * a ** (-n),
                "inverse": self.cbar / n, "sqrt-geometric": self.cbar * a ** (n / 2),
                "linear": self.cbar * n}[self.rule]

    def conductance(self, n: int, b: float | None = None) -> float:
        """c_n times the largest fiber weight, c_n (b/2) alpha^{-n} 3/(3+b^2)."""
        b = max_fiber_b(self.alpha) if b is None else b
        return self.c(n) * 0.5 * b * self.alpha ** (-n) * 3.0 / (3.0 + b * b)

    def first_violation(self, levels, b: float | None = None) -> int | None:
        """For Exploding schedules: first level where c_n fails to grow or c_n max(w) fails to shrink."""
        if self.kind != "Exploding":
            return None
        prev_c = prev_w = None
        for n in levels:
            c, w = self.c(n), self.conductance(n, b)
            if prev_c is not None and not (c > prev_c and w < prev_w):
                return n
            if w >= 1.0:
                return n
            prev_c, prev_w = c, w
        return None


@dataclass(frozen=True)
class StudyConfig:
    x0: tuple = (0.5, -math.sqrt(3.0) / 6.0)
    horizon: float = 0.05
    n_paths: int = 10_000
    seed: int = 0
    alpha: float = 3.0
    b: float | None = None
    h0: float = 6.561e-4
    h_floor: float = 1e-7
    robin_c0: float = 1.0
    grid_points: int = 51
    ks_level: float = 0.95

    def h(self, n: int) -> float:
        return level_step(n, self.h0, self.alpha, self.h_floor)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.grid_points)

    def sim(self, n: int, **kw) -> SimConfig:
        return SimConfig(h=self.h(n), tmax=self.horizon, seed=self.seed, n_paths=self.n_paths, **kw)


@dataclass
class References:
    """Same-level reference lifetimes (Dirichlet and Robin); Neumann is analytic."""

    level: int
    dirichlet: PathBatch
    robin: PathBatch
    robin_c0: float


def reference_runs(n: int, study: StudyConfig, cache: dict | None = None) -> References:
    key = (n, study)
    if cache is not None and key in cache:
        return cache[key]
    dom = build_domain(study.alpha, n, study.b)
    d = run_paths(study.x0, study.sim(n, kill_mode="AbsorbInterface"), dom)
    r = run_paths(study.x0, study.sim(n, kill_mode="ReflectInterface", c_n=study.robin_c0), dom)
    ref = References(n, d, r, study.robin_c0)
    if cache is not None:
        cache[key] = ref
    return ref


@dataclass(frozen=True)
class LevelRow:
    level: int
    schedule: str
    c_n: float
    h: float
    lifetime: Estimate
    survival_at_horizon: float
    ks_dirichlet: float
    ks_robin: float
    ks_neumann: float
    ks_critical: float
    killed_fraction: float
    absorbed_fraction: float
    shallow_kill_fraction: float
    dominates_dirichlet: bool
    curve: SurvivalCurve | None = None

    def record(self) -> dict:
        return {"level": self.level, "schedule": self.schedule, "c_n": self.c_n, "h": self.h,
                "mean_lifetime": self.lifetime.mean, "lifetime_stderr": self.lifetime.stderr,
                "survival_at_horizon": self.survival_at_horizon,
                "ks_dirichlet": self.ks_dirichlet, "ks_robin": self.ks_robin,
                "ks_neumann": self.ks_neumann, "ks_critical": self.ks_critical,
                "killed_fraction": self.killed_fraction,
                "absorbed_fraction": self.absorbed_fraction,
                "shallow_kill_fraction": self.shallow_kill_fraction,
                "n_paths": self.lifetime.n_paths}


COLUMNS = ("level", "schedule", "c_n", "h", "mean_lifetime", "lifetime_stderr",
           "survival_at_horizon", "ks_dirichlet", "ks_robin", "ks_neumann", "ks_critical",
           "killed_fraction", "absorbed_fraction", "shallow_kill_fraction", "n_paths")


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    horizon: float = math.nan

    def add(self, row: LevelRow):
        if any((r.level, r.schedule) == (row.level, row.schedule) for r in self.rows):
            raise ParameterError(f"duplicate row for level {row.level}, {row.schedule}")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.record()[name] for r in self.rows])

    @property
    def levels(self) -> list[int]:
        return [r.level for r in self.rows]

    def records(self) -> list[dict]:
        return [r.record() for r in self.rows]

    def __len__(self):
        return len(self.rows)


def level_row(batch: PathBatch, ref: References, schedule_id: str, study: StudyConfig,
              times=None) -> LevelRow:
    T = study.horizon
    n = len(batch)
    life = batch.lifetime
    surv = float(np.mean(batch.cause == HORIZON))
    killed = batch.cause == KILLED
    shallow = float(np.mean(batch.gamma_sigma[killed] < batch.config.dt)) if killed.any() else math.nan
    curve = SurvivalCurve.from_batch(batch, study.times() if times is None else times, ref.level)
    return LevelRow(
        level=ref.level, schedule=schedule_id, c_n=batch.config.c_n, h=batch.config.dt,
        lifetime=Estimate.from_samples(life, batch.elapsed), survival_at_horizon=surv,
        ks_dirichlet=ks_distance(life, ref.dirichlet.lifetime, T),
        ks_robin=ks_distance(life, ref.robin.lifetime, T),
        ks_neumann=ks_to_constant_survival(life, T),
        ks_critical=ks_critical(n, len(ref.dirichlet), study.ks_level),
        killed_fraction=float(np.mean(killed)),
        absorbed_fraction=float(np.mean(batch.cause == 1)),
        shallow_kill_fraction=shallow,
        dominates_dirichlet=bool(np.all(life >= ref.dirichlet.lifetime)),
        curve=curve)


def run_regime_study(schedule: RegimeSchedule, levels, study: StudyConfig,
                     cache: dict | None = None, progress=None) -> ResultTable:
    """ElasticClock runs at each level with c_n from the schedule, against same-level references."""
    levels = [int(n) for n in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ParameterError("levels must be strictly increasing")
    if schedule.alpha != study.alpha:
        raise ParameterError("schedule and study use different alpha")
    bad = schedule.first_violation(levels, study.b)
    if bad is not None:
        warnings.warn(f"{schedule.ident}: c_n max(w) constraint fails at level {bad}; "
                      "stopping before it", RuntimeWarning, stacklevel=2)
        levels = [n for n in levels if n < bad]
    table = ResultTable(horizon=study.horizon)
    for n in levels:
        ref = reference_runs(n, study, cache)
        dom = build_domain(study.alpha, n, study.b)
        batch = run_paths(study.x0, study.sim(n, kill_mode="ElasticClock", c_n=schedule.c(n)), dom)
        table.add(level_row(batch, ref, schedule.ident, study))
        if progress:
            progress(table.rows[-1])
    return table


def classify_limit(table: ResultTable, level: float = 0.95, min_levels: int = 3) -> str:
    """Nearest reference law at the finest level, with a margin.

    The label is the reference with the smallest KS distance provided the
    runner-up is farther by more than the two-sample KS critical value at the
    given level; otherwise Inconclusive.
    """
    if len(set(table.levels)) < min_levels:
        raise ParameterError(f"classification needs at least {min_levels} levels")
    row = max(table.rows, key=lambda r: r.level)
    dist = {"Neumann": row.ks_neumann, "Dirichlet": row.ks_dirichlet, "Robin": row.ks_robin}
    dist = {k: v for k, v in dist.items() if np.isfinite(v)}
    if len(dist) < 2:
        return "Inconclusive"
    ranked = sorted(dist.items(), key=lambda kv: kv[1])
    n = row.lifetime.n_paths
    margin = ks_critical(n, n, level)
    if ranked[1][1] - ranked[0][1] > margin:
        return ranked[0][0]
    return "Inconclusive"


# ---------------------------------------------------------------- quadrature check

@dataclass(frozen=True)
class QuadratureRow:
    level: int
    arclength: float
    reference: float
    error: float


def check_prop_rr(g, levels, ref_level: int = 12, alpha: float = 3.0,
                  node: str = "base-midpoint") -> list[QuadratureRow]:
    """Arc-length quadrature with sigma_n weights against a fixed self-similar reference."""
    ref = selfsimilar_quadrature(g, ref_level, alpha, node)
    rows = []
    for n in levels:
        q = arclength_quadrature(g, build_domain(alpha, int(n)))
        rows.append(QuadratureRow(int(n), q, ref, abs(q - ref)))
    return rows


# ---------------------------------------------------------------- moment diagnostics

@dataclass(frozen=True)
class MomentReport:
    pairs: np.ndarray        # (k, 2) grid times (s, t)
    second_moment: np.ndarray
    stderr: np.ndarray
    C: float                 # least-squares constant in E|L_t - L_s|^2 ~ C |t - s|^2
    exponent: float          # log-log slope of the second moment against |t - s|
    violations: int          # pairs above C |t-s|^2 by more than 3 stderr


def moment_diagnostics(batch: PathBatch, min_paths: int = 10) -> MomentReport | None:
    """Second moments of local-time increments on the recorded time grid."""
    t = batch.record_times
    if len(t) < 2 or len(batch) < min_paths:
        warnings.warn("not enough traced times or paths for moment diagnostics", RuntimeWarning,
                      stacklevel=2)
        return None
    L = batch.records[:, :, 3]
    pairs, m2, se = [], [], []
    for i in range(len(t)):
        for j in range(i, len(t)):
            d2 = (L[:, j] - L[:, i]) ** 2
            pairs.append((t[i], t[j]))
            m2.append(d2.mean())
            se.append(d2.std(ddof=1) / math.sqrt(len(d2)))
    pairs = np.array(pairs)
    m2 = np.array(m2)
    se = np.array(se)
    dt = pairs[:, 1] - pairs[:, 0]
    pos = dt > 0
    C = float(np.sum(m2[pos] * dt[pos] ** 2) / np.sum(dt[pos] ** 4)) if pos.any() else 0.0
    ok = pos & (m2 > 0)
    exponent = (float(np.polyfit(np.log(dt[ok]), np.log(m2[ok]), 1)[0])
                if len(np.unique(dt[ok])) >= 2 else math.nan)
    viol = int(np.sum(m2 - 3 * se > C * dt ** 2))
    return MomentReport(pairs, m2, se, C, exponent, viol)
