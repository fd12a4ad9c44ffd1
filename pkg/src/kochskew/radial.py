"""Exactly solvable 1D reduction: skew BM on [0, r2] with interface r1.

All ODEs use the generator (1/2) d^2/dx^2, so mean exit times solve
(1/2) m'' - delta m = -1. Closed forms come from a small linear system on the
piecewise general solution; a tridiagonal finite-difference solve is provided
as an independent check.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erfcx

from ._walk1d import REFLECT_AT_ZERO, ZERO_VALUE, run_1d
from .errors import ParameterError
from .stats import Estimate

LEFT_VARIANTS = {"ReflectAtZero": REFLECT_AT_ZERO, "ZeroValueAtZero": ZERO_VALUE}
MAX_STEPS = 2 ** 62


class OracleFlag(UserWarning):
    """Degenerate oracle configuration (unreachable side or non-integrable limit)."""


@dataclass(frozen=True)
class IntervalModel:
    r1: float
    r2: float
    nu: float
    left: str = "ReflectAtZero"

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2) or not math.isfinite(self.r2):
            raise ParameterError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if not (0.0 <= self.nu <= 1.0):
            raise ParameterError(f"nu={self.nu} outside [0, 1]")
        if self.left not in LEFT_VARIANTS:
            raise ParameterError(f"left variant must be one of {sorted(LEFT_VARIANTS)}")

    @property
    def eps(self) -> float:
        return self.r2 - self.r1


# ------------------------------------------------------------ closed forms

def _pieces(x, delta):
    """Particular solution and two homogeneous solutions (values and derivatives)."""
    x = np.asarray(x, dtype=float)
    if delta == 0.0:
        return (-x * x, -2.0 * x), (x, np.ones_like(x)), (np.ones_like(x), np.zeros_like(x))
    # basis chosen to tend to (-x^2, x, 1) as delta -> 0 without cancellation
    k = math.sqrt(2.0 * delta)
    s, c = np.sinh(k * x), np.cosh(k * x)
    return ((-2.0 * np.sinh(0.5 * k * x) ** 2 / delta, -2.0 * s / k),
            (s / k, c),
            (c, k * s))


def _row(x, delta, deriv):
    p, f1, f2 = _pieces(np.array([x]), delta)
    j = 1 if deriv else 0
    return p[j][0], f1[j][0], f2[j][0]


@dataclass(frozen=True)
class PiecewiseSolution:
    """m(x) = particular + A_j phi1 + B_j phi2 on piece j (0: [0, r1], 1: [r1, r2])."""

    r1: float
    r2: float
    delta: float
    coef: np.ndarray  # (2, 2)
    flag: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.flag == "NonIntegrable":
            return np.full_like(x, np.inf) if x.ndim else math.inf
        p, f1, f2 = _pieces(x, self.delta)
        j = (x > self.r1).astype(int)
        out = p[0] + self.coef[j, 0] * f1[0] + self.coef[j, 1] * f2[0]
        return out if x.ndim else float(out)

    def derivative(self, x, side: int):
        p, f1, f2 = _pieces(np.asarray(x, dtype=float), self.delta)
        return p[1] + self.coef[side, 0] * f1[1] + self.coef[side, 1] * f2[1]


def interval_solution(m: IntervalModel, delta: float = 0.0) -> PiecewiseSolution:
    """Solve the 4x4 system for the transmission problem on [0, r1] U [r1, r2]."""
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    r1, r2, nu = m.r1, m.r2, m.nu
    if nu == 0.0 and delta == 0.0 and m.left == "ReflectAtZero":
        warnings.warn("nu = 0: the layer is unreachable from Omega and the left end reflects; "
                      "mean exit time is infinite", OracleFlag, stacklevel=2)
        return PiecewiseSolution(r1, r2, delta, np.zeros((2, 2)), "NonIntegrable")
    A = np.zeros((4, 4))
    rhs = np.zeros(4)
    # unknowns: A0, B0, A1, B1
    if m.left == "ReflectAtZero":
        p, a, b = _row(0.0, delta, True)
    else:
        p, a, b = _row(0.0, delta, False)
    A[0, :2] = a, b
    rhs[0] = -p
    p, a, b = _row(r1, delta, False)
    A[1] = a, b, -a, -b
    rhs[1] = 0.0
    p, a, b = _row(r1, delta, True)
    A[2] = (1 - nu) * a, (1 - nu) * b, -nu * a, -nu * b
    rhs[2] = -((1 - nu) - nu) * p
    p, a, b = _row(r2, delta, False)
    A[3, 2:] = a, b
    rhs[3] = -p
    coef = np.linalg.solve(A, rhs).reshape(2, 2)
    flag = "SigmaUnreachable" if nu == 0.0 else ""
    return PiecewiseSolution(r1, r2, delta, coef, flag)


def mean_exit_closed_form(x, m: IntervalModel, delta: float = 0.0):
    """E_x of the (discounted) exit time through r2: (1/2) m'' - delta m = -1."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > m.r2)):
        raise ParameterError("x must lie in [0, r2]")
    if m.nu == 0.0 and np.any(x > m.r1):
        warnings.warn("nu = 0: the layer is unreachable from Omega; returning the one-sided "
                      "solution", OracleFlag, stacklevel=2)
    return interval_solution(m, delta)(x)


def fd_mean_exit(m: IntervalModel, nodes: int = 10_000, delta: float = 0.0):
    """Second-order finite differences with an interface flux row.

    Returns (grid, values). The interface node sits exactly at r1; one-sided
    derivatives there are corrected with the ODE (m'' = 2 (delta m - 1)).
    """
    r1, r2, nu = m.r1, m.r2, m.nu
    n1 = max(2, int(round(nodes * r1 / r2)))
    n2 = max(2, nodes - n1)
    d1 = r1 / n1
    d2 = (r2 - r1) / n2
    x = np.concatenate([np.linspace(0.0, r1, n1 + 1), np.linspace(r1, r2, n2 + 1)[1:]])
    nn = n1 + n2  # unknowns 0..nn-1, value at nn is 0
    lower = np.zeros(nn)
    diag = np.zeros(nn)
    upper = np.zeros(nn)
    rhs = np.full(nn, -1.0)
    for i in range(nn):
        d = d1 if i < n1 else d2
        lower[i] = 0.5 / d ** 2
        upper[i] = 0.5 / d ** 2
        diag[i] = -1.0 / d ** 2 - delta
    if m.left == "ReflectAtZero":
        upper[0] = 1.0 / d1 ** 2
        lower[0] = 0.0
    else:
        diag[0], upper[0], lower[0], rhs[0] = 1.0, 0.0, 0.0, 0.0
    i = n1
    # (1-nu) [(m_i - m_{i-1})/d1 + d1 (delta m_i - 1)] - nu [(m_{i+1} - m_i)/d2 - d2 (delta m_i - 1)] = 0
    lower[i] = -(1 - nu) / d1
    upper[i] = -nu / d2
    diag[i] = (1 - nu) / d1 + (1 - nu) * d1 * delta + nu / d2 + nu * d2 * delta
    rhs[i] = (1 - nu) * d1 + nu * d2
    ab = np.zeros((3, nn))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    sol = solve_banded((1, 1), ab, rhs)
    return x, np.append(sol, 0.0)


def elastic_limit_solution(x, r1: float, c: float, left: str = "ReflectAtZero",
                           delta: float = 0.0):
    """Limit ODE on [0, r1]: (1/2) v'' - delta v = -1 with v(r1) = 0 (c = inf)
    or v'(r1) = -c v(r1) (finite c), and the chosen left condition."""
    if c < 0 or math.isnan(c):
        raise ParameterError("c must be >= 0")
    if left not in LEFT_VARIANTS:
        raise ParameterError(f"left variant must be one of {sorted(LEFT_VARIANTS)}")
    x = np.asarray(x, dtype=float)
    if c == 0.0 and delta == 0.0 and left == "ReflectAtZero":
        warnings.warn("c = 0 with delta = 0: reflecting limit, lifetime is infinite "
                      "(NonIntegrable)", OracleFlag, stacklevel=2)
        return np.full_like(x, np.inf) if x.ndim else math.inf
    A = np.zeros((2, 2))
    rhs = np.zeros(2)
    p, a, b = _row(0.0, delta, left == "ReflectAtZero")
    A[0] = a, b
    rhs[0] = -p
    pv, av, bv = _row(r1, delta, False)
    if math.isinf(c):
        A[1] = av, bv
        rhs[1] = -pv
    else:
        pd, ad, bd = _row(r1, delta, True)
        A[1] = ad + c * av, bd + c * bv
        rhs[1] = -(pd + c * pv)
    ca, cb = np.linalg.solve(A, rhs)
    p, f1, f2 = _pieces(x, delta)
    out = p[0] + ca * f1[0] + cb * f2[0]
    return out if x.ndim else float(out)


def fixed_c_schedule(c: float, eps) -> list[tuple[float, float]]:
    """(eps, nu) pairs with nu / ((1 - nu) eps) = c exactly."""
    return [(float(e), c * e / (1.0 + c * e)) for e in eps]


def halving_eps(eps0: float, steps: int) -> list[float]:
    return [eps0 / 2 ** k for k in range(steps + 1)]


@dataclass(frozen=True)
class SweepRow:
    k: int
    eps: float
    nu: float
    c_eff: float
    sup_error: float


def convergence_sweep(c: float, schedule, r1: float = 1.0, left: str = "ReflectAtZero",
                      delta: float = 0.0, grid_points: int = 401) -> list[SweepRow]:
    """sup_{x in [0, r1]} |interval solution - elastic limit| along a schedule of (eps, nu)."""
    eps_prev = math.inf
    xs = np.linspace(0.0, r1, grid_points)
    target = elastic_limit_solution(xs, r1, c, left, delta)
    rows = []
    for k, (eps, nu) in enumerate(schedule):
        if not (0.0 < nu < 1.0):
            raise ParameterError(f"schedule entry {k}: nu={nu} outside (0, 1)")
        if not (0.0 < eps < eps_prev):
            raise ParameterError("eps must be positive and decreasing")
        eps_prev = eps
        m = IntervalModel(r1, r1 + eps, nu, left)
        err = float(np.max(np.abs(mean_exit_closed_form(xs, m, delta) - target)))
        rows.append(SweepRow(k, eps, nu, nu / ((1.0 - nu) * eps), err))
    return rows


def loglog_slope(rows: list[SweepRow]) -> float:
    e = np.array([r.eps for r in rows])
    err = np.array([r.sup_error for r in rows])
    ok = err > 1e-14
    return float(np.polyfit(np.log(e[ok]), np.log(err[ok]), 1)[0])


# ------------------------------------------------------------ local time closed forms

def local_time_mean(t: float) -> float:
    """E L_t of standard BM at its starting point (symmetric normalization) = E|B_t|."""
    return math.sqrt(2.0 * t / math.pi)


def laplace_local_time(c: float, t: float) -> float:
    """E exp(-c L_t) = 2 e^{c^2 t / 2} Phi(-c sqrt t), via the scaled complementary error function."""
    return float(erfcx(c * math.sqrt(t / 2.0)))


# ------------------------------------------------------------ Monte Carlo

@dataclass
class Batch1D:
    lifetime: np.ndarray
    cause: np.ndarray
    L_sym: np.ndarray
    L_left: np.ndarray
    L_right: np.ndarray
    hits: np.ndarray
    sigma_choices: np.ndarray
    gamma_omega: np.ndarray
    gamma_sigma: np.ndarray
    integral: np.ndarray
    elapsed: float


def simulate_1d_paths(x0, m: IntervalModel, h: float, n_paths: int, seed: int = 0,
                      shell: float | None = None, tmax: float = math.inf, c_kill: float = 0.0,
                      delta: float = 0.0, aggregate: bool = True, kappa: float = 5.0,
                      first_path: int = 0) -> Batch1D:
    if h <= 0 or n_paths < 1:
        raise ParameterError("need h > 0 and n_paths >= 1")
    if not (0.0 <= x0 <= m.r2):
        raise ParameterError("x0 must lie in [0, r2]")
    if shell is None:
        shell = 3.0 * math.sqrt(h)
    if shell < 3.0 * math.sqrt(h) * (1 - 1e-12):
        warnings.warn("shell width below 3 sqrt(h)", RuntimeWarning, stacklevel=2)
    nsteps = MAX_STEPS if math.isinf(tmax) else int(round(tmax / h))
    t0 = time.perf_counter()
    out = run_1d(np.full(n_paths, float(x0)), np.arange(first_path, first_path + n_paths, dtype=np.int64),
                 int(seed), m.r1, m.r2, m.nu, LEFT_VARIANTS[m.left], h, shell, nsteps,
                 float(c_kill), float(delta), bool(aggregate), float(kappa))
    return Batch1D(*out, elapsed=time.perf_counter() - t0)


def simulate_1d_skew(x0, m: IntervalModel, h: float, n_paths: int, seed: int = 0,
                     **kw) -> tuple[Estimate, Estimate]:
    """(mean exit time, mean local time at r1) from n_paths skew-BM paths."""
    b = simulate_1d_paths(x0, m, h, n_paths, seed, **kw)
    return (Estimate.from_samples(b.lifetime, b.elapsed),
            Estimate.from_samples(b.L_sym, b.elapsed))


def free_line_model(t: float) -> IntervalModel:
    """Interval whose walls sit 12 standard deviations away from r1 over [0, t]."""
    r = 12.0 * math.sqrt(t)
    return IntervalModel(r, 2.0 * r, 0.5)


@dataclass(frozen=True)
class Calibration:
    t: float
    local_time: Estimate
    kappa_L: float
    kappa_stderr: float
    laplace: dict  # c -> (Estimate, closed form)

    @property
    def calibrated(self) -> bool:
        return 0.9 <= self.kappa_L <= 1.1


def calibrate_local_time(t: float = 1.0, h: float = 1e-6, n_paths: int = 100_000, seed: int = 0,
                         cs=(0.5, 1.0, 2.0), shell: float | None = None) -> Calibration:
    """Shell estimator of L_t at the start point of free BM against sqrt(2t/pi).

    kappa_L is the least-squares scale with E L_t = kappa_L sqrt(2t/pi).
    """
    m = free_line_model(t)
    b = simulate_1d_paths(m.r1, m, h, n_paths, seed, shell=shell, tmax=t)
    lt = Estimate.from_samples(b.L_sym, b.elapsed)
    ref = local_time_mean(t)
    lap = {}
    for c in cs:
        lap[float(c)] = (Estimate.from_samples(np.exp(-c * b.L_sym), b.elapsed),
                         laplace_local_time(c, t))
    return Calibration(t, lt, lt.mean / ref, lt.stderr / ref, lap)
