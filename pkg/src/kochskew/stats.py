"""Small statistical helpers: Monte Carlo estimates, Wilson intervals, KS distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_paths: int
    elapsed: float = 0.0

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def zscore(self, target: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr

    def as_dict(self) -> dict:
        lo, hi = self.ci()
        return {"mean": self.mean, "stderr": self.stderr, "ci_lo": lo, "ci_hi": hi,
                "n_paths": self.n_paths, "elapsed": self.elapsed}

    @classmethod
    def from_samples(cls, x, elapsed: float = 0.0) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = len(x)
        if n == 0:
            return cls(math.nan, math.nan, 0, elapsed)
        sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(x)), sd / math.sqrt(n), n, elapsed)


def wilson_interval(k, n, z: float = 1.96):
    """Wilson score interval for a binomial proportion (vectorized)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    p = np.where(n > 0, k / np.maximum(n, 1), 0.0)
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return np.clip(mid - half, 0.0, 1.0), np.clip(mid + half, 0.0, 1.0)


def binomial_ci(k: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Exact (Clopper-Pearson) interval."""
    a = 1.0 - level
    lo = 0.0 if k == 0 else _st.beta.ppf(a / 2, k, n - k + 1)
    hi = 1.0 if k == n else _st.beta.ppf(1 - a / 2, k + 1, n - k)
    return float(lo), float(hi)


def ks_distance(life_a, life_b, horizon: float) -> float:
    """Two-sample KS distance of lifetimes truncated at the horizon.

    Mass at or beyond the horizon is pooled at the horizon, so the sup runs
    over t < horizon only.
    """
    a = np.minimum(np.asarray(life_a, dtype=float), horizon)
    b = np.minimum(np.asarray(life_b, dtype=float), horizon)
    if len(a) == 0 or len(b) == 0:
        return math.nan
    return float(_st.ks_2samp(a, b).statistic)


def ks_to_constant_survival(life, horizon: float) -> float:
    """KS distance to the law with no mass before the horizon (survival identically 1)."""
    life = np.asarray(life, dtype=float)
    return float(np.mean(life < horizon)) if len(life) else math.nan


def ks_critical(n: int, m: int | None = None, level: float = 0.95) -> float:
    """Asymptotic KS critical value (one- or two-sample)."""
    c = math.sqrt(-0.5 * math.log((1.0 - level) / 2.0))
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))
