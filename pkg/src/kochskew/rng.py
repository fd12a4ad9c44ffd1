"""Counter-based random streams keyed by (master seed, path index).

Each path owns a 64-bit key; draw number i is the SplitMix64 finalizer applied
to key + i * GAMMA. Paths are therefore reproducible in isolation and
independent of evaluation order. The stream state is a pair of small arrays so
the numba kernels can carry it around:

    ustate = [key, counter]  (uint64)
    nstate = [has_cached_normal, cached_normal]  (float64)
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

GAMMA = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
SALT = np.uint64(0xD1B54A32D192ED03)
INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> uint64(30))) * M1
    z = (z ^ (z >> uint64(27))) * M2
    return z ^ (z >> uint64(31))


@njit(cache=True)
def path_key(seed, path):
    return mix64(mix64(uint64(seed) + GAMMA) ^ (uint64(path) * SALT + GAMMA))


@njit(cache=True)
def new_stream(seed, path):
    us = np.empty(2, dtype=np.uint64)
    us[0] = path_key(seed, path)
    us[1] = uint64(0)
    ns = np.zeros(2)
    return us, ns


@njit(cache=True, inline="always")
def next_u64(us):
    c = us[1]
    us[1] = c + uint64(1)
    return mix64(us[0] + c * GAMMA)


@njit(cache=True)
def uniform(us):
    """Uniform on the open interval (0, 1)."""
    return (float(next_u64(us) >> uint64(11)) + 0.5) * INV53


@njit(cache=True)
def normal(us, ns):
    """Standard normal by the Marsaglia polar method; the second variate is cached."""
    if ns[0] != 0.0:
        ns[0] = 0.0
        return ns[1]
    while True:
        a = 2.0 * uniform(us) - 1.0
        b = 2.0 * uniform(us) - 1.0
        s = a * a + b * b
        if 0.0 < s < 1.0:
            break
    m = math.sqrt(-2.0 * math.log(s) / s)
    ns[0] = 1.0
    ns[1] = b * m
    return a * m


@njit(cache=True)
def exp1(us):
    return -math.log(uniform(us))


class PathStream:
    """Python handle on one path's stream (used by the single-step API and tests)."""

    def __init__(self, seed: int, path: int = 0):
        if seed < 0 or path < 0:
            raise ValueError("seed and path index must be non-negative")
        self.seed = int(seed)
        self.path = int(path)
        self.ustate, self.nstate = new_stream(self.seed, self.path)

    @property
    def counter(self) -> int:
        return int(self.ustate[1])

    def uniform(self) -> float:
        return float(uniform(self.ustate))

    def normal(self) -> float:
        return float(normal(self.ustate, self.nstate))

    def uniforms(self, k: int) -> np.ndarray:
        return np.array([uniform(self.ustate) for _ in range(k)])
