"""Scalar primitives shared by the 1D and 2D path kernels.

Both kernels resolve a barrier the same way: a proposed Gaussian move of
duration tau either crosses the barrier, or touches it with the Brownian-bridge
probability exp(-2 d0 d1 / tau); at a touch of the interface the side is drawn
from Bernoulli(nu) and the endpoint is kept or mirrored. Local time uses the
left-endpoint shell estimator.
"""

import math

from numba import njit

from .rng import uniform

# termination causes
RUNNING = 0
ABSORBED = 1
KILLED = 2
HORIZON = 3
CAUSES = ("Running", "Absorbed", "Killed", "HorizonReached")


@njit(cache=True, inline="always")
def touch_probability(d0, d1, tau):
    """P(Brownian bridge of duration tau between points at distances d0, d1 from a line meets it)."""
    if d0 <= 0.0 or d1 <= 0.0:
        return 1.0
    e = 2.0 * d0 * d1 / tau
    if e > 60.0:
        return 0.0
    return math.exp(-e)


@njit(cache=True, inline="always")
def bridge_hit(us, d0, d1, tau):
    """Bernoulli draw of a bridge touch; consumes a uniform only when the probability is non-negligible."""
    p = touch_probability(d0, d1, tau)
    if p == 0.0:
        return False
    if p == 1.0:
        return True
    return uniform(us) < p


@njit(cache=True, inline="always")
def nu_value(c, w):
    cw = c * w
    if math.isinf(cw):
        return 1.0
    return cw / (1.0 + cw)


@njit(cache=True, inline="always")
def kill_threshold(c, e1):
    """zeta = E/c with E ~ Exp(1); Exp(0) is +inf."""
    if c <= 0.0:
        return math.inf
    return e1 / c


@njit(cache=True, inline="always")
def shell_weight(dist, h, shell):
    """Increment of the symmetric local time for one sub-step at distance dist."""
    if dist < shell:
        return h / (2.0 * shell)
    return 0.0


@njit(cache=True, inline="always")
def discount_integral(delta, t0, tau):
    """int_{t0}^{t0+tau} e^{-delta s} ds."""
    if delta == 0.0:
        return tau
    return math.exp(-delta * t0) * (-math.expm1(-delta * tau)) / delta
