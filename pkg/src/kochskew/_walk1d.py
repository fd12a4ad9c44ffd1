"""1D skew-BM path kernel on [0, r2] with interface at r1.

Omega side is [0, r1], the layer is (r1, r2), r2 absorbs. The left end either
reflects (x -> |x|) or absorbs. Uses the same barrier, shell and clock
primitives as the planar kernel.
"""

import math

import numpy as np
from numba import njit

from ._core import (ABSORBED, HORIZON, KILLED, RUNNING, discount_integral, kill_threshold,
                    shell_weight, bridge_hit)
from .rng import exp1, new_stream, normal, uniform

REFLECT_AT_ZERO = 0
ZERO_VALUE = 1


@njit(cache=True)
def run_1d(x0s, pids, seed, r1, r2, nu, left, h, shell, nsteps, c_kill, delta,
           aggregate, kappa):
    n = x0s.shape[0]
    life = np.zeros(n)
    cause = np.zeros(n, dtype=np.int8)
    lsym = np.zeros(n)
    lleft = np.zeros(n)
    lright = np.zeros(n)
    hits = np.zeros(n, dtype=np.int64)
    sig = np.zeros(n, dtype=np.int64)
    gom = np.zeros(n)
    gsg = np.zeros(n)
    integ = np.zeros(n)
    sqh = math.sqrt(h)
    for i in range(n):
        us, ns = new_stream(seed, pids[i])
        zeta = kill_threshold(c_kill, exp1(us))
        x = x0s[i]
        step = 0
        c = RUNNING
        t_end = 0.0
        if x >= r2 or (left == ZERO_VALUE and x <= 0.0):
            c = ABSORBED
        while c == RUNNING:
            if step >= nsteps:
                c = HORIZON
                t_end = nsteps * h
                break
            t = step * h
            dint = abs(x - r1)
            inc = shell_weight(dint, h, shell)
            if inc > 0.0:
                lsym[i] += inc
                if x <= r1:
                    lleft[i] += 2.0 * inc
                else:
                    lright[i] += 2.0 * inc
                if lsym[i] > zeta:
                    c = KILLED
                    t_end = t
                    break
            k = 1
            if aggregate:
                dstar = min(dint - shell, r2 - x)
                if left == ZERO_VALUE:
                    dstar = min(dstar, x)
                if dstar > kappa * sqh:
                    k = int((dstar / kappa) ** 2 / h)
                    k = min(k, nsteps - step)
            tau = k * h
            y = x + math.sqrt(tau) * normal(us, ns)
            if left == REFLECT_AT_ZERO:
                if y < 0.0:
                    y = -y
            else:
                if y <= 0.0 or bridge_hit(us, x, y, tau):
                    c = ABSORBED
                    t_end = t
                    break
            a = x - r1
            bb = y - r1
            touched = a * bb < 0.0 or a == 0.0 or bridge_hit(us, abs(a), abs(bb), tau)
            if touched:
                hits[i] += 1
                if uniform(us) < nu:
                    sig[i] += 1
                    y = r1 + abs(bb)
                else:
                    y = r1 - abs(bb)
            if y >= r2 or bridge_hit(us, r2 - x, r2 - y, tau):
                c = ABSORBED
                t_end = t
                break
            if x <= r1:
                gom[i] += tau
            else:
                gsg[i] += tau
            integ[i] += discount_integral(delta, t, tau)
            x = y
            step += k
        life[i] = t_end
        cause[i] = c
    return life, cause, lsym, lleft, lright, hits, sig, gom, gsg, integ
