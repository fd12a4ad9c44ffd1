"""Planar skew-BM path kernel on Omega^n_eps.

State of one path lives in two small arrays:

    fs: x, y, lifetime, L_sym, L_left, L_right, gamma_omega, gamma_sigma,
        zeta, integral, weighted_integral
    st: region (0 Omega, 1 Sigma), cause, hits, sigma_choices, step index,
        discarded, anomalies

Far from the interface (distance lower bound d > shell + kappa sqrt(2h)) k
grid steps are merged into one Gaussian move of variance k h with
k h <= ((d - shell)/kappa)^2; the position law at grid times is unchanged
unless the move reaches the boundary, which has probability below
2 Phi(-kappa). Such moves are still checked for crossings.
"""

import math

import numpy as np
from numba import njit

from ._core import (ABSORBED, HORIZON, KILLED, RUNNING, bridge_hit, discount_integral,
                    kill_threshold, nu_value, shell_weight)
from ._index import _seg_dist
from .rng import exp1, new_stream, normal, uniform

# transmission modes
SKEW = 0
REFLECT = 1
ABSORB_SHELL = 2

# parameter slots
P_H, P_SHELL, P_NSTEPS, P_CKILL, P_CNU, P_NUMODE, P_TRANS, P_B, P_SEGLEN, P_DELTA, \
    P_CWEIGHT, P_WCUT, P_AGG, P_KAPPA, P_BRIDGE, P_KAPPAL = range(16)
N_PARAMS = 16

F_X, F_Y, F_LIFE, F_LSYM, F_LLEFT, F_LRIGHT, F_GOM, F_GSG, F_ZETA, F_INT, F_WINT = range(11)
S_REGION, S_CAUSE, S_HITS, S_SIGMA, S_STEP, S_DISCARD, S_ANOM = range(7)
NF = 11
NS = 7
MAX_RESOLVE = 64


@njit(cache=True)
def dist_lower_bound(px, py, dfc, cm, dff, fm):
    dg = cm[2]
    i = min(max(int(round((px - cm[0]) / dg)), 0), int(cm[3]) - 1)
    j = min(max(int(round((py - cm[1]) / dg)), 0), int(cm[4]) - 1)
    lb = dfc[i, j] - math.hypot(px - (cm[0] + i * dg), py - (cm[1] + j * dg))
    dg = fm[2]
    i = min(max(int(round((px - fm[0]) / dg)), 0), int(fm[3]) - 1)
    j = min(max(int(round((py - fm[1]) / dg)), 0), int(fm[4]) - 1)
    lbf = dff[i, j] - math.hypot(px - (fm[0] + i * dg), py - (fm[1] + j * dg))
    if lbf > lb:
        lb = lbf
    return max(lb, 0.0)


@njit(cache=True)
def nearest_segment(px, py, seg, gm, start, idx):
    """Nearest segment among the 3x3 grid cells around p: exact whenever the distance is <= G."""
    g = gm[2]
    nx = int(gm[3])
    ny = int(gm[4])
    ci = int((px - gm[0]) / g)
    cj = int((py - gm[1]) / g)
    best = np.inf
    bk = -1
    for i in range(max(ci - 1, 0), min(ci + 2, nx)):
        for j in range(max(cj - 1, 0), min(cj + 2, ny)):
            c = i * ny + j
            for m in range(start[c], start[c + 1]):
                k = idx[m]
                d = _seg_dist(px, py, seg[k, 0], seg[k, 1], seg[k, 2], seg[k, 3])
                if d < best or (d == best and k < bk):
                    best = d
                    bk = k
    return best, bk


@njit(cache=True)
def first_hit(px, py, qx, qy, seg, gm, start, idx, exclude):
    """Smallest displacement parameter t in (0, 1] at which p->q meets a segment."""
    g = gm[2]
    nx = int(gm[3])
    ny = int(gm[4])
    i0 = max(int((min(px, qx) - gm[0]) / g), 0)
    i1 = min(int((max(px, qx) - gm[0]) / g), nx - 1)
    j0 = max(int((min(py, qy) - gm[1]) / g), 0)
    j1 = min(int((max(py, qy) - gm[1]) / g), ny - 1)
    rx = qx - px
    ry = qy - py
    tbest = 2.0
    kbest = -1
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            c = i * ny + j
            for m in range(start[c], start[c + 1]):
                k = idx[m]
                if k == exclude:
                    continue
                ax = seg[k, 0]
                ay = seg[k, 1]
                ex = seg[k, 2] - ax
                ey = seg[k, 3] - ay
                den = rx * ey - ry * ex
                if den == 0.0:
                    continue
                wx = ax - px
                wy = ay - py
                t = (wx * ey - wy * ex) / den
                if t <= 1e-12 or t > 1.0:
                    continue
                u = (wx * ry - wy * rx) / den
                if u < 0.0 or u > 1.0:
                    continue
                if t < tbest or (t == tbest and k < kbest):
                    tbest = t
                    kbest = k
    return tbest, kbest


@njit(cache=True)
def mirror(qx, qy, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    l2 = ex * ex + ey * ey
    s = ((qx - ax) * ey - (qy - ay) * ex) / l2
    # s > 0: q to the right of a->b; reflection subtracts twice the normal offset
    return qx - 2.0 * s * ey, qy + 2.0 * s * ex


@njit(cache=True)
def on_sigma_side(qx, qy, ax, ay, bx, by):
    """Exterior (fiber) side of an interface segment = left of its direction."""
    return (bx - ax) * (qy - ay) - (by - ay) * (qx - ax) > 0.0


@njit(cache=True)
def skew_choice(qx, qy, ax, ay, bx, by, nu, us):
    """Draw the side (True = fiber) with P(fiber) = nu; keep q if it is on that side, else mirror it."""
    to_sigma = uniform(us) < nu
    if on_sigma_side(qx, qy, ax, ay, bx, by) != to_sigma:
        qx, qy = mirror(qx, qy, ax, ay, bx, by)
    return qx, qy, to_sigma


@njit(cache=True)
def trace_weight(hx, hy, ax, ay, bx, by, b):
    """Fiber-side weight at the foot parameter of h on segment a->b."""
    ex = bx - ax
    ey = by - ay
    l2 = ex * ex + ey * ey
    u = ((hx - ax) * ex + (hy - ay) * ey) / l2
    u = min(max(u, 0.0), 1.0)
    return 3.0 * b * math.sqrt(l2) * min(u, 1.0 - u) / (3.0 + b * b)


@njit(cache=True)
def hit_nu(prm, hx, hy, ax, ay, bx, by):
    if prm[P_TRANS] == REFLECT:
        return 0.0
    if prm[P_NUMODE] == 1.0:
        return nu_value(prm[P_CNU], 1.0)
    return nu_value(prm[P_CNU], trace_weight(hx, hy, ax, ay, bx, by, prm[P_B]))


@njit(cache=True)
def field_value(px, py, fr, fmeta):
    if fmeta[6] != 0.0:
        return fmeta[7]
    gx = (px - fmeta[0]) / fmeta[2]
    gy = (py - fmeta[1]) / fmeta[3]
    nx = int(fmeta[4])
    ny = int(fmeta[5])
    i = min(max(int(math.floor(gx)), 0), nx - 2)
    j = min(max(int(math.floor(gy)), 0), ny - 2)
    tx = min(max(gx - i, 0.0), 1.0)
    ty = min(max(gy - j, 0.0), 1.0)
    return ((1 - tx) * (1 - ty) * fr[i, j] + tx * (1 - ty) * fr[i + 1, j]
            + (1 - tx) * ty * fr[i, j + 1] + tx * ty * fr[i + 1, j + 1])


@njit(cache=True)
def advance(fs, st, us, ns, geo, prm, fr, fmeta, kmax, allow_block):
    """One accepted sub-step (or merged block) of a running path."""
    iseg, oseg, gm, istart, iidx, ostart, oidx, dfc, cm, dff, fm = geo
    h = prm[P_H]
    shell = prm[P_SHELL]
    trans = int(prm[P_TRANS])
    px = fs[F_X]
    py = fs[F_Y]
    region0 = st[S_REGION]
    t = st[S_STEP] * h
    # left-endpoint local time
    dint = dist_lower_bound(px, py, dfc, cm, dff, fm)
    if dint < shell + kappa_room(prm):
        d, kk = nearest_segment(px, py, iseg, gm, istart, iidx)
        if kk >= 0 and d <= gm[2]:
            dint = d
        else:
            dint = max(dint, gm[2])
    inc = shell_weight(dint, h, shell) * prm[P_KAPPAL]
    if inc > 0.0:
        if trans == ABSORB_SHELL:
            st[S_CAUSE] = ABSORBED
            fs[F_LIFE] = t
            return
        fs[F_LSYM] += inc
        if region0 == 0:
            fs[F_LLEFT] += 2.0 * inc
        else:
            fs[F_LRIGHT] += 2.0 * inc
        if fs[F_LSYM] > fs[F_ZETA]:
            st[S_CAUSE] = KILLED
            fs[F_LIFE] = t
            return
    cw = prm[P_CWEIGHT]
    wgt = 1.0
    if cw > 0.0:
        wgt = math.exp(-cw * fs[F_LSYM])
        if wgt < prm[P_WCUT]:
            st[S_CAUSE] = KILLED
            fs[F_LIFE] = t
            return
    fval = field_value(px, py, fr, fmeta)
    if not math.isfinite(fval):
        st[S_DISCARD] = 1
        st[S_CAUSE] = KILLED
        fs[F_LIFE] = t
        return
    k = 1
    room = dint - shell
    if allow_block and prm[P_AGG] != 0.0 and region0 == 0 and room > kappa_room(prm):
        k = int((room / prm[P_KAPPA]) ** 2 / h)
        if k > kmax:
            k = kmax
        if k < 1:
            k = 1
    tau = k * h
    sq = math.sqrt(tau)
    qx = px + sq * normal(us, ns)
    qy = py + sq * normal(us, ns)
    region = region0
    nhits = 0
    if k == 1 or math.hypot(qx - px, qy - py) >= dint:
        cx = px
        cy = py
        exclude = -1
        done = False
        for _ in range(MAX_RESOLVE):
            ti, ki = first_hit(cx, cy, qx, qy, iseg, gm, istart, iidx, exclude)
            to = 2.0
            ko = -1
            if region == 1:
                to, ko = first_hit(cx, cy, qx, qy, oseg, gm, ostart, oidx, -1)
            if ki < 0 and ko < 0:
                done = True
                break
            if ko >= 0 and (ki < 0 or to < ti):
                st[S_CAUSE] = ABSORBED
                fs[F_LIFE] = t
                return
            if trans == ABSORB_SHELL:
                st[S_CAUSE] = ABSORBED
                fs[F_LIFE] = t
                return
            ax = iseg[ki, 0]
            ay = iseg[ki, 1]
            bx = iseg[ki, 2]
            by = iseg[ki, 3]
            hx = cx + ti * (qx - cx)
            hy = cy + ti * (qy - cy)
            nu = hit_nu(prm, hx, hy, ax, ay, bx, by)
            qx, qy, to_sigma = skew_choice(qx, qy, ax, ay, bx, by, nu, us)
            st[S_HITS] += 1
            if to_sigma:
                st[S_SIGMA] += 1
                region = 1
            else:
                region = 0
            nhits += 1
            cx = hx
            cy = hy
            exclude = ki
        if not done:
            # pathological chain of hits: stop at the last hit point
            st[S_ANOM] += 1
            qx = cx
            qy = cy
        if k == 1 and nhits == 0 and prm[P_BRIDGE] != 0.0 and trans != REFLECT:
            dq, kq = nearest_segment(qx, qy, iseg, gm, istart, iidx)
            if kq >= 0:
                ax = iseg[kq, 0]
                ay = iseg[kq, 1]
                bx = iseg[kq, 2]
                by = iseg[kq, 3]
                dp = _seg_dist(px, py, ax, ay, bx, by)
                if bridge_hit(us, dp, dq, tau):
                    if trans == ABSORB_SHELL:
                        st[S_CAUSE] = ABSORBED
                        fs[F_LIFE] = t
                        return
                    nu = hit_nu(prm, qx, qy, ax, ay, bx, by)
                    mx, my, to_sigma = skew_choice(qx, qy, ax, ay, bx, by, nu, us)
                    st[S_HITS] += 1
                    if to_sigma:
                        st[S_SIGMA] += 1
                    want = 1 if to_sigma else 0
                    if want != region:
                        tm, km = first_hit(qx, qy, mx, my, iseg, gm, istart, iidx, kq)
                        ok = km < 0 and _crosses(qx, qy, mx, my, ax, ay, bx, by)
                        if ok and want == 1:
                            tm, km = first_hit(qx, qy, mx, my, oseg, gm, ostart, oidx, -1)
                            ok = km < 0
                        if ok:
                            qx = mx
                            qy = my
                            region = want
        if region == 1 and prm[P_BRIDGE] != 0.0 and trans == SKEW and k == 1:
            dq, kq = nearest_segment(qx, qy, oseg, gm, ostart, oidx)
            if kq >= 0:
                dp = _seg_dist(px, py, oseg[kq, 0], oseg[kq, 1], oseg[kq, 2], oseg[kq, 3])
                if bridge_hit(us, dp, dq, tau):
                    st[S_CAUSE] = ABSORBED
                    fs[F_LIFE] = t
                    return
    if region0 == 0:
        fs[F_GOM] += tau
    else:
        fs[F_GSG] += tau
    # trapezoid in time: the left-point rule is biased when tau depends on position
    fq = field_value(qx, qy, fr, fmeta)
    if math.isfinite(fq):
        fval = 0.5 * (fval + fq)
    disc = discount_integral(prm[P_DELTA], t, tau)
    fs[F_INT] += fval * disc
    if cw > 0.0:
        fs[F_WINT] += wgt * fval * disc
    fs[F_X] = qx
    fs[F_Y] = qy
    st[S_REGION] = region
    st[S_STEP] += k


@njit(cache=True, inline="always")
def kappa_room(prm):
    return prm[P_KAPPA] * math.sqrt(2.0 * prm[P_H])


@njit(cache=True)
def _crosses(qx, qy, mx, my, ax, ay, bx, by):
    """Does the segment q->m meet the segment a->b (proper crossing)?"""
    rx = mx - qx
    ry = my - qy
    ex = bx - ax
    ey = by - ay
    den = rx * ey - ry * ex
    if den == 0.0:
        return False
    wx = ax - qx
    wy = ay - qy
    t = (wx * ey - wy * ex) / den
    u = (wx * ry - wy * rx) / den
    return 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0


@njit(cache=True)
def run_paths(x0, region0, pids, seed, geo, prm, fr, fmeta, rec_steps):
    n = pids.shape[0]
    nrec = rec_steps.shape[0]
    h = prm[P_H]
    nsteps = int(prm[P_NSTEPS])
    fout = np.zeros((n, NF))
    sout = np.zeros((n, NS), dtype=np.int64)
    rec = np.full((n, nrec, 4), np.nan)
    oseg = geo[1]
    for i in range(n):
        us, ns = new_stream(seed, pids[i])
        fs = np.zeros(NF)
        st = np.zeros(NS, dtype=np.int64)
        fs[F_X] = x0[0]
        fs[F_Y] = x0[1]
        st[S_REGION] = region0
        fs[F_ZETA] = kill_threshold(prm[P_CKILL], exp1(us))
        if region0 < 0:
            st[S_CAUSE] = ABSORBED
            st[S_REGION] = 1
        r = 0
        while st[S_CAUSE] == RUNNING:
            while r < nrec and rec_steps[r] <= st[S_STEP]:
                rec[i, r, 0] = fs[F_X]
                rec[i, r, 1] = fs[F_Y]
                rec[i, r, 2] = st[S_REGION]
                rec[i, r, 3] = fs[F_LSYM]
                r += 1
            if st[S_STEP] >= nsteps:
                st[S_CAUSE] = HORIZON
                fs[F_LIFE] = nsteps * h
                break
            kmax = nsteps - st[S_STEP]
            if r < nrec and rec_steps[r] - st[S_STEP] < kmax:
                kmax = rec_steps[r] - st[S_STEP]
            advance(fs, st, us, ns, geo, prm, fr, fmeta, kmax, True)
        while r < nrec:
            rec[i, r, 3] = fs[F_LSYM]
            r += 1
        fout[i] = fs
        sout[i] = st
    return fout, sout, rec
