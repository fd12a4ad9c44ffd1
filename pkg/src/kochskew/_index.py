"""Spatial acceleration structures for the planar path kernel.

* a uniform grid of cells, each listing the interface and roof segments whose
  bounding boxes meet it (CSR layout);
* two distance fields giving lower bounds on the distance to the interface:
  a coarse one over the whole box and a fine band-limited one near the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _seg_dist(px, py, x0, y0, x1, y1):
    dx = x1 - x0
    dy = y1 - y0
    l2 = dx * dx + dy * dy
    u = ((px - x0) * dx + (py - y0) * dy) / l2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    fx = x0 + u * dx - px
    fy = y0 + u * dy - py
    return math.sqrt(fx * fx + fy * fy)


@njit(cache=True)
def _coarse_field(seg, x0, y0, dg, nx, ny):
    out = np.empty((nx, ny))
    for i in range(nx):
        px = x0 + i * dg
        for j in range(ny):
            py = y0 + j * dg
            best = np.inf
            for k in range(seg.shape[0]):
                d = _seg_dist(px, py, seg[k, 0], seg[k, 1], seg[k, 2], seg[k, 3])
                if d < best:
                    best = d
            out[i, j] = best
    return out


@njit(cache=True)
def _band_field(seg, x0, y0, dg, nx, ny, width):
    out = np.full((nx, ny), np.float32(width))
    for k in range(seg.shape[0]):
        ax, ay, bx, by = seg[k, 0], seg[k, 1], seg[k, 2], seg[k, 3]
        i0 = max(0, int((min(ax, bx) - width - x0) / dg))
        i1 = min(nx - 1, int((max(ax, bx) + width - x0) / dg) + 1)
        j0 = max(0, int((min(ay, by) - width - y0) / dg))
        j1 = min(ny - 1, int((max(ay, by) + width - y0) / dg) + 1)
        for i in range(i0, i1 + 1):
            px = x0 + i * dg
            for j in range(j0, j1 + 1):
                py = y0 + j * dg
                d = _seg_dist(px, py, ax, ay, bx, by)
                if d < out[i, j]:
                    out[i, j] = d
    return out


def _csr(seg: np.ndarray, x0: float, y0: float, g: float, nx: int, ny: int):
    lists = [[] for _ in range(nx * ny)]
    lo = np.minimum(seg[:, :2], seg[:, 2:])
    hi = np.maximum(seg[:, :2], seg[:, 2:])
    i0 = np.clip(((lo[:, 0] - x0) / g).astype(int), 0, nx - 1)
    i1 = np.clip(((hi[:, 0] - x0) / g).astype(int), 0, nx - 1)
    j0 = np.clip(((lo[:, 1] - y0) / g).astype(int), 0, ny - 1)
    j1 = np.clip(((hi[:, 1] - y0) / g).astype(int), 0, ny - 1)
    for k in range(len(seg)):
        for i in range(i0[k], i1[k] + 1):
            for j in range(j0[k], j1[k] + 1):
                lists[i * ny + j].append(k)
    start = np.zeros(nx * ny + 1, dtype=np.int64)
    start[1:] = np.cumsum([len(a) for a in lists])
    idx = np.array([k for a in lists for k in a], dtype=np.int64)
    return start, idx


@dataclass(frozen=True)
class SpatialIndex:
    iseg: np.ndarray
    oseg: np.ndarray
    gmeta: np.ndarray       # x0, y0, G, nx, ny
    istart: np.ndarray
    iidx: np.ndarray
    ostart: np.ndarray
    oidx: np.ndarray
    dfc: np.ndarray
    dfc_meta: np.ndarray    # x0, y0, dg, nx, ny
    dff: np.ndarray
    dff_meta: np.ndarray    # x0, y0, dg, nx, ny, width

    def as_tuple(self):
        return (self.iseg, self.oseg, self.gmeta, self.istart, self.iidx, self.ostart, self.oidx,
                self.dfc, self.dfc_meta, self.dff, self.dff_meta)


def build_index(domain, h: float | None = None) -> SpatialIndex:
    iseg = np.ascontiguousarray(domain.interface_segments, dtype=float)
    oseg = np.ascontiguousarray(domain.outer_segments, dtype=float)
    seg_len = domain.alpha ** (-domain.level)
    sh = math.sqrt(h) if h else seg_len / 12.0
    g = max(12.0 * sh, 1e-3)
    lo, hi = domain.bounding_box(pad=2 * g)
    nx = int(math.ceil((hi[0] - lo[0]) / g)) + 1
    ny = int(math.ceil((hi[1] - lo[1]) / g)) + 1
    istart, iidx = _csr(iseg, lo[0], lo[1], g, nx, ny)
    ostart, oidx = _csr(oseg, lo[0], lo[1], g, nx, ny)
    gmeta = np.array([lo[0], lo[1], g, nx, ny], dtype=float)
    # coarse field
    dgc = 0.01
    cnx = int(math.ceil((hi[0] - lo[0]) / dgc)) + 2
    cny = int(math.ceil((hi[1] - lo[1]) / dgc)) + 2
    dfc = _coarse_field(iseg, lo[0], lo[1], dgc, cnx, cny)
    # fine band field
    dgf = max(2.0 * sh, 2.5e-4)
    width = 3.0 * dgc
    fnx = int(math.ceil((hi[0] - lo[0]) / dgf)) + 2
    fny = int(math.ceil((hi[1] - lo[1]) / dgf)) + 2
    dff = _band_field(iseg, lo[0], lo[1], dgf, fnx, fny, width)
    return SpatialIndex(iseg, oseg, gmeta, istart, iidx, ostart, oidx,
                        dfc, np.array([lo[0], lo[1], dgc, cnx, cny], dtype=float),
                        dff, np.array([lo[0], lo[1], dgf, fnx, fny, width], dtype=float))
