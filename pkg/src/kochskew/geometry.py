"""Koch pre-fractal snowflakes, their fiber layers and boundary quadratures.

Points are handled as complex numbers internally and exposed as (x, y) float
arrays. The base triangle is A=(0,0), B=(1,0), C=(1/2,-sqrt(3)/2); its sides
A->B, B->C, C->A run clockwise, so the exterior lies to the left of every
directed boundary segment and the Koch bumps point outward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, GeometryError, ParameterError

SQRT3 = math.sqrt(3.0)
TRIANGLE = (0.0 + 0.0j, 1.0 + 0.0j, 0.5 - 0.5j * SQRT3)
SIDES = ((TRIANGLE[0], TRIANGLE[1]), (TRIANGLE[1], TRIANGLE[2]), (TRIANGLE[2], TRIANGLE[0]))

REGIONS = ("InteriorOmega", "Fiber", "Outside", "OnInterface", "OnOuterBoundary")


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (2.0 < alpha < 4.0) or not math.isfinite(alpha):
        raise ParameterError(f"alpha={alpha} outside the open range (2, 4)")
    return alpha


def koch_angle(alpha: float) -> float:
    """theta(alpha) = arcsin(sqrt(alpha (4 - alpha)) / 2)."""
    alpha = check_alpha(alpha)
    return math.asin(math.sqrt(alpha * (4.0 - alpha)) / 2.0)


def max_fiber_b(alpha: float) -> float:
    """Largest admissible fiber aspect b = tan(theta/2)."""
    return math.tan(koch_angle(alpha) / 2.0)


def fractal_dimension(alpha: float) -> float:
    return math.log(4.0) / math.log(check_alpha(alpha))


def sigma_n(alpha: float, n: int) -> float:
    return (float(alpha) / 4.0) ** n


@dataclass(frozen=True)
class IfsSimilitude:
    """Orientation-preserving similitude z -> scale * e^{i rotation} z + translation."""

    scale: float
    rotation: float
    translation: tuple[float, float]

    @property
    def linear(self) -> complex:
        return self.scale * complex(math.cos(self.rotation), math.sin(self.rotation))

    @property
    def offset(self) -> complex:
        return complex(*self.translation)

    def __call__(self, z):
        return self.linear * np.asarray(z, dtype=complex) + self.offset

    def compose(self, other: "IfsSimilitude") -> "IfsSimilitude":
        """Return self o other."""
        off = self.linear * other.offset + self.offset
        return IfsSimilitude(self.scale * other.scale, self.rotation + other.rotation,
                             (off.real, off.imag))


def build_similitudes(alpha: float) -> tuple[IfsSimilitude, ...]:
    alpha = check_alpha(alpha)
    th = koch_angle(alpha)
    s = 1.0 / alpha
    apex_y = math.sqrt(1.0 / alpha - 0.25)
    return (
        IfsSimilitude(s, 0.0, (0.0, 0.0)),
        IfsSimilitude(s, th, (s, 0.0)),
        IfsSimilitude(s, -th, (0.5, apex_y)),
        IfsSimilitude(s, 0.0, (1.0 - s, 0.0)),
    )


def _refine_unit(unit: np.ndarray, maps) -> np.ndarray:
    parts = [m(unit)[:-1] for m in maps[:3]]
    parts.append(maps[3](unit))
    return np.concatenate(parts)


def _unit_curve(alpha: float, n: int) -> np.ndarray:
    maps = build_similitudes(alpha)
    z = np.array([0.0, 1.0], dtype=complex)
    for _ in range(n):
        z = _refine_unit(z, maps)
    return z


def word_of(index: int, n: int) -> str:
    """Base-4 address i_1...i_n (digits 1..4) of the index-th level-n piece of a side."""
    digits = []
    for _ in range(n):
        index, r = divmod(index, 4)
        digits.append(str(r + 1))
    return "".join(reversed(digits))


def _as_xy(z: np.ndarray) -> np.ndarray:
    return np.stack([z.real, z.imag], axis=-1)


@dataclass(frozen=True, eq=False)
class PrefractalBoundary:
    """Closed polyline K^n on the three sides of the base triangle."""

    level: int
    alpha: float
    unit: np.ndarray  # complex vertices of the level-n curve on [0, 1]

    @classmethod
    def build(cls, alpha: float, n: int) -> "PrefractalBoundary":
        if n < 0:
            raise ParameterError("level must be >= 0")
        return cls(int(n), check_alpha(alpha), _unit_curve(alpha, n))

    @cached_property
    def side_vertices(self) -> list[np.ndarray]:
        """3 arrays of shape (4^n + 1, 2), ordered along each side."""
        return [_as_xy(p + (q - p) * self.unit) for p, q in SIDES]

    @cached_property
    def ring(self) -> np.ndarray:
        """Closed ring without repeated last vertex, shape (3*4^n, 2)."""
        return np.concatenate([v[:-1] for v in self.side_vertices])

    @cached_property
    def segments(self) -> np.ndarray:
        """(3*4^n, 4) array of x0, y0, x1, y1, ordered by address."""
        r = self.ring
        return np.hstack([r, np.roll(r, -1, axis=0)])

    @property
    def n_segments(self) -> int:
        return 3 * 4 ** self.level

    @property
    def segment_length(self) -> float:
        return self.alpha ** (-self.level)

    def address(self, k: int) -> tuple[int, str]:
        per = 4 ** self.level
        return k // per + 1, word_of(k % per, self.level)

    def arclength(self) -> float:
        s = self.segments
        return math.fsum(np.hypot(s[:, 2] - s[:, 0], s[:, 3] - s[:, 1]))


def refine(curve: PrefractalBoundary) -> PrefractalBoundary:
    """K^{n+1} = union of psi_i(K^n), applied to the unit-side curve."""
    maps = build_similitudes(curve.alpha)
    return PrefractalBoundary(curve.level + 1, curve.alpha, _refine_unit(curve.unit, maps))


@dataclass(frozen=True)
class FiberCell:
    side: int
    address: str
    triangle: np.ndarray  # rows: base start, base end, apex


# ---------------------------------------------------------------- polygon tools

def point_segment_distance(px, py, seg):
    """Distances from points (broadcast) to segments; returns (dist, u) with u the clamped parameter."""
    x0, y0, x1, y1 = seg[..., 0], seg[..., 1], seg[..., 2], seg[..., 3]
    dx, dy = x1 - x0, y1 - y0
    l2 = dx * dx + dy * dy
    u = ((px - x0) * dx + (py - y0) * dy) / l2
    u = np.clip(u, 0.0, 1.0)
    fx, fy = x0 + u * dx, y0 + u * dy
    return np.hypot(px - fx, py - fy), u


def winding_number(points: np.ndarray, ring: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Winding number of each point w.r.t. a closed ring (half-open edge rule)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x0, y0 = ring[:, 0], ring[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.zeros(len(pts), dtype=np.int64)
    for s in range(0, len(pts), chunk):
        px = pts[s:s + chunk, 0:1]
        py = pts[s:s + chunk, 1:2]
        cross = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
        up = (y0 <= py) & (y1 > py) & (cross > 0)
        down = (y0 > py) & (y1 <= py) & (cross < 0)
        out[s:s + chunk] = up.sum(axis=1) - down.sum(axis=1)
    return out


def _sat_overlap(t1: np.ndarray, t2: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized separating-axis test; True where triangle interiors intersect."""
    overlap = np.ones(t1.shape[0], dtype=bool)
    for tri in (t1, t2):
        for e in range(3):
            ex = tri[:, (e + 1) % 3, 0] - tri[:, e, 0]
            ey = tri[:, (e + 1) % 3, 1] - tri[:, e, 1]
            nx, ny = -ey, ex
            p1 = t1[:, :, 0] * nx[:, None] + t1[:, :, 1] * ny[:, None]
            p2 = t2[:, :, 0] * nx[:, None] + t2[:, :, 1] * ny[:, None]
            scale = np.hypot(nx, ny)
            sep = (p1.max(1) <= p2.min(1) + tol * scale) | (p2.max(1) <= p1.min(1) + tol * scale)
            overlap &= ~sep
    return overlap


def overlapping_cells(cells: np.ndarray, tol: float, exhaustive: bool = False):
    """First pair (i, j) of cells with intersecting interiors, or None.

    The default path prunes with a bounding-box sweep; `exhaustive` tests every
    pair and is used as an independent check.
    """
    m = len(cells)
    if exhaustive:
        ii, jj = np.triu_indices(m, k=1)
        for s in range(0, len(ii), 200000):
            a, b = ii[s:s + 200000], jj[s:s + 200000]
            hit = _sat_overlap(cells[a], cells[b], tol)
            if hit.any():
                k = int(np.argmax(hit))
                return int(a[k]), int(b[k])
        return None
    lo = cells.min(axis=1)
    hi = cells.max(axis=1)
    order = np.argsort(lo[:, 0], kind="stable")
    pairs_a, pairs_b = [], []
    for pos, i in enumerate(order):
        j = order[pos + 1:]
        j = j[lo[j, 0] < hi[i, 0] - tol]
        if len(j) == 0:
            continue
        j = j[(lo[j, 1] < hi[i, 1] - tol) & (hi[j, 1] > lo[i, 1] + tol)]
        pairs_a.append(np.full(len(j), i))
        pairs_b.append(j)
    if not pairs_a:
        return None
    a = np.concatenate(pairs_a)
    b = np.concatenate(pairs_b)
    if len(a) == 0:
        return None
    hit = _sat_overlap(cells[a], cells[b], tol)
    if hit.any():
        k = np.flatnonzero(hit)
        pairs = sorted((min(a[q], b[q]), max(a[q], b[q])) for q in k)
        return int(pairs[0][0]), int(pairs[0][1])
    return None


# ---------------------------------------------------------------- domain model

class DomainModel:
    """Snowflake Omega^n, its fiber layer Sigma^n and the composite Omega^n_eps.

    Immutable after construction. Interface segments, fiber cells and roof
    edges are all stored in address order.
    """

    def __init__(self, boundary: PrefractalBoundary, b: float):
        self.boundary = boundary
        self.alpha = boundary.alpha
        self.level = boundary.level
        self.b = float(b)
        self.theta = koch_angle(self.alpha)
        self.sigma_n = sigma_n(self.alpha, self.level)
        seg = boundary.segments
        p = seg[:, 0] + 1j * seg[:, 1]
        q = seg[:, 2] + 1j * seg[:, 3]
        apex = p + (q - p) * complex(0.5, 0.5 * self.b)
        self.cells = np.stack([_as_xy(p), _as_xy(q), _as_xy(apex)], axis=1)
        for arr in (self.cells,):
            arr.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def interface_segments(self) -> np.ndarray:
        return self.boundary.segments

    @cached_property
    def outer_ring(self) -> np.ndarray:
        """Roof polyline of Omega^n_eps: base start, apex for every cell in order."""
        c = self.cells
        ring = np.empty((2 * len(c), 2))
        ring[0::2] = c[:, 0]
        ring[1::2] = c[:, 2]
        return ring

    @cached_property
    def outer_segments(self) -> np.ndarray:
        r = self.outer_ring
        return np.hstack([r, np.roll(r, -1, axis=0)])

    @property
    def cell_height(self) -> float:
        return 0.5 * self.b * self.alpha ** (-self.level)

    @property
    def max_weight(self) -> float:
        return 3.0 * self.cell_height / (3.0 + self.b ** 2)

    def cell(self, k: int) -> FiberCell:
        side, word = self.boundary.address(k)
        return FiberCell(side, word, np.array(self.cells[k]))

    @property
    def fiber(self) -> list[FiberCell]:
        return [self.cell(k) for k in range(self.n_cells)]

    def bounding_box(self, pad: float = 0.0):
        r = self.outer_ring
        lo = r.min(axis=0) - pad
        hi = r.max(axis=0) + pad
        return lo, hi

    @cached_property
    def area_omega(self) -> float:
        r = self.boundary.ring
        x, y = r[:, 0], r[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))

    def index(self, h: float | None = None):
        """Spatial index used by the path kernels (cached per resolution)."""
        from ._index import build_index
        key = "_index_cache"
        cache = self.__dict__.setdefault(key, {})
        hk = None if h is None else float(h)
        if hk not in cache:
            cache[hk] = build_index(self, hk)
        return cache[hk]

    def __repr__(self):
        return f"DomainModel(alpha={self.alpha}, level={self.level}, b={self.b:.6g})"


def build_domain(alpha: float, n: int, b: float | None = None) -> DomainModel:
    alpha = check_alpha(alpha)
    if int(n) != n or n < 1:
        raise ParameterError(f"level n={n} must be an integer >= 1")
    bmax = max_fiber_b(alpha)
    if b is None:
        b = bmax
    b = float(b)
    if not (b > 0.0) or not math.isfinite(b):
        raise ParameterError(f"fiber aspect b={b} must be positive")
    dom = DomainModel(PrefractalBoundary.build(alpha, int(n)), b)
    if b > bmax * (1.0 + 1e-12):
        pair = overlapping_cells(dom.cells, 1e-10 * alpha ** (-n))
        where = "" if pair is None else (
            f"; cells {dom.boundary.address(pair[0])} and {dom.boundary.address(pair[1])} overlap")
        raise GeometryError(f"b={b} exceeds open-set bound tan(theta/2)={bmax:.12g}{where}")
    return dom


# ---------------------------------------------------------------- queries

def project_to_interface(point, domain: DomainModel):
    """Nearest point of the polyline boundary of Omega^n.

    Returns (foot (2,), (side, word) address, distance). Ties go to the lowest address.
    """
    px, py = (float(v) for v in point)
    seg = domain.interface_segments
    d, u = point_segment_distance(px, py, seg)
    dmin = d.min()
    k = int(np.flatnonzero(d <= dmin + 1e-13 * max(1.0, dmin))[0])
    s = seg[k]
    foot = np.array([s[0] + u[k] * (s[2] - s[0]), s[1] + u[k] * (s[3] - s[1])])
    return foot, domain.boundary.address(k), float(d[k])


def _distance_to(points, seg):
    pts = np.atleast_2d(points)
    out = np.empty(len(pts))
    for i, (x, y) in enumerate(pts):
        out[i] = point_segment_distance(x, y, seg)[0].min()
    return out


def locate_cells(points, domain: DomainModel, tol: float = 0.0) -> np.ndarray:
    """Index of a fiber cell containing each point (closed triangles, -1 if none)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = domain.cells
    a, bq, cq = c[:, 0], c[:, 1], c[:, 2]
    out = np.full(len(pts), -1, dtype=np.int64)
    scale = domain.alpha ** (-domain.level)
    for i, (x, y) in enumerate(pts):
        # cells are counter-clockwise (apex to the left of the base)
        e = -tol * scale
        s1 = (bq[:, 0] - a[:, 0]) * (y - a[:, 1]) - (bq[:, 1] - a[:, 1]) * (x - a[:, 0])
        s2 = (cq[:, 0] - bq[:, 0]) * (y - bq[:, 1]) - (cq[:, 1] - bq[:, 1]) * (x - bq[:, 0])
        s3 = (a[:, 0] - cq[:, 0]) * (y - cq[:, 1]) - (a[:, 1] - cq[:, 1]) * (x - cq[:, 0])
        inside = np.flatnonzero((s1 >= e * scale) & (s2 >= e * scale) & (s3 >= e * scale))
        if len(inside):
            out[i] = inside[0]
    return out


def classify(point, domain: DomainModel, tol: float):
    """Region label of a point, or an array of labels for an (K, 2) input."""
    if not tol > 0:
        raise ParameterError("tol must be positive")
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if not np.all(np.isfinite(pts)):
        raise ParameterError("non-finite coordinates")
    d_int = _distance_to(pts, domain.interface_segments)
    d_out = _distance_to(pts, domain.outer_segments)
    inside = winding_number(pts, domain.boundary.ring) != 0
    in_eps = winding_number(pts, domain.outer_ring) != 0
    labels = np.empty(len(pts), dtype=object)
    for i in range(len(pts)):
        if d_int[i] < tol:
            labels[i] = "OnInterface"
        elif d_out[i] < tol:
            labels[i] = "OnOuterBoundary"
        elif inside[i]:
            labels[i] = "InteriorOmega"
        elif in_eps[i]:
            labels[i] = "Fiber"
        else:
            labels[i] = "Outside"
    return labels[0] if single else labels


@dataclass(frozen=True)
class WeightField:
    """w^n: 1 on the closure of Omega^n, 3|P - P_perp|/(3 + b^2) on a fiber cell."""

    domain: DomainModel

    def trace(self, k: int, u):
        """Fiber-side weight at parameter u in [0, 1] along interface segment k."""
        d = self.domain
        length = d.alpha ** (-d.level)
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        height = d.b * length * np.minimum(u, 1.0 - u)
        return 3.0 * height / (3.0 + d.b ** 2)

    def __call__(self, x):
        return weight_at(x, self)


def weight_at(x, w: WeightField) -> float:
    dom = w.domain
    x = np.asarray(x, dtype=float)
    scale = dom.alpha ** (-dom.level)
    tol = 1e-12 * scale
    if winding_number(x[None, :], dom.boundary.ring)[0] != 0:
        return 1.0
    if _distance_to(x[None, :], dom.interface_segments)[0] <= tol:
        return 1.0
    k = int(locate_cells(x[None, :], dom, tol=1e-12)[0])
    if k < 0:
        raise DomainError(f"point {x.tolist()} lies outside Omega^n_eps")
    p, q = dom.cells[k, 0], dom.cells[k, 1]
    t = q - p
    u = float(np.dot(x - p, t) / np.dot(t, t))
    return float(w.trace(k, u))


# ---------------------------------------------------------------- quadratures

def _field_values(g, x, y) -> np.ndarray:
    vals = np.asarray(g(x, y), dtype=float)
    return np.broadcast_to(vals, x.shape)


def arclength_quadrature(g, domain: DomainModel) -> float:
    """sigma_n * sum_segments g(midpoint) * alpha^{-n}; each segment weighs 4^{-n}."""
    seg = domain.interface_segments
    mx = 0.5 * (seg[:, 0] + seg[:, 2])
    my = 0.5 * (seg[:, 1] + seg[:, 3])
    vals = _field_values(g, mx, my)
    return math.fsum(vals) * 4.0 ** (-domain.level)


def selfsimilar_nodes(alpha: float, level: int, node: complex = 0.5 + 0.0j) -> np.ndarray:
    """psi_w(node) for all words w of the given length, on the unit side, in address order."""
    maps = build_similitudes(alpha)
    z = np.array([node], dtype=complex)
    for _ in range(level):
        z = np.concatenate([m(z) for m in maps])
    return z


def selfsimilar_barycenter(alpha: float) -> complex:
    """Barycenter of the self-similar probability measure on the unit Koch side."""
    maps = build_similitudes(alpha)
    a = sum(m.linear for m in maps) / 4.0
    t = sum(m.offset for m in maps) / 4.0
    return t / (1.0 - a)


def selfsimilar_quadrature(g, level: int, alpha: float = 3.0, node: str = "base-midpoint",
                           chunk_level: int = 8) -> float:
    """Sum over all 3*4^N addresses of 4^{-N} g(cell representative point).

    node: "base-midpoint" uses psi_w(1/2); "barycenter" uses psi_w of the
    measure barycenter, which integrates affine g exactly at every level.
    """
    if level < 1:
        raise ParameterError("level must be >= 1")
    alpha = check_alpha(alpha)
    if node == "base-midpoint":
        z0 = 0.5 + 0.0j
    elif node == "barycenter":
        z0 = selfsimilar_barycenter(alpha)
    else:
        raise ParameterError(f"unknown node rule {node!r}")
    inner = min(level, chunk_level)
    tail = selfsimilar_nodes(alpha, inner, z0)
    maps = build_similitudes(alpha)
    # prefixes of length level - inner as composed similitudes (linear, offset)
    lin = np.array([1.0 + 0.0j])
    off = np.array([0.0 + 0.0j])
    for _ in range(level - inner):
        lin = np.concatenate([m.linear * lin for m in maps])
        off = np.concatenate([m.linear * off + m.offset for m in maps])
    # the outer map of a word is applied last, so prefixes compose as psi_{i1} o ... ;
    # building lin/off by left-multiplication above enumerates words in reversed
    # digit order, which does not affect the sum.
    partial = []
    for p, q in SIDES:
        for a, t in zip(lin, off):
            z = p + (q - p) * (a * tail + t)
            partial.append(math.fsum(_field_values(g, z.real, z.imag)))
    return math.fsum(partial) * 4.0 ** (-level)


# ---------------------------------------------------------------- export

def vertex_rings_text(domain: DomainModel) -> str:
    """Plain-text rings: '# <name>' header then one 'x y' pair per line, blank line between rings."""
    out = []
    for name, ring in (("interface", domain.boundary.ring), ("outer", domain.outer_ring)):
        out.append(f"# {name} {len(ring)}")
        out.extend(f"{x:.15g} {y:.15g}" for x, y in ring)
        out.append("")
    return "\n".join(out)


def svg_sketch(domain: DomainModel, size: int = 640) -> str:
    lo, hi = domain.bounding_box(pad=0.05)
    span = float(max(hi - lo))
    k = size / span

    def pts(ring):
        return " ".join(f"{(x - lo[0]) * k:.3f},{(hi[1] - y) * k:.3f}" for x, y in ring)

    cells = "".join(
        f'<polygon points="{pts(c)}" fill="#f2c14e" stroke="#b07d12" stroke-width="0.3"/>'
        for c in domain.cells)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
        f'<polygon points="{pts(domain.outer_ring)}" fill="none" stroke="#444" stroke-width="0.6"/>'
        f'{cells}'
        f'<polygon points="{pts(domain.boundary.ring)}" fill="#9cc3e6" stroke="#1f4e79" stroke-width="0.6"/>'
        f"</svg>\n")
