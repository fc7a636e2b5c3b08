"""Scale and angle decomposition of the weighted spherical average, and the
dual geometry of the sets ``P(y)``.

Notation (n = 2):

* shell ``k`` of x: ``2^k <= delta(x) < 2^(k+1)``;
* band ``j`` of a point y on the circle dB(x, delta(x)): the chord ratio
  ``c = |y - b_x| / delta(x)`` lies in ``(2^-j, 2^(-j+1)]``.  With ``beta``
  the angle at x between ``b_x - x`` and ``y - x``, ``c = 2 sin(beta / 2)``,
  so band j is ``beta`` in ``(2 asin(2^(-j-1)), 2 asin(min(1, 2^-j))]`` on
  both sides of the direction to b_x;
* ``S_jk f(x)`` is the arc-length integral of f over band j when x is in
  shell k, and zero otherwise;
* ``E(y) = {x : |x - y| <= delta(x)}`` is convex with boundary
  ``P(y) = {x : |x - y| = delta(x)}``.  On P(y) the shell index of x equals
  the dyadic annulus index of ``|x - y|``, which drives the multiscale
  extraction below.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from skimage import measure

from .errors import DomainError, ParameterError
from .fields import ScalarField, sphere_integral
from .geometry import Domain, GridSpec, nearest_boundary
from .maximal import N_DIM, weighted_spherical_B

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# indices
# --------------------------------------------------------------------------

def shell_index(delta: float) -> int:
    """The k with 2^k <= delta < 2^(k+1), computed exactly from the binary exponent."""
    if not delta > 0 or not math.isfinite(delta):
        raise ParameterError("shell index needs a positive finite distance")
    _, e = math.frexp(delta)
    return e - 1


def chord_band(ratio: float) -> int:
    """The j >= 0 with 2^-j < ratio <= 2^(-j+1); ratio must lie in (0, 2]."""
    if not 0 < ratio <= 2.0 + 1e-12:
        raise ParameterError(f"chord ratio {ratio} outside (0, 2]")
    if ratio > 2.0:
        ratio = 2.0
    m, e = math.frexp(ratio)
    return 2 - e if m == 0.5 else 1 - e


def shell_indices(delta: np.ndarray) -> np.ndarray:
    _, e = np.frexp(np.asarray(delta, float))
    return e - 1


def chord_bands(ratio: np.ndarray) -> np.ndarray:
    r = np.minimum(np.asarray(ratio, float), 2.0)
    m, e = np.frexp(r)
    return np.where(m == 0.5, 2 - e, 1 - e)


def band_angles(j: int) -> Tuple[float, float]:
    """(beta_lo, beta_hi] of band j."""
    if j < 0:
        raise ParameterError("band index must be non-negative")
    lo = 2.0 * math.asin(2.0 ** (-j - 1))
    hi = 2.0 * math.asin(min(1.0, 2.0 ** (-j)))
    return lo, hi


def band_arc_length(j: int, delta: float) -> float:
    lo, hi = band_angles(j)
    return 2.0 * delta * (hi - lo)


# --------------------------------------------------------------------------
# sectors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorSpec:
    """Band j on the circle dB(x, delta) as angle intervals (a, b), a < b."""

    x: tuple
    j: int
    delta: float
    b: tuple
    intervals: tuple
    unique: bool = True

    @property
    def arc_length(self) -> float:
        return self.delta * sum(b - a for a, b in self.intervals)

    def contains_angle(self, theta) -> np.ndarray:
        th = np.asarray(theta, float)
        out = np.zeros(th.shape, bool)
        for a, b in self.intervals:
            t = a + np.mod(th - a, TWO_PI)
            out |= (t > a) & (t <= b)
        return out


def angular_sector(dom: Domain, x, j: int) -> SectorSpec:
    """Band j around x; ``unique`` is False when b_x is a tie-break choice."""
    x = np.asarray(x, float)
    c = nearest_boundary(dom, x)
    phi = math.atan2(c.b[1] - x[1], c.b[0] - x[0])
    lo, hi = band_angles(j)
    if j == 0:
        intervals = ((phi + lo, phi + TWO_PI - lo),)
    else:
        intervals = ((phi + lo, phi + hi), (phi - hi, phi - lo))
    return SectorSpec(tuple(x), j, c.delta, tuple(c.b), intervals, c.unique)


def S_jk(f: ScalarField, x, j: int, k: int, n_theta: int = 4096,
         sector: Optional[SectorSpec] = None) -> float:
    """Arc-length integral of f over band j of x when x lies in shell k."""
    x = np.asarray(x, float)
    sec = sector if sector is not None else angular_sector(f.domain, x, j)
    if shell_index(sec.delta) != k:
        return 0.0
    return sphere_integral(f, x, sec.delta, intervals=sec.intervals, n_theta=n_theta,
                           split_at_jumps=True)


@dataclass(frozen=True)
class Reconstruction:
    total: float
    ratio_to_B: float
    band0_term: float
    B: float
    terms: tuple


def reconstruct_B(f: ScalarField, x, alpha: float, j_max: int = 20,
                  k_window: Optional[Sequence[int]] = None,
                  n_theta: int = 4096) -> Reconstruction:
    """sum_k sum_{j=1..j_max} 2^(k(alpha - n) - j) S_jk f(x) and its ratio to B_alpha f(x).

    Only the shell of x contributes.  The band j = 0 term (weight 2^(k(alpha-n)))
    is reported separately; it is not part of the sum.
    """
    x = np.asarray(x, float)
    c = nearest_boundary(f.domain, x)
    k = shell_index(c.delta)
    ks = [k] if k_window is None else [kk for kk in k_window if kk == k]
    terms = []
    total = 0.0
    for kk in ks:
        for j in range(1, j_max + 1):
            s = S_jk(f, x, j, kk, n_theta)
            t = 2.0 ** (kk * (alpha - N_DIM) - j) * s
            terms.append((j, kk, t))
            total += t
    band0 = 2.0 ** (k * (alpha - N_DIM)) * S_jk(f, x, 0, k, n_theta) if ks else 0.0
    B = weighted_spherical_B(f, x, alpha, n_theta).value
    ratio = total / B if B != 0 else (0.0 if total == 0 else math.inf)
    return Reconstruction(total, ratio, band0, B, tuple(terms))


# --------------------------------------------------------------------------
# the convex bodies E(y) and their boundaries P(y)
# --------------------------------------------------------------------------

def E_membership(dom: Domain, y, x) -> np.ndarray:
    """x in Omega and |x - y| <= delta(x) (vectorized in x)."""
    x = np.asarray(x, float)
    d = dom.delta(x)
    return dom.contains(x) & (np.linalg.norm(x - np.asarray(y, float), axis=-1) <= d)


def _g(dom: Domain, y, x) -> np.ndarray:
    """|x - y| - delta(x) with delta = 0 outside the domain."""
    return np.linalg.norm(np.asarray(x, float) - y, axis=-1) - dom.delta(x)


@dataclass
class ConvexBodyProbe:
    """Extracted boundary of E(y) as a set of short segments.

    ``segments`` has shape (m, 2, 2); ``labels`` holds the (j, k) of each
    segment; ``h`` is the coarsest grid spacing used.
    """

    domain: Domain
    y: np.ndarray
    segments: np.ndarray
    labels: np.ndarray
    h: float
    low_resolution: bool = False
    _ordered: Optional[np.ndarray] = field(default=None, repr=False)

    def member(self, x) -> np.ndarray:
        return E_membership(self.domain, self.y, x)

    @property
    def points(self) -> np.ndarray:
        """Segment endpoints ordered by angle around y, de-duplicated."""
        if self._ordered is None:
            p = self.segments.reshape(-1, 2)
            if len(p) == 0:
                self._ordered = p
            else:
                ang = np.arctan2(p[:, 1] - self.y[1], p[:, 0] - self.y[0])
                order = np.argsort(ang, kind="mergesort")
                p = p[order]
                keep = np.ones(len(p), bool)
                keep[1:] = np.linalg.norm(np.diff(p, axis=0), axis=1) > 1e-3 * self.h
                self._ordered = p[keep]
        return self._ordered

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)

    def residuals(self) -> np.ndarray:
        """| |x - y| - delta(x) | at segment endpoints and midpoints."""
        if len(self.segments) == 0:
            return np.empty(0)
        pts = np.concatenate([self.segments.reshape(-1, 2), self.segments.mean(axis=1)])
        return np.abs(_g(self.domain, self.y, pts))

    def measure(self, j: int, k: int) -> float:
        m = (self.labels[:, 0] == j) & (self.labels[:, 1] == k)
        return float(math.fsum(self.lengths[m].tolist()))

    def table(self) -> Dict[Tuple[int, int], float]:
        out: Dict[Tuple[int, int], float] = {}
        for (j, k), L in zip(map(tuple, self.labels), self.lengths):
            out[(int(j), int(k))] = out.get((int(j), int(k)), 0.0) + float(L)
        return out

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "y0", "x1", "y1", "j", "k"])
            for s, (j, k) in zip(self.segments, self.labels):
                w.writerow([f"{s[0, 0]:.10g}", f"{s[0, 1]:.10g}", f"{s[1, 0]:.10g}",
                            f"{s[1, 1]:.10g}", int(j), int(k)])
        return path


def _contour_segments(dom: Domain, y, lo, hi, h) -> np.ndarray:
    """Zero set of g on a grid of spacing ~h over the box [lo, hi], with every
    vertex moved onto the exact zero of g along its grid edge by bisection."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    n = np.maximum(np.ceil((hi - lo) / h).astype(int), 2) + 1
    xs = np.linspace(lo[0], hi[0], n[0])
    ys = np.linspace(lo[1], hi[1], n[1])
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X, Y], -1)
    G = _g(dom, y, pts)
    segs = []
    for cont in measure.find_contours(G, 0.0):
        if len(cont) < 2:
            continue
        r, c = cont[:, 0], cont[:, 1]
        # a vertex lies on a horizontal (integral row) or vertical edge
        on_row = np.abs(r - np.round(r)) < 1e-9
        r0 = np.where(on_row, np.round(r), np.floor(r)).astype(int)
        c0 = np.where(on_row, np.floor(c), np.round(c)).astype(int)
        r0 = np.clip(r0, 0, n[1] - 1)
        c0 = np.clip(c0, 0, n[0] - 1)
        r1 = np.clip(np.where(on_row, r0, r0 + 1), 0, n[1] - 1)
        c1 = np.clip(np.where(on_row, c0 + 1, c0), 0, n[0] - 1)
        a = pts[r0, c0]
        b = pts[r1, c1]
        ga = G[r0, c0]
        verts = _bisect_edges(dom, y, a, b, ga, r, c, xs, ys)
        segs.append(np.stack([verts[:-1], verts[1:]], axis=1))
    if not segs:
        return np.empty((0, 2, 2))
    return np.concatenate(segs)


def _bisect_edges(dom, y, a, b, ga, r, c, xs, ys, iters: int = 40):
    """Refine points on segments [a, b] where g changes sign; fall back to the
    interpolated contour position when there is no sign change."""
    interp = np.stack([np.interp(c, np.arange(len(xs)), xs),
                       np.interp(r, np.arange(len(ys)), ys)], -1)
    gb = _g(dom, y, b)
    ok = (ga * gb <= 0) & np.any(a != b, axis=-1)
    lo = a.copy()
    hi = b.copy()
    glo = ga.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        gm = _g(dom, y, mid)
        same = np.sign(gm) == np.sign(glo)
        lo = np.where(same[:, None], mid, lo)
        glo = np.where(same, gm, glo)
        hi = np.where(same[:, None], hi, mid)
    return np.where(ok[:, None], 0.5 * (lo + hi), interp)


def _clip_to_annulus(segs: np.ndarray, y, r_lo: float, r_hi: float) -> np.ndarray:
    """Exact clipping of segments to r_lo <= |x - y| < r_hi."""
    if len(segs) == 0:
        return segs
    p = segs[:, 0] - y
    d = segs[:, 1] - segs[:, 0]
    A = (d * d).sum(-1)
    B = 2 * (p * d).sum(-1)
    C = (p * p).sum(-1)
    t0 = np.zeros(len(segs))
    t1 = np.ones(len(segs))
    valid = A > 0
    for R, inside_is_less in ((r_hi, True), (r_lo, False)):
        if R <= 0 or not math.isfinite(R):
            continue
        disc = B * B - 4 * A * (C - R * R)
        has = valid & (disc > 0)
        sq = np.sqrt(np.where(has, disc, 0.0))
        Asafe = np.where(valid, A, 1.0)
        ta = (-B - sq) / (2 * Asafe)
        tb = (-B + sq) / (2 * Asafe)
        if inside_is_less:
            # keep the part with |x - y| < R: t in (ta, tb)
            t0 = np.where(has, np.maximum(t0, ta), t0)
            t1 = np.where(has, np.minimum(t1, tb), t1)
            out = ~has & (C >= R * R)
            t1 = np.where(out, -1.0, t1)
        else:
            # keep |x - y| >= R: t outside (ta, tb); segments are short, so keep
            # the larger piece
            in0 = C < R * R
            end = segs[:, 1] - y
            in1 = (end * end).sum(-1) < R * R
            t0 = np.where(has & in0 & ~in1, np.maximum(t0, tb), t0)
            t1 = np.where(has & ~in0 & in1, np.minimum(t1, ta), t1)
            t1 = np.where(in0 & in1, -1.0, t1)
    keep = t1 > t0
    a = segs[keep, 0] + t0[keep, None] * d[keep]
    b = segs[keep, 0] + t1[keep, None] * d[keep]
    return np.stack([a, b], axis=1)


def _labels(dom: Domain, y, pts) -> np.ndarray:
    delta, b, _ = dom.nearest(pts)
    ratio = np.linalg.norm(y - b, axis=-1) / np.where(delta > 0, delta, 1.0)
    ok = (delta > 0) & (ratio > 0)
    j = np.where(ok, chord_bands(np.where(ok, np.minimum(ratio, 2.0), 1.0)), -1)
    k = np.where(delta > 0, shell_indices(np.where(delta > 0, delta, 1.0)), -10 ** 6)
    return np.stack([j, k], -1)


def _label_segments(dom: Domain, y, segs: np.ndarray):
    """Split segments where the (j, k) label changes and label the pieces."""
    if len(segs) == 0:
        return segs, np.empty((0, 2), int)
    la = _labels(dom, y, segs[:, 0])
    lb = _labels(dom, y, segs[:, 1])
    same = np.all(la == lb, axis=1)
    out_s = [segs[same]]
    out_l = [_labels(dom, y, segs[same].mean(axis=1))]
    for s, l0 in zip(segs[~same], la[~same]):
        lo, hi = 0.0, 1.0
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            lm = _labels(dom, y, (s[0] + mid * (s[1] - s[0]))[None])[0]
            if np.all(lm == l0):
                lo = mid
            else:
                hi = mid
        cut = s[0] + 0.5 * (lo + hi) * (s[1] - s[0])
        parts = np.array([[s[0], cut], [cut, s[1]]])
        out_s.append(parts)
        out_l.append(_labels(dom, y, parts.mean(axis=1)))
    return np.concatenate(out_s), np.concatenate(out_l).astype(int)


def extract_P(dom: Domain, y, h: float, fine_cells: int = 32) -> ConvexBodyProbe:
    """Boundary of E(y) by marching squares on g(x) = |x - y| - delta(x).

    The coarse pass uses spacing h over the domain window.  Closer to y
    (where P(y) is small, since |x - y| >= delta(y) / 2 on it) each dyadic
    annulus 2^m <= |x - y| < 2^(m+1) gets its own grid with spacing
    2^m / fine_cells, so every scale is resolved.
    """
    y = np.asarray(y, float)
    if not bool(dom.contains(y)):
        raise DomainError("y must lie in the domain")
    dy = float(dom.delta(y))
    lo_box, hi_box = dom.bbox()
    lo_box = np.asarray(lo_box, float)
    hi_box = np.asarray(hi_box, float)
    m0 = math.floor(math.log2(dy / 2.0))
    m_star = math.floor(math.log2(fine_cells * h))
    pieces = []
    for m in range(m0, m_star):
        r_lo, r_hi = 2.0 ** m, 2.0 ** (m + 1)
        hm = r_lo / fine_cells
        lo = np.maximum(y - r_hi - 2 * hm, lo_box)
        hi = np.minimum(y + r_hi + 2 * hm, hi_box)
        if np.any(hi - lo <= 2 * hm):
            continue
        segs = _contour_segments(dom, y, lo, hi, hm)
        pieces.append(_clip_to_annulus(segs, y, r_lo, r_hi))
    r_start = 2.0 ** max(m_star, m0)
    segs = _contour_segments(dom, y, lo_box, hi_box, h)
    pieces.append(_clip_to_annulus(segs, y, r_start, math.inf))
    segs = np.concatenate(pieces) if pieces else np.empty((0, 2, 2))
    segs, labels = _label_segments(dom, y, segs)
    return ConvexBodyProbe(dom, y, segs, labels, h, bool(dy < 2 * h))


# --------------------------------------------------------------------------
# checks on P(y)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportReport:
    x: tuple
    orthogonality_deg: float
    bisection_deg: float
    one_sided_violation: float
    passed: bool


def _angle_deg(u, v) -> float:
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))


def supporting_line_check(probe: ConvexBodyProbe, index: int, tol_deg: float = 1.0,
                          slack: Optional[float] = None) -> SupportReport:
    """Tangent at the ``index``-th ordered point of the probe versus b_x - y,
    the bisector of the angle (y - x, b_x - x), and one-sidedness of all
    extracted points with respect to the line normal to b_x - y."""
    pts = probe.points
    if not 0 < index < len(pts) - 1:
        raise ParameterError("need an interior point of the ordered polyline")
    x = pts[index]
    c = nearest_boundary(probe.domain, x)
    if not c.unique:
        raise DomainError("supporting line needs a unique nearest boundary point")
    tangent = pts[index + 1] - pts[index - 1]
    if not np.linalg.norm(tangent) > 0:
        raise DomainError("repeated polyline points leave the tangent undefined")
    nrm = c.b - probe.y
    ortho = 90.0 - _angle_deg(tangent, nrm)
    bis = (probe.y - x) / np.linalg.norm(probe.y - x) + (c.b - x) / c.delta
    if np.linalg.norm(bis) < 1e-12:
        # straight angle (x on the segment from y to b_x): the bisector is the normal
        bis = np.array([-(c.b - x)[1], (c.b - x)[0]])
    bis_angle = _angle_deg(tangent, bis)
    slack = 2 * probe.h if slack is None else slack
    side = (pts - x) @ ((probe.y - c.b) / np.linalg.norm(probe.y - c.b))
    viol = float(max(0.0, -side.min()))
    ok = ortho <= tol_deg and bis_angle <= tol_deg and viol <= slack
    return SupportReport(tuple(x), float(ortho), float(bis_angle), viol, bool(ok))


def boundary_check(probe: ConvexBodyProbe, radius: Optional[float] = None) -> int:
    """Number of extracted points lacking a member and a non-member within
    ``radius`` (default 2h) along the direction to y."""
    pts = probe.points
    if len(pts) == 0:
        return 0
    r = 2 * probe.h if radius is None else radius
    u = probe.y - pts
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    inner = probe.member(pts + r * u)
    outer = probe.member(pts - r * u)
    return int(np.sum(~(inner & ~outer)))


def midpoint_closure(dom: Domain, y, n_pairs: int, seed: int = 0, radius: Optional[float] = None):
    """Sample pairs in E(y) and count midpoints that fall outside E(y)."""
    y = np.asarray(y, float)
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox()
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if radius is not None:
        lo = np.maximum(lo, y - radius)
        hi = np.minimum(hi, y + radius)
    pool = np.empty((0, 2))
    for _ in range(200):
        p = lo + rng.random((8 * n_pairs, 2)) * (hi - lo)
        pool = np.concatenate([pool, p[E_membership(dom, y, p)]])
        if len(pool) >= 2 * n_pairs:
            break
    pool = pool[:2 * n_pairs]
    if len(pool) < 2 * n_pairs:
        raise DomainError("could not sample enough members of E(y)")
    a, b = pool[:n_pairs], pool[n_pairs:]
    mid = 0.5 * (a + b)
    return int(np.sum(~E_membership(dom, y, mid))), n_pairs


def P_jk_measure(probe: ConvexBodyProbe, j: int, k: int) -> float:
    return probe.measure(j, k)


def rough_integral(probe: ConvexBodyProbe, j: int) -> float:
    """Integral of |x - y|^(-1) over the band-j part of P(y) (3-point Gauss
    rule per segment)."""
    m = probe.labels[:, 0] == j
    s = probe.segments[m]
    if len(s) == 0:
        return 0.0
    t, w = np.polynomial.legendre.leggauss(3)
    L = np.linalg.norm(s[:, 1] - s[:, 0], axis=1)
    tot = 0.0
    for ti, wi in zip(t, w):
        p = s[:, 0] + 0.5 * (ti + 1)[..., None] * (s[:, 1] - s[:, 0])
        tot += 0.5 * wi * np.sum(L / np.linalg.norm(p - probe.y, axis=1))
    return float(tot)


# --------------------------------------------------------------------------
# operator-norm probes
# --------------------------------------------------------------------------

def _arc_overlap(intervals_a, intervals_b) -> float:
    """Total length of the overlap of two interval lists on the circle."""
    tot = 0.0
    for a0, a1 in intervals_a:
        for b0, b1 in intervals_b:
            for shift in (-TWO_PI, 0.0, TWO_PI):
                lo = max(a0, b0 + shift)
                hi = min(a1, b1 + shift)
                if hi > lo:
                    tot += hi - lo
    return tot


def _overlap_1d(a0, a1, b0, b1) -> np.ndarray:
    """Length of (a0, a1) intersected with (b0 + 2 pi m, b1 + 2 pi m), m in {-1, 0, 1}."""
    tot = np.zeros(np.broadcast(a0, b0).shape)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        tot += np.maximum(0.0, np.minimum(a1, b1 + shift) - np.maximum(a0, b0 + shift))
    return tot


def small_ball_band_integrals(dom: Domain, y, eps: float, grid: GridSpec, j_cap: int = 60):
    """For f = indicator(B(y, eps)) / (pi eps^2), return the grid integral
    of x -> S_jk f(x) for every (j, k), as a dict.

    Only cells with | |x - y| - delta(x) | < eps contribute; for each such
    cell the arc dB(x, delta) inside B(y, eps) is intersected exactly with
    the band intervals.
    """
    y = np.asarray(y, float)
    cen = grid.centers().reshape(-1, 2)
    delta, b, _ = dom.nearest(cen)
    dist = np.linalg.norm(cen - y, axis=1)
    band = (delta > 0) & (np.abs(dist - delta) < eps) & (dist > 0)
    cen, d, dd, b = cen[band], delta[band], dist[band], b[band]
    cosg = (d * d + dd * dd - eps * eps) / (2 * d * dd)
    keep = cosg < 1.0
    cen, d, dd, b, cosg = cen[keep], d[keep], dd[keep], b[keep], cosg[keep]
    out: Dict[Tuple[int, int], float] = {}
    if len(d) == 0:
        return out
    g = np.arccos(np.maximum(-1.0, cosg))
    phi_y = np.arctan2(y[1] - cen[:, 1], y[0] - cen[:, 0])
    phi_b = np.arctan2(b[:, 1] - cen[:, 1], b[:, 0] - cen[:, 0])
    # arc of dB(x, delta) inside B(y, eps), in angles relative to b_x
    a = np.remainder(phi_y - phi_b + math.pi, TWO_PI) - math.pi
    a0, a1 = a - g, a + g
    k = shell_indices(d)
    weight = d * grid.h ** 2 / (math.pi * eps * eps)
    lo_beta = np.maximum(0.0, np.abs(a) - g)
    c_lo = 2 * np.sin(lo_beta / 2)
    j_top = int(min(j_cap, chord_bands(np.maximum(c_lo.min(), 1e-300)).max()))
    for j in range(0, j_top + 1):
        lo, hi = band_angles(j)
        if j == 0:
            ov = _overlap_1d(a0, a1, lo, TWO_PI - lo)
        else:
            ov = _overlap_1d(a0, a1, lo, hi) + _overlap_1d(a0, a1, -hi, -lo)
        hit = ov > 0
        if not np.any(hit):
            continue
        contrib = ov[hit] * weight[hit]
        for kk in np.unique(k[hit]):
            sel = k[hit] == kk
            out[(j, int(kk))] = out.get((j, int(kk)), 0.0) + math.fsum(contrib[sel].tolist())
    return out


def neighbour_measure(table: Dict[Tuple[int, int], float], j: int, k: int):
    """Sum of P measures over |j' - j| <= 1, |k' - k| <= 1 and the maximizing neighbour."""
    tot = 0.0
    best, arg = -1.0, (j, k)
    for jj in (j - 1, j, j + 1):
        for kk in (k - 1, k, k + 1):
            v = table.get((jj, kk), 0.0)
            tot += v
            if v > best:
                best, arg = v, (jj, kk)
    return tot, arg


def opnorm_Linf_probe(dom: Domain, j: int, k: int, samples: int = 64,
                      n_theta: int = 2048, grid: Optional[GridSpec] = None) -> float:
    """sup over sampled x in shell k of S_jk(1_Omega, x) / 2^(k - j).

    The samples include the points of largest distance in the shell that
    the sampler finds (the supremum is approached as delta -> 2^(k+1)).
    """
    from .fields import Constant  # local import keeps module import light
    from .geometry import sample_points

    lo, hi = dom.bbox()
    if grid is None:
        grid = GridSpec.covering(lo, hi, 64)
    f = ScalarField.from_spec(Constant(1.0), dom, grid)
    pts = sample_points(dom, 20 * samples, seed=0)
    d = dom.delta(pts)
    sel = (d >= 2.0 ** k) & (d < 2.0 ** (k + 1))
    pts = pts[sel]
    if len(pts) == 0:
        return 0.0
    pts = pts[np.argsort(-dom.delta(pts), kind="mergesort")][:samples]
    best = 0.0
    for x in pts:
        sec = angular_sector(dom, x, j)
        if not sec.unique:
            continue
        s = S_jk(f, x, j, k, n_theta, sector=sec)
        best = max(best, s / 2.0 ** (k - j))
    return float(best)


# --------------------------------------------------------------------------
# annulus geometry and localization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusReport:
    lhs: float
    rhs: float
    holds: bool
    unique: bool


def annulus_check(dom: Domain, x, y, R: float = math.inf, tol: float = 1e-9) -> AnnulusReport:
    """delta(x) (1 - delta(x)/R) (1 - cos beta) <= dist(y, boundary) + tol for
    y on dB(x, delta(x)), beta the angle between b_x - x and y - x.  With
    R = inf this is the convex-complement form."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    c = nearest_boundary(dom, x)
    u = (c.b - x) / c.delta
    v = (y - x) / np.linalg.norm(y - x)
    cosb = float(np.clip(np.dot(u, v), -1.0, 1.0))
    factor = 1.0 if not math.isfinite(R) else (1.0 - c.delta / R)
    lhs = c.delta * factor * (1.0 - cosb)
    rhs = float(dom.delta(y)) if bool(dom.contains(y)) else 0.0
    return AnnulusReport(lhs, rhs, bool(lhs <= rhs + tol), c.unique)


def localization_samples(dom: Domain, j: int, k: int, count: int, seed: int = 0):
    """Points y in band j of points x in shell k, with dist(y, boundary).

    Returns an array of shape (m, 3): y1, y2, dist(y).
    """
    from .geometry import sample_points

    pts = sample_points(dom, 40 * count, seed=seed)
    d = dom.delta(pts)
    pts = pts[(d >= 2.0 ** k) & (d < 2.0 ** (k + 1))][:count]
    rng = np.random.default_rng(seed)
    out = []
    lo, hi = band_angles(j)
    for x in pts:
        c = nearest_boundary(dom, x)
        if not c.unique:
            continue
        phi = math.atan2(c.b[1] - x[1], c.b[0] - x[0])
        beta = lo + (hi - lo) * (1.0 - rng.random())
        th = phi + (beta if rng.random() < 0.5 else -beta)
        yy = x + c.delta * np.array([math.cos(th), math.sin(th)])
        dist = float(dom.delta(yy)) if bool(dom.contains(yy)) else 0.0
        out.append((yy[0], yy[1], dist))
    return np.asarray(out).reshape(-1, 3)
