"""Local fractional maximal operator and its companions.

For a field ``f`` on a domain with distance function ``delta``:

* ``M_alpha f(x) = sup_{0 < r < delta(x)} r^alpha * mean(|f|, B(x, r))``,
* ``A_alpha f(x) = delta(x)^alpha * mean(f, B(x, delta(x)))``,
* ``B_alpha f(x) = delta(x)^(alpha - 1) * mean over dB(x, delta(x)) of
  |y - b_x| / delta(x) * f(y)`` (mean with respect to arc length).

On the grid the ball mean changes only when ``r`` crosses the distance of a
cell center, so the supremum is computed exactly as a maximum over those
thresholds.  The same holds for axis-parallel squares with the max-norm.

The gradient of ``A_alpha`` has the closed form

    grad A_alpha f = (alpha - n) A_{alpha-1} f grad(delta)
                     + n delta^(alpha-1) mean_{dB} ((y - b_x) / delta) f(y),

which follows from the divergence theorem; :func:`grad_A_formula` evaluates
it and serves as an independent check on finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DomainError, ParameterError
from .fields import ScalarField, ball_average, gradient_field
from .geometry import Domain, HalfPlane, distance, nearest_boundary

N_DIM = 2
C_SPHERE = float(N_DIM)


@dataclass(frozen=True)
class MaximalResult:
    """Value of a maximal operator at one point.

    ``radius`` is the maximizing radius (``delta(x)`` for constrained
    points), ``boundary_value`` the candidate ``r -> delta(x)``, i.e. the
    averaging operator evaluated on ``|f|``.
    """

    value: float
    radius: float
    constrained: bool
    boundary_value: float
    low_resolution: bool = False

    @property
    def gap(self) -> float:
        return self.value - self.boundary_value


def constraint_tolerance(h: float, delta: float, boundary_value: float) -> float:
    """Twice the expected relative quadrature error of a ball mean at r = delta."""
    return 2.0 * (h / max(delta, h)) * abs(boundary_value) + 1e-12


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < N_DIM):
        raise ParameterError(f"alpha = {alpha} outside [0, {N_DIM})")


def local_fractional_maximal(f: ScalarField, x, alpha: float, method: str = "exact",
                             n_r: int = 256) -> MaximalResult:
    """M_alpha |f| at x, relative to the domain of ``f``.

    ``method='exact'`` maximizes over every radius at which the cell stencil
    changes; ``method='ladder'`` evaluates ``n_r`` equispaced radii and then
    refines around the best one by golden-section search.
    """
    _check_alpha(alpha)
    x = np.asarray(x, float)
    d = distance(f.domain, x)
    g = f.grid
    low = d < 3 * g.h
    if method == "exact":
        best, r_best, last = _kernels.maximal_point(np.abs(f.masked), g.origin[0], g.origin[1],
                                                    g.h, x[0], x[1], d, alpha)
    elif method == "ladder":
        best, r_best, last = _ladder(f, x, d, alpha, n_r)
    else:
        raise ParameterError(f"unknown method {method!r}")
    tau = constraint_tolerance(g.h, d, last)
    constrained = bool(best - last <= tau)
    return MaximalResult(float(best), float(d if constrained else r_best), constrained,
                         float(last), bool(low))


def _ladder(f, x, d, alpha, n_r):
    def val(r):
        return r ** alpha * ball_average(f, x, r, absolute=True).value

    radii = d * np.arange(1, n_r + 1) / n_r
    radii[-1] = d * (1 - 1e-12)
    vals = np.array([val(r) for r in radii])
    i = int(np.argmax(vals))
    best, r_best = vals[i], radii[i]
    a = radii[max(i - 1, 0)] if i > 0 else 0.0
    b = radii[min(i + 1, n_r - 1)]
    phi = (math.sqrt(5) - 1) / 2
    c1, c2 = b - phi * (b - a), a + phi * (b - a)
    v1, v2 = val(max(c1, 1e-300)), val(c2)
    for _ in range(40):
        if v1 >= v2:
            b, c2, v2 = c2, c1, v1
            c1 = b - phi * (b - a)
            v1 = val(max(c1, 1e-300))
        else:
            a, c1, v1 = c1, c2, v2
            c2 = a + phi * (b - a)
            v2 = val(c2)
        for v, c in ((v1, c1), (v2, c2)):
            if v > best:
                best, r_best = v, c
    return best, r_best, vals[-1]


def global_fractional_maximal(f: ScalarField, x, alpha: float, ratio: float = 1.005) -> float:
    """sup over all r > 0 of r^alpha * mean(|f|, B(x, r)) with f extended by zero.

    Radii up to the distance from x to the grid edge are handled exactly;
    beyond that a geometric ladder with the given ratio is used until the
    ball contains the whole grid (after which the value only decreases for
    alpha < 2).
    """
    _check_alpha(alpha)
    x = np.asarray(x, float)
    g = f.grid
    lo = np.asarray(g.origin, float)
    hi = np.asarray(g.upper, float)
    r_in = float(min((x - lo).min(), (hi - x).min()))
    vals = np.abs(f.masked)
    best = 0.0
    if r_in > 0:
        best, _, _ = _kernels.maximal_point(vals, lo[0], lo[1], g.h, x[0], x[1], r_in, alpha)
    corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    r_out = float(np.linalg.norm(corners - x, axis=1).max()) + g.h
    prefix = f.prefix(absolute=True)
    r = max(r_in, g.h)
    while r < r_out * ratio:
        s, c = _kernels.ball_sum_count(prefix, lo[0], lo[1], g.h, x[0], x[1], r)
        if c > 0:
            best = max(best, r ** alpha * s / c)
        r *= ratio
    return float(best)


# --------------------------------------------------------------------------
# averaging operator
# --------------------------------------------------------------------------

def _polar_mean(func, x, r, n_r: int = 24, n_t: int = 96) -> float:
    """Mean of a smooth function over B(x, r): Gauss-Legendre in the radius,
    trapezoid in the angle."""
    t, w = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * r * (t + 1.0)
    wr = 0.5 * r * w * rho
    th = 2 * math.pi * np.arange(n_t) / n_t
    pts = x + rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]
    v = func(pts)
    return float((v.mean(axis=1) * wr).sum() * 2 * math.pi / (math.pi * r * r))


def averaging_A(f: ScalarField, x, alpha: float, quadrature: str = "cells"):
    """A_alpha f(x) = delta(x)^alpha * mean(f, B(x, delta(x))).

    ``quadrature='cells'`` counts cell centers; ``'polar'`` integrates the
    analytic generator with a tensor rule (requires ``f.func``).  Returns
    ``(value, low_resolution)``.
    """
    x = np.asarray(x, float)
    d = distance(f.domain, x)
    if quadrature == "polar" and f.func is not None:
        m = _polar_mean(f.evaluate, x, d)
    else:
        m = ball_average(f, x, d).value
    return d ** alpha * m, bool(d < 3 * f.grid.h)


# --------------------------------------------------------------------------
# weighted spherical average
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereAverage:
    value: float
    unique: bool
    low_resolution: bool


def _sphere_nodes(n_theta: int):
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    return np.stack([np.cos(th), np.sin(th)], -1)


def weighted_spherical_B(f: ScalarField, x, alpha: float, n_theta: int = 4096) -> SphereAverage:
    """B_alpha f(x) with surface normalization; flagged when b_x is not unique."""
    x = np.asarray(x, float)
    c = nearest_boundary(f.domain, x)
    u = _sphere_nodes(n_theta)
    y = x + c.delta * u
    w = np.linalg.norm(y - c.b, axis=-1) / c.delta
    vals = f.evaluate(y) * w
    mean = math.fsum(vals.tolist()) / n_theta
    return SphereAverage(c.delta ** (alpha - 1) * mean, c.unique, bool(c.delta < 3 * f.grid.h))


def weighted_spherical_B_many(f: ScalarField, pts, alpha: float, n_theta: int = 512,
                              chunk: int = 4096):
    """Vectorized B_alpha f at many points; returns (values, unique)."""
    pts = np.asarray(pts, float).reshape(-1, 2)
    delta, b, unique = f.domain.nearest(pts)
    u = _sphere_nodes(n_theta)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        sl = slice(s, s + chunk)
        d = delta[sl][:, None, None]
        y = pts[sl][:, None, :] + d * u[None]
        w = np.linalg.norm(y - b[sl][:, None, :], axis=-1) / d[..., 0]
        out[sl] = (f.evaluate(y) * w).mean(axis=1) * delta[sl] ** (alpha - 1)
    return out, unique


def grad_A_formula(f: ScalarField, x, alpha: float, n_theta: int = 4096) -> np.ndarray:
    """Closed-form gradient of A_alpha f at a point with unique b_x."""
    x = np.asarray(x, float)
    c = nearest_boundary(f.domain, x)
    if not c.unique:
        raise DomainError("gradient formula needs a unique nearest boundary point")
    d = c.delta
    n_vec = (x - c.b) / d
    a_prev, _ = averaging_A(f, x, alpha - 1, quadrature="polar")
    u = _sphere_nodes(n_theta)
    y = x + d * u
    fv = f.evaluate(y)
    flux = ((y - c.b) / d * fv[:, None]).mean(axis=0)
    return (alpha - N_DIM) * a_prev * n_vec + N_DIM * d ** (alpha - 1) * flux


@dataclass(frozen=True)
class DerivativeBound:
    L: float
    R: float
    ratio: float
    formula_gradient: Optional[np.ndarray] = None


def derivative_bound_check(f: ScalarField, x, alpha: float, step: Optional[float] = None,
                           n_theta: int = 4096) -> DerivativeBound:
    """L = |finite-difference gradient of A_alpha f| against
    R = |A_{alpha-1} f| + C_SPHERE * B_alpha |f| at x.

    The averaging operator is evaluated with the polar rule when the field
    has an analytic generator, so the difference quotient resolves the true
    derivative rather than lattice-count noise.
    """
    x = np.asarray(x, float)
    c = nearest_boundary(f.domain, x)
    if not c.unique:
        raise DomainError("derivative bound needs a unique nearest boundary point")
    h = f.grid.h if step is None else step
    h = min(h, 0.25 * c.delta)
    grad = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        ap, _ = averaging_A(f, x + e, alpha, quadrature="polar")
        am, _ = averaging_A(f, x - e, alpha, quadrature="polar")
        grad[i] = (ap - am) / (2 * h)
    L = float(np.linalg.norm(grad))
    a_prev, _ = averaging_A(f, x, alpha - 1, quadrature="polar")
    B = weighted_spherical_B(f.abs(), x, alpha, n_theta).value
    R = abs(a_prev) + C_SPHERE * B
    ratio = 0.0 if R == 0.0 and L == 0.0 else (L / R if R > 0 else math.inf)
    formula = grad_A_formula(f, x, alpha, n_theta)
    return DerivativeBound(L, float(R), float(ratio), formula)


# --------------------------------------------------------------------------
# field maps
# --------------------------------------------------------------------------

@dataclass
class FieldMap:
    """Cell arrays of an operator on the grid of ``field``."""

    field: ScalarField
    value: np.ndarray
    radius: Optional[np.ndarray] = None
    boundary_value: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    alpha: float = 1.0
    argmax_radius: Optional[np.ndarray] = None

    @property
    def constrained(self) -> np.ndarray:
        if self.boundary_value is None:
            raise AttributeError("map has no boundary candidate")
        tau = 2.0 * (self.field.grid.h / np.maximum(self.delta, self.field.grid.h)) \
            * np.abs(self.boundary_value) + 1e-12
        return (self.value - self.boundary_value) <= tau

    def gradient(self) -> np.ndarray:
        return gradient_field(self.value, self.field.grid.h)


def cell_delta(f: ScalarField) -> np.ndarray:
    """delta at the cell centers (0 outside the domain)."""
    d = f.domain.delta(f.grid.centers())
    return np.where(f.inside, d, 0.0)


def maximal_field_map(f: ScalarField, alpha: float, mask: Optional[np.ndarray] = None) -> FieldMap:
    """Exact discrete M_alpha |f| on every cell of the domain (or of ``mask``;
    other cells get NaN)."""
    _check_alpha(alpha)
    g = f.grid
    d = cell_delta(f)
    rc = d / g.h if mask is None else np.where(mask, d / g.h, 0.0)
    di, dj, d2, ge = _kernels.offset_table(float(rc.max()) + 1.0)
    v, r, a = _kernels.maximal_field(np.abs(f.masked), rc, g.h, alpha, di, dj, d2, ge)
    fm = FieldMap(f, v, r, a, d, alpha, argmax_radius=r)
    cons = np.where(np.isfinite(v), fm.constrained, False)
    fm.radius = np.where(cons, d, r)
    return fm


def averaging_field_map(f: ScalarField, alpha: float) -> FieldMap:
    g = f.grid
    d = cell_delta(f)
    v = _kernels.averaging_field(f.prefix(), g.origin[0], g.origin[1], g.h, d, alpha)
    return FieldMap(f, v, delta=d, alpha=alpha)


def B_field_map(f: ScalarField, alpha: float, n_theta: int = 512) -> FieldMap:
    g = f.grid
    d = cell_delta(f)
    out = np.full(g.shape, np.nan)
    m = f.inside
    vals, _ = weighted_spherical_B_many(f, g.centers()[m], alpha, n_theta)
    out[m] = vals
    return FieldMap(f, out, delta=d, alpha=alpha)


def openness_check(fm: FieldMap, max_gamma_cells: int = 8, sample: Optional[np.ndarray] = None):
    """Check that unconstrained cells have neighbourhoods of cells whose
    maximizing radii (the raw grid argmax, before the constrained label is
    applied) stay below delta(x) - gamma/2.

    gamma is found at each center x (in whole cells) as the largest value for
    which every cell z within gamma and every stencil radius r within gamma
    of delta(x) gives A(z, r) < M(x) - eps/2, with eps = M(x) - A(x, delta(x)).
    Returns (checked, violations, skipped).
    """
    f = fm.field
    g = f.grid
    prefix = f.prefix(absolute=True)
    cons = fm.constrained
    raw_radius = fm.radius if fm.argmax_radius is None else fm.argmax_radius
    valid = np.isfinite(fm.value)
    cand = np.argwhere(valid & ~cons)
    if sample is not None:
        cand = cand[sample[sample < len(cand)]]
    checked = violations = skipped = 0
    for iy, ix in cand:
        d = fm.delta[iy, ix]
        M = fm.value[iy, ix]
        eps = M - fm.boundary_value[iy, ix]
        gamma = 0
        for m in range(1, max_gamma_cells + 1):
            ok = True
            gm = m * g.h
            for dy in range(-m, m + 1):
                for dx in range(-m, m + 1):
                    jy, jx = iy + dy, ix + dx
                    if dx * dx + dy * dy >= m * m:
                        continue
                    if not (0 <= jy < g.ny and 0 <= jx < g.nx) or not valid[jy, jx]:
                        ok = False
                        break
                    c = g.center_of(jy, jx)
                    dz = fm.delta[jy, jx]
                    for r in np.linspace(max(d - gm, g.h), min(d + gm, dz), 5):
                        s, n = _kernels.ball_sum_count(prefix, g.origin[0], g.origin[1], g.h,
                                                       c[0], c[1], r)
                        if n and r ** fm.alpha * s / n >= M - eps / 2:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
            gamma = m
        if gamma < 2:
            skipped += 1
            continue
        checked += 1
        half = gamma / 2.0
        rad = int(math.floor(half))
        for dy in range(-rad, rad + 1):
            for dx in range(-rad, rad + 1):
                if dx * dx + dy * dy > half * half:
                    continue
                jy, jx = iy + dy, ix + dx
                if not raw_radius[jy, jx] < d - half * g.h + 1e-12:
                    violations += 1
                    break
            else:
                continue
            break
    return checked, violations, skipped


# --------------------------------------------------------------------------
# cube variants
# --------------------------------------------------------------------------

def sup_distance(dom: Domain, x) -> tuple:
    """Half-side of the largest open square Q(x, r) inside the domain and the
    nearest complement point in the max-norm.

    Exact for half-planes; for other domains found by bisection on corner
    membership (valid for convex domains), with b the corner direction hit.
    """
    x = np.asarray(x, float)
    if isinstance(dom, HalfPlane):
        r, b = dom.sup_nearest(x)
        return float(r), np.asarray(b, float)
    d = distance(dom, x)
    lo, hi = d / math.sqrt(2), d
    corners = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.all(dom.contains(x + mid * corners)):
            lo = mid
        else:
            hi = mid
    hit = ~dom.contains(x + hi * corners)
    b = x + hi * corners[np.argmax(hit)]
    return float(lo), b


def cube_maximal(f: ScalarField, x, alpha: float) -> MaximalResult:
    """Maximal operator over open squares Q(x, r) inside the domain."""
    x = np.asarray(x, float)
    if not bool(f.domain.contains(x)):
        raise DomainError("point outside the domain")
    rmax, _ = sup_distance(f.domain, x)
    g = f.grid
    c = g.centers()
    dinf = np.abs(c - x).max(axis=-1)
    keep = dinf < rmax
    dd = dinf[keep]
    vv = np.abs(f.masked)[keep]
    # lattice cells inside the square but off the grid count as zeros
    order = np.argsort(dd, kind="mergesort")
    dd, vv = dd[order], vv[order]
    s = np.cumsum(vv)
    ends = np.nonzero(np.append(dd[1:] > dd[:-1] + 1e-12 * g.h, True))[0]
    best, r_best, last = -math.inf, rmax, 0.0
    for n, e in enumerate(ends):
        t = dd[ends[n + 1]] if n + 1 < len(ends) else rmax
        t = min(t, rmax)
        cnt = _lattice_in_square(g, x, t)
        val = t ** alpha * s[e] / cnt
        if val >= best:
            best, r_best = val, t
        last = val
    tau = constraint_tolerance(g.h, rmax, last)
    cons = bool(best - last <= tau)
    return MaximalResult(float(best), float(rmax if cons else r_best), cons, float(last),
                         bool(rmax < 3 * g.h))


def _lattice_in_square(g, x, t):
    """Number of lattice cell centers (on or off the grid) with
    |c - x|_inf < t, using the count of those strictly below the next threshold."""
    cnt = 1
    for k in range(2):
        o = g.origin[k]
        lo = math.floor((x[k] - t - o) / g.h - 0.5) + 1
        hi = math.ceil((x[k] + t - o) / g.h - 0.5) - 1
        cnt *= max(hi - lo + 1, 0)
    return max(cnt, 1)


def cube_maximal_field(f: ScalarField, alpha: float) -> FieldMap:
    """Cube maximal function on every cell (square stencils around cell centers)."""
    g = f.grid
    cen = g.centers()
    m = f.inside
    r = np.zeros(g.shape)
    dom = f.domain
    if isinstance(dom, HalfPlane):
        rr, _ = dom.sup_nearest(cen)
        r = np.where(m, rr, 0.0)
    else:
        for iy, ix in np.argwhere(m):
            r[iy, ix] = sup_distance(dom, cen[iy, ix])[0]
    sat = np.zeros((g.ny + 1, g.nx + 1))
    sat[1:, 1:] = np.abs(f.masked).cumsum(0).cumsum(1)
    v, rad, a = _kernels.cube_maximal_field(sat, g.origin[0], g.origin[1], g.h, r, alpha)
    return FieldMap(f, v, rad, a, r, alpha)


def square_boundary_nodes(x, r, n_per_side: int = 64):
    """Gauss-Legendre nodes and weights on the four sides of dQ(x, r)."""
    t, w = np.polynomial.legendre.leggauss(n_per_side)
    s = r * t
    ws = r * w
    sides = [np.stack([s, np.full_like(s, -r)], -1), np.stack([np.full_like(s, r), s], -1),
             np.stack([s, np.full_like(s, r)], -1), np.stack([np.full_like(s, -r), s], -1)]
    pts = np.asarray(x, float) + np.concatenate(sides)
    return pts, np.tile(ws, 4)


def cube_B1(f: ScalarField, x, shrink: float = 1e-12, n_per_side: int = 64) -> float:
    """Average of |y - b_x^inf| / r * f(y) over dQ(x, r(1 - shrink)), normalized
    by the perimeter, where r is the max-norm distance to the complement.

    The shrink keeps the face lying on the boundary inside the domain, so it
    sees the trace of f from inside rather than the zero extension.
    """
    r, b = sup_distance(f.domain, x)
    rs = r * (1.0 - shrink)
    pts, w = square_boundary_nodes(x, rs, n_per_side)
    wt = np.linalg.norm(pts - b, axis=-1) / r
    return float(np.sum(w * wt * np.abs(f.evaluate(pts))) / (8.0 * rs))
