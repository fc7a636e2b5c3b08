"""Grid-sampled functions with extend-by-zero semantics.

A :class:`ScalarField` couples a :class:`~maxlab.geometry.GridSpec`, the cell
samples of a function, and the domain it lives on.  Samples are stored on
every cell (also outside the domain) so that finite differences near the
boundary see the smooth generator; every *evaluation* and every *norm*
applies the zero extension.

Quadrature
----------
Ball averages count the cells whose centers lie in the open ball.  Sphere
integrals use the composite trapezoid rule on equispaced angles; arcs that
do not wrap around the full circle, and integrands with known jump lines,
are handled with piecewise Gauss--Legendre panels instead.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import ConfigurationError, EdgeError, ParameterError
from .geometry import Domain, GridSpec

DEFAULT_N_THETA = 4096


# --------------------------------------------------------------------------
# test-function generators
# --------------------------------------------------------------------------

class FunctionSpec:
    """Analytic generator evaluated on arrays of points of shape (..., 2)."""

    smooth = True

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> Optional[np.ndarray]:
        return None

    def breakpoints_on_circle(self, center, r) -> np.ndarray:
        """Angles where the generator jumps on the circle (empty if smooth)."""
        return np.empty(0)

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


@dataclass(frozen=True)
class Constant(FunctionSpec):
    c: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, float)
        return np.full(x.shape[:-1], float(self.c))

    def gradient(self, x):
        x = np.asarray(x, float)
        return np.zeros(x.shape)

    def describe(self):
        return {"kind": "Constant", "c": self.c}


@dataclass(frozen=True)
class Linear(FunctionSpec):
    """``a . x + c``."""

    a: tuple = (1.0, 0.0)
    c: float = 0.0

    def __call__(self, x):
        return np.asarray(x, float) @ np.asarray(self.a, float) + self.c

    def gradient(self, x):
        x = np.asarray(x, float)
        return np.broadcast_to(np.asarray(self.a, float), x.shape).copy()

    def describe(self):
        return {"kind": "Linear", "a": list(self.a), "c": self.c}


@dataclass(frozen=True)
class Quadratic(FunctionSpec):
    """``|x|^2 / 2``."""

    def __call__(self, x):
        x = np.asarray(x, float)
        return 0.5 * (x * x).sum(-1)

    def gradient(self, x):
        return np.asarray(x, float).copy()


@dataclass(frozen=True)
class GaussianBumpSum(FunctionSpec):
    """``sum_i a_i exp(-|x - c_i|^2 / (2 w_i^2))``."""

    centers: tuple = ((0.0, 0.0),)
    widths: tuple = (0.1,)
    amplitudes: tuple = (1.0,)

    def __post_init__(self):
        if not (len(self.centers) == len(self.widths) == len(self.amplitudes)):
            raise ConfigurationError("bump centers, widths and amplitudes differ in length")
        if any(w <= 0 for w in self.widths):
            raise ConfigurationError("bump widths must be positive")

    @classmethod
    def seeded(cls, seed: int, count: int, lo, hi, width_range=(0.05, 0.2),
               amp_range=(0.5, 1.5)) -> "GaussianBumpSum":
        rng = np.random.default_rng(seed)
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        c = lo + rng.random((count, 2)) * (hi - lo)
        w = rng.uniform(*width_range, size=count)
        a = rng.uniform(*amp_range, size=count)
        return cls(tuple(map(tuple, c)), tuple(w), tuple(a))

    def _parts(self, x):
        x = np.asarray(x, float)
        c = np.asarray(self.centers, float)
        w = np.asarray(self.widths, float)
        a = np.asarray(self.amplitudes, float)
        d = x[..., None, :] - c
        g = a * np.exp(-(d * d).sum(-1) / (2.0 * w * w))
        return d, w, g

    def __call__(self, x):
        _, _, g = self._parts(x)
        return g.sum(-1)

    def gradient(self, x):
        d, w, g = self._parts(x)
        return -(g[..., None] * d / (w * w)[:, None]).sum(-2)

    def describe(self):
        return {"kind": "GaussianBumpSum", "centers": [list(c) for c in self.centers],
                "widths": list(self.widths), "amplitudes": list(self.amplitudes)}


@dataclass(frozen=True)
class BoxIndicator(FunctionSpec):
    """Indicator of the open box ``(lo, hi)``."""

    corner_lo: tuple = (-0.5, -0.5)
    corner_hi: tuple = (0.5, 0.5)
    height: float = 1.0

    smooth = False

    def __call__(self, x):
        x = np.asarray(x, float)
        lo = np.asarray(self.corner_lo, float)
        hi = np.asarray(self.corner_hi, float)
        inside = np.all((x > lo) & (x < hi), axis=-1)
        return np.where(inside, float(self.height), 0.0)

    @property
    def area(self) -> float:
        return float(np.prod(np.subtract(self.corner_hi, self.corner_lo)))

    def breakpoints_on_circle(self, center, r):
        cx, cy = center
        out = []
        for k, c in ((0, cx), (1, cy)):
            for v in (self.corner_lo[k], self.corner_hi[k]):
                s = (v - c) / r
                if -1.0 < s < 1.0:
                    if k == 0:
                        a = math.acos(s)
                        out += [a, -a]
                    else:
                        a = math.asin(s)
                        out += [a, math.pi - a]
        return np.mod(np.asarray(out, float), 2 * math.pi)

    def describe(self):
        return {"kind": "BoxIndicator", "corner_lo": list(self.corner_lo),
                "corner_hi": list(self.corner_hi), "height": self.height}


@dataclass(frozen=True)
class BallIndicator(FunctionSpec):
    center: tuple = (0.0, 0.0)
    radius: float = 0.1

    smooth = False

    def __call__(self, x):
        d = np.linalg.norm(np.asarray(x, float) - np.asarray(self.center, float), axis=-1)
        return np.where(d < self.radius, 1.0, 0.0)

    def breakpoints_on_circle(self, center, r):
        v = np.asarray(self.center, float) - np.asarray(center, float)
        dist = float(np.linalg.norm(v))
        if dist == 0.0 or dist >= r + self.radius or dist <= abs(r - self.radius):
            return np.empty(0)
        cosg = (r * r + dist * dist - self.radius ** 2) / (2 * r * dist)
        g = math.acos(max(-1.0, min(1.0, cosg)))
        phi = math.atan2(v[1], v[0])
        return np.mod(np.array([phi - g, phi + g]), 2 * math.pi)

    def describe(self):
        return {"kind": "BallIndicator", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class RadialSingular(FunctionSpec):
    """``|x - x0|^(-s)`` on ``|x - x0| < cutoff``, zero beyond.

    Samples are taken with the radius clamped from below at ``floor`` so the
    cell containing ``x0`` stays finite; grids set ``floor = h / 4``.
    """

    exponent: float = 0.5
    cutoff: float = 1.0
    center: tuple = (0.0, 0.0)
    floor: float = 0.0

    smooth = False

    def check_p(self, p: float, n: int = 2) -> None:
        if math.isfinite(p) and not self.exponent < n / p:
            raise ParameterError(f"exponent {self.exponent} not below n/p = {n / p}")

    def __call__(self, x):
        d = np.linalg.norm(np.asarray(x, float) - np.asarray(self.center, float), axis=-1)
        dd = np.maximum(d, self.floor) if self.floor > 0 else d
        with np.errstate(divide="ignore"):
            v = np.where(dd > 0, dd, np.inf) ** (-self.exponent)
        return np.where(d < self.cutoff, v, 0.0)

    def with_floor(self, floor: float) -> "RadialSingular":
        return RadialSingular(self.exponent, self.cutoff, self.center, floor)

    def describe(self):
        return {"kind": "RadialSingular", "exponent": self.exponent, "cutoff": self.cutoff,
                "center": list(self.center)}


@dataclass(frozen=True)
class Dilated(FunctionSpec):
    """``x -> base(x / scale)``."""

    base: FunctionSpec = field(default_factory=Constant)
    scale: float = 1.0

    def __call__(self, x):
        return self.base(np.asarray(x, float) / self.scale)

    def gradient(self, x):
        g = self.base.gradient(np.asarray(x, float) / self.scale)
        return None if g is None else g / self.scale

    def breakpoints_on_circle(self, center, r):
        return self.base.breakpoints_on_circle(np.asarray(center) / self.scale, r / self.scale)

    @property
    def smooth(self):
        return self.base.smooth


SPEC_TYPES = {
    "Constant": Constant,
    "Linear": Linear,
    "GaussianBumpSum": GaussianBumpSum,
    "BoxIndicator": BoxIndicator,
    "BallIndicator": BallIndicator,
    "RadialSingular": RadialSingular,
}


def spec_from_config(cfg: dict) -> FunctionSpec:
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "GaussianBumpSum" and "seed" in cfg:
        return GaussianBumpSum.seeded(int(cfg.pop("seed")), int(cfg.pop("count", 3)),
                                      cfg.pop("lo", (-0.6, -0.6)), cfg.pop("hi", (0.6, 0.6)),
                                      tuple(cfg.pop("width_range", (0.05, 0.2))),
                                      tuple(cfg.pop("amp_range", (0.5, 1.5))))
    if kind not in SPEC_TYPES:
        raise ConfigurationError(f"unknown test function kind {kind!r}")
    for key, val in list(cfg.items()):
        if isinstance(val, list):
            cfg[key] = tuple(tuple(v) if isinstance(v, list) else v for v in val)
    try:
        return SPEC_TYPES[kind](**cfg)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind}: {exc}") from exc


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

class Average(NamedTuple):
    value: float
    low_resolution: bool


class ScalarField:
    """Cell samples of a function on ``grid`` extended by zero off ``domain``.

    Parameters
    ----------
    grid, values, domain
        ``values`` has shape ``grid.shape`` and holds samples on every cell.
    func
        Optional analytic generator; point evaluations use it instead of
        bilinear interpolation of the samples.
    """

    def __init__(self, grid: GridSpec, values, domain: Domain,
                 func: Optional[FunctionSpec] = None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ConfigurationError(f"values shape {values.shape} != grid shape {grid.shape}")
        self.grid = grid
        self.values = values
        self.domain = domain
        self.func = func
        self._inside = None
        self._prefix = {}

    @classmethod
    def from_spec(cls, spec: FunctionSpec, domain: Domain, grid: GridSpec) -> "ScalarField":
        if isinstance(spec, RadialSingular) and spec.floor == 0.0:
            spec = spec.with_floor(grid.h / 4)
        vals = spec(grid.centers())
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("test function is not finite on the grid")
        return cls(grid, vals, domain, spec)

    # -- basic views ------------------------------------------------------
    @property
    def inside(self) -> np.ndarray:
        if self._inside is None:
            self._inside = np.asarray(self.domain.contains(self.grid.centers()))
        return self._inside

    @property
    def masked(self) -> np.ndarray:
        return np.where(self.inside, self.values, 0.0)

    def prefix(self, absolute: bool = False) -> np.ndarray:
        key = bool(absolute)
        if key not in self._prefix:
            v = self.masked
            if absolute:
                v = np.abs(v)
            p = np.zeros((v.shape[0], v.shape[1] + 1))
            np.cumsum(v, axis=1, out=p[:, 1:])
            self._prefix[key] = p
        return self._prefix[key]

    def abs(self) -> "ScalarField":
        func = None
        if self.func is not None:
            base = self.func
            func = _Lambda(lambda x: np.abs(base(x)))
        return ScalarField(self.grid, np.abs(self.values), self.domain, func)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")
        func = None
        if self.func is not None and other.func is not None:
            a, b = self.func, other.func
            func = _Lambda(lambda x: a(x) + b(x))
        return ScalarField(self.grid, self.values + other.values, self.domain, func)

    def __mul__(self, c: float) -> "ScalarField":
        c = float(c)
        func = None
        if self.func is not None:
            a = self.func
            func = _Lambda(lambda x: c * a(x))
        return ScalarField(self.grid, c * self.values, self.domain, func)

    __rmul__ = __mul__

    # -- evaluation -------------------------------------------------------
    def interpolate(self, x) -> np.ndarray:
        """Bilinear interpolation of the raw samples (no domain mask)."""
        x = np.asarray(x, float)
        g = self.grid
        fx = (x[..., 0] - g.origin[0]) / g.h - 0.5
        fy = (x[..., 1] - g.origin[1]) / g.h - 0.5
        coords = np.stack([fy.ravel(), fx.ravel()])
        out = ndimage.map_coordinates(self.values, coords, order=1, mode="constant", cval=0.0)
        return out.reshape(x.shape[:-1])

    def raw(self, x) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(x), float)
        return self.interpolate(x)

    def evaluate(self, x) -> np.ndarray:
        """f extended by zero: 0 at every point outside the domain."""
        x = np.asarray(x, float)
        return np.where(self.domain.contains(x), self.raw(x), 0.0)

    def to_csv(self, path) -> Path:
        path = Path(path)
        c = self.grid.centers()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for (px, py), v in zip(c.reshape(-1, 2), self.masked.ravel()):
                w.writerow([f"{px:.10g}", f"{py:.10g}", f"{v:.12g}"])
        return path


class _Lambda(FunctionSpec):
    def __init__(self, fn: Callable):
        self.fn = fn

    def __call__(self, x):
        return self.fn(x)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def ball_average(f: ScalarField, x, r: float, absolute: bool = False) -> Average:
    """Mean of f over B(x, r) by cell-center inclusion counting.

    Cells outside the domain and off the grid count as zeros.  The result is
    flagged ``low_resolution`` when ``r < 3h``.
    """
    if not r > 0:
        raise ParameterError("radius must be positive")
    g = f.grid
    s, c = _kernels.ball_sum_count(f.prefix(absolute), g.origin[0], g.origin[1], g.h,
                                   float(x[0]), float(x[1]), float(r))
    val = s / c if c > 0 else 0.0
    return Average(float(val), bool(r < 3 * g.h))


MAX_PANEL_ORDER = 64


@functools.lru_cache(maxsize=None)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _gl_panels(edges: np.ndarray, total_nodes: int):
    """Gauss-Legendre nodes and weights on consecutive panels [e_i, e_{i+1}]
    with node counts proportional to panel length; long panels are split
    into equal sub-panels of order at most ``MAX_PANEL_ORDER``."""
    lengths = np.diff(edges)
    span = lengths.sum()
    nodes, weights = [], []
    for a, L in zip(edges[:-1], lengths):
        if L <= 0:
            continue
        m = max(8, int(math.ceil(total_nodes * L / span)))
        n_sub = -(-m // MAX_PANEL_ORDER)
        t, w = _leggauss(-(-m // n_sub))
        sub = L / n_sub
        starts = a + sub * np.arange(n_sub)
        nodes.append((starts[:, None] + 0.5 * sub * (t + 1.0)).ravel())
        weights.append(np.tile(0.5 * sub * w, n_sub))
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


def circle_nodes(x, r: float, n_theta: int = DEFAULT_N_THETA,
                 intervals: Optional[Sequence] = None,
                 breakpoints: Optional[np.ndarray] = None):
    """Angles and arc-length weights for integrating over ``dB(x, r)``.

    Without intervals or breakpoints this is the trapezoid rule on
    ``n_theta`` equispaced angles; otherwise piecewise Gauss-Legendre panels
    split at the interval ends and at the breakpoints.
    """
    two_pi = 2.0 * math.pi
    bp = np.empty(0) if breakpoints is None else np.mod(np.asarray(breakpoints, float), two_pi)
    if intervals is None and bp.size == 0:
        th = two_pi * np.arange(n_theta) / n_theta
        return th, np.full(n_theta, two_pi * r / n_theta)
    if intervals is None:
        intervals = [(0.0, two_pi)]
        base = float(bp.min())
        intervals = [(base, base + two_pi)]
    thetas, weights = [], []
    for a, b in intervals:
        if b <= a:
            continue
        inner = []
        for t in bp:
            # lift t into (a, b) if some 2 pi shift lands there
            k = math.ceil((a - t) / two_pi)
            tt = t + k * two_pi
            if a < tt < b:
                inner.append(tt)
        edges = np.concatenate([[a], np.sort(inner), [b]])
        nodes, w = _gl_panels(edges, max(16, int(n_theta * (b - a) / two_pi)))
        thetas.append(nodes)
        weights.append(w * r)
    if not thetas:
        return np.empty(0), np.empty(0)
    return np.concatenate(thetas), np.concatenate(weights)


def domain_breakpoints(domain: Domain, x, r: float, n_scan: int = 720) -> np.ndarray:
    """Angles where dB(x, r) crosses the domain boundary, located by a scan
    followed by bisection on the membership predicate."""
    th = 2.0 * math.pi * np.arange(n_scan + 1) / n_scan
    pts = np.asarray(x, float) + r * np.stack([np.cos(th), np.sin(th)], -1)
    m = domain.contains(pts)
    idx = np.nonzero(m[:-1] != m[1:])[0]
    out = []
    for i in idx:
        a, b = th[i], th[i + 1]
        ma = m[i]
        for _ in range(60):
            c = 0.5 * (a + b)
            mc = bool(domain.contains(np.asarray(x) + r * np.array([math.cos(c), math.sin(c)])))
            if mc == ma:
                a = c
            else:
                b = c
        out.append(0.5 * (a + b))
    return np.asarray(out)


def sphere_integral(f: ScalarField, x, r: float,
                    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    n_theta: int = DEFAULT_N_THETA,
                    intervals: Optional[Sequence] = None,
                    split_at_jumps: bool = False) -> float:
    """Integral of weight(theta) * f over the circle dB(x, r) (arc length).

    Parameters
    ----------
    weight
        Function of the angle array; ``None`` means 1.
    intervals
        Restrict to these angle intervals ``(a, b)`` with ``a < b``.
    split_at_jumps
        Place panel breaks where f or the domain indicator jump on the circle
        (uses the generator's breakpoints and a boundary scan).
    """
    x = np.asarray(x, float)
    bp = None
    if split_at_jumps:
        parts = [domain_breakpoints(f.domain, x, r)]
        if f.func is not None:
            parts.append(f.func.breakpoints_on_circle(x, r))
        bp = np.concatenate(parts)
    th, w = circle_nodes(x, r, n_theta, intervals, bp)
    if th.size == 0:
        return 0.0
    pts = x + r * np.stack([np.cos(th), np.sin(th)], axis=-1)
    vals = f.evaluate(pts)
    if weight is not None:
        vals = vals * weight(th)
    return float(math.fsum(vals * w))


# --------------------------------------------------------------------------
# derivatives and norms
# --------------------------------------------------------------------------

def gradient_fd(F: ScalarField, x, step: Optional[float] = None) -> np.ndarray:
    """Centered difference gradient of the raw samples (or generator) at x."""
    x = np.asarray(x, float)
    g = F.grid
    h = g.h if step is None else float(step)
    lo = np.asarray(g.origin, float) + g.h
    hi = np.asarray(g.upper, float) - g.h
    if np.any(x - h < lo - 1e-12 * g.h) or np.any(x + h > hi + 1e-12 * g.h):
        raise EdgeError(f"stencil at {x.tolist()} leaves the grid")
    e = np.eye(2) * h
    pts = np.stack([x + e[0], x - e[0], x + e[1], x - e[1]])
    v = F.raw(pts)
    return np.array([(v[0] - v[1]) / (2 * h), (v[2] - v[3]) / (2 * h)])


def gradient_field(values: np.ndarray, h: float) -> np.ndarray:
    """Centered differences on a cell array; (ny, nx, 2) with NaN wherever a
    neighbour is NaN or off the grid."""
    v = np.asarray(values, float)
    gx = np.full(v.shape, np.nan)
    gy = np.full(v.shape, np.nan)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
    return np.stack([gx, gy], axis=-1)


def _norm(vals: np.ndarray, p: float, cell_area: float) -> float:
    a = np.abs(np.asarray(vals, float).ravel())
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise ParameterError("p must be at least 1")
    return math.fsum((a ** p * cell_area).tolist()) ** (1.0 / p)


def lp_norm(F, p: float, mask: Optional[np.ndarray] = None, h: Optional[float] = None) -> float:
    """(sum |F|^p h^2)^(1/p) over cells in the domain; max for p = inf.

    ``F`` is a ScalarField, or a bare array together with ``mask`` and ``h``.
    """
    if not (p == math.inf or p >= 1):
        raise ParameterError("p must be at least 1")
    if isinstance(F, ScalarField):
        vals = F.values
        m = F.inside if mask is None else (F.inside & mask)
        h = F.grid.h
    else:
        vals = np.asarray(F, float)
        m = np.ones(vals.shape, bool) if mask is None else mask
        if h is None:
            raise ParameterError("array norms need the grid spacing")
    return _norm(vals[m], p, h * h)


def w11_norm(f: ScalarField) -> float:
    """||f||_1 + || |grad f| ||_1 over the domain, with centered differences
    of the raw samples (one-sided on the outermost cells)."""
    v = f.values
    h = f.grid.h
    gy, gx = np.gradient(v, h)
    mag = np.hypot(gx, gy)
    return lp_norm(f, 1) + _norm(mag[f.inside], 1, h * h)
