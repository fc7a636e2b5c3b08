"""Domains in the plane and their distance geometry.

A domain is an open set with non-empty complement.  Every domain answers
the same vectorized queries on arrays of points of shape ``(..., 2)``:

* ``contains`` -- membership in the open set,
* ``nearest`` -- distance to the complement, a nearest complement point and
  whether that point is unique (up to the tolerance ``tau_b``),
* ``bbox`` -- a window used for sampling and rasterizing.

The module-level functions ``distance``, ``nearest_boundary``,
``grad_distance`` and ``curvature_radius`` are the point-query API and raise
:class:`DomainError` for points outside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import _kernels
from .errors import ConfigurationError, DomainError

TAU_B = 1e-9


def _pts(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _lexmin(cands: np.ndarray, ok: np.ndarray) -> np.ndarray:
    """Lexicographically smallest candidate per row among those flagged ok.

    cands: (N, M, 2), ok: (N, M) with at least one True per row.
    """
    big = np.where(ok, 0.0, np.inf)
    c0 = cands[..., 0] + big
    m0 = c0.min(axis=1, keepdims=True)
    ok2 = ok & (cands[..., 0] <= m0 + TAU_B)
    c1 = np.where(ok2, cands[..., 1], np.inf)
    idx = np.argmin(c1, axis=1)
    return cands[np.arange(cands.shape[0]), idx]


def _select_candidates(cands: np.ndarray, dist: np.ndarray, tau: float):
    """Reduce (N, M) candidate contacts to (delta, b, unique)."""
    dmin = dist.min(axis=1)
    ok = dist <= dmin[:, None] + tau
    b = _lexmin(cands, ok)
    spread = np.where(ok, np.linalg.norm(cands - b[:, None, :], axis=-1), 0.0)
    unique = spread.max(axis=1) <= tau
    return dmin, b, unique


@dataclass(frozen=True)
class GridSpec:
    """Regular cell grid: ``dims = (nx, ny)`` cells of side ``h`` whose lower
    left corner is ``origin``."""

    origin: tuple
    h: float
    dims: tuple

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError("grid spacing must be positive")
        if min(self.dims) < 8:
            raise ConfigurationError("grids need at least 8 cells per axis")

    @classmethod
    def covering(cls, lo, hi, n: int) -> "GridSpec":
        """Grid with ``n`` cells along the longer side of the box [lo, hi]."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        ext = hi - lo
        h = float(ext.max() / n)
        dims = tuple(int(round(e / h)) for e in ext)
        return cls(origin=(float(lo[0]), float(lo[1])), h=h, dims=dims)

    @property
    def nx(self) -> int:
        return int(self.dims[0])

    @property
    def ny(self) -> int:
        return int(self.dims[1])

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nx)

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape (ny, nx, 2)."""
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        X, Y = np.meshgrid(x, y)
        return np.stack([X, Y], axis=-1)

    def cell_of(self, p) -> tuple:
        p = _pts(p)
        ix = np.floor((p[..., 0] - self.origin[0]) / self.h).astype(int)
        iy = np.floor((p[..., 1] - self.origin[1]) / self.h).astype(int)
        return iy, ix

    def center_of(self, iy, ix) -> np.ndarray:
        return np.stack([self.origin[0] + (np.asarray(ix) + 0.5) * self.h,
                         self.origin[1] + (np.asarray(iy) + 0.5) * self.h], axis=-1)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.origin, self.h / factor,
                        (self.nx * factor, self.ny * factor))

    @property
    def upper(self) -> tuple:
        return (self.origin[0] + self.nx * self.h, self.origin[1] + self.ny * self.h)


@dataclass(frozen=True)
class BoundaryContact:
    """Result of a nearest-boundary query at one point."""

    delta: float
    b: np.ndarray
    unique: bool


class Domain:
    """Base class; subclasses implement ``contains``, ``nearest`` and ``bbox``."""

    name = "domain"
    convex_complement = False
    bounded = True
    tau_b = TAU_B

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def nearest(self, x):
        """Vectorized (delta, b, unique); delta is 0 and b = x outside."""
        raise NotImplementedError

    def bbox(self):
        raise NotImplementedError

    def delta(self, x) -> np.ndarray:
        """Distance to the complement; 0 outside the domain."""
        return self.nearest(x)[0]

    @property
    def diameter(self) -> float:
        if not self.bounded:
            return math.inf
        lo, hi = self.bbox()
        return float(np.linalg.norm(np.subtract(hi, lo)))

    def grid(self, n: int) -> GridSpec:
        lo, hi = self.bbox()
        return GridSpec.covering(lo, hi, n)

    def describe(self) -> dict:
        return {"type": type(self).__name__}

    def _flatten(self, x):
        x = _pts(x)
        return x.reshape(-1, 2), x.shape[:-1]


@dataclass(frozen=True)
class Disk(Domain):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    name = "disk"

    def contains(self, x):
        x = _pts(x)
        return np.linalg.norm(x - np.asarray(self.center), axis=-1) < self.radius

    def nearest(self, x):
        p, shape = self._flatten(x)
        c = np.asarray(self.center, float)
        v = p - c
        r = np.linalg.norm(v, axis=-1)
        inside = r < self.radius
        unique = r > self.tau_b
        # near the center the contact is flagged as a tie, but any r > 0 still
        # has a well-defined nearest point at distance delta
        safe = np.where(r > 0, r, 1.0)
        dirn = np.where((r > 0)[:, None], v / safe[:, None], np.array([-1.0, 0.0]))
        b = c + self.radius * dirn
        delta = np.where(inside, self.radius - r, 0.0)
        b = np.where(inside[:, None], b, p)
        unique = unique | ~inside
        return delta.reshape(shape), b.reshape(shape + (2,)), unique.reshape(shape)

    def bbox(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def describe(self):
        return {"type": "Disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HalfPlane(Domain):
    """``{x : x . inward_normal > offset}``."""

    inward_normal: tuple = (0.0, 1.0)
    offset: float = 0.0
    window: Optional[tuple] = None

    name = "halfplane"
    convex_complement = True
    bounded = False

    def __post_init__(self):
        nrm = np.asarray(self.inward_normal, float)
        if abs(np.linalg.norm(nrm) - 1.0) > 1e-12:
            object.__setattr__(self, "inward_normal", tuple(nrm / np.linalg.norm(nrm)))

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.inward_normal, float)

    def contains(self, x):
        return _pts(x) @ self.normal > self.offset

    def nearest(self, x):
        p = _pts(x)
        s = p @ self.normal - self.offset
        delta = np.maximum(s, 0.0)
        b = p - delta[..., None] * self.normal
        return delta, b, np.ones(delta.shape, dtype=bool)

    def sup_nearest(self, x):
        """Distance to the complement in the max-norm and the chosen nearest
        point (Euclidean-closest among the max-norm minimizers)."""
        p = _pts(x)
        nrm = self.normal
        s = np.maximum(p @ nrm - self.offset, 0.0)
        rinf = s / np.abs(nrm).sum()
        b = p - rinf[..., None] * np.sign(np.where(np.abs(nrm) < 1e-15, 0.0, nrm))
        return rinf, b

    def bbox(self):
        if self.window is not None:
            lo, hi = self.window
            return np.asarray(lo, float), np.asarray(hi, float)
        foot = self.offset * self.normal
        c = foot + self.normal
        return c - 1.0, c + 1.0

    def describe(self):
        return {"type": type(self).__name__, "inward_normal": list(self.inward_normal),
                "offset": self.offset}


class DiagonalHalfPlane(HalfPlane):
    """``{(x, y) : x < y}``."""

    name = "diagonal_halfplane"

    def __init__(self, window=None):
        super().__init__((-1.0 / math.sqrt(2), 1.0 / math.sqrt(2)), 0.0, window)

    def bbox(self):
        if self.window is not None:
            return super().bbox()
        return np.array([-1.0, -1.0]), np.array([1.0, 1.0])


@dataclass(frozen=True)
class BallComplement(Domain):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    window: Optional[tuple] = None

    name = "ball_complement"
    convex_complement = True
    bounded = False

    def contains(self, x):
        return np.linalg.norm(_pts(x) - np.asarray(self.center), axis=-1) > self.radius

    def nearest(self, x):
        p, shape = self._flatten(x)
        c = np.asarray(self.center, float)
        v = p - c
        r = np.linalg.norm(v, axis=-1)
        inside = r > self.radius
        safe = np.where(r > 0, r, 1.0)
        b = np.where(inside[:, None], c + self.radius * v / safe[:, None], p)
        delta = np.where(inside, r - self.radius, 0.0)
        return (delta.reshape(shape), b.reshape(shape + (2,)),
                np.ones(shape, dtype=bool))

    def bbox(self):
        if self.window is not None:
            lo, hi = self.window
            return np.asarray(lo, float), np.asarray(hi, float)
        c = np.asarray(self.center, float)
        return c - 3 * self.radius, c + 3 * self.radius

    def describe(self):
        return {"type": "BallComplement", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Annulus(Domain):
    """``{inner < |x - center| < outer}``; its curvature radius is
    ``(outer - inner) / 2``."""

    center: tuple = (0.0, 0.0)
    inner: float = 0.5
    outer: float = 1.0

    name = "annulus"

    def contains(self, x):
        r = np.linalg.norm(_pts(x) - np.asarray(self.center), axis=-1)
        return (r > self.inner) & (r < self.outer)

    def nearest(self, x):
        p, shape = self._flatten(x)
        c = np.asarray(self.center, float)
        v = p - c
        r = np.linalg.norm(v, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        u = v / safe[:, None]
        cands = np.stack([c + self.inner * u, c + self.outer * u], axis=1)
        dist = np.stack([r - self.inner, self.outer - r], axis=1)
        delta, b, unique = _select_candidates(cands, dist, self.tau_b)
        inside = (r > self.inner) & (r < self.outer)
        delta = np.where(inside, delta, 0.0)
        b = np.where(inside[:, None], b, p)
        return delta.reshape(shape), b.reshape(shape + (2,)), unique.reshape(shape)

    def bbox(self):
        c = np.asarray(self.center, float)
        return c - self.outer, c + self.outer

    def describe(self):
        return {"type": "Annulus", "center": list(self.center), "inner": self.inner,
                "outer": self.outer}


def _segment_feet(p, a, b):
    """Closest points on segments [a_k, b_k] to points p: (N, K, 2)."""
    ab = b - a
    t = ((p[:, None, :] - a[None]) * ab[None]).sum(-1) / (ab * ab).sum(-1)[None]
    t = np.clip(t, 0.0, 1.0)
    return a[None] + t[..., None] * ab[None]


@dataclass(frozen=True)
class ConvexPolygon(Domain):
    """Interior (``side='interior'``) or exterior of a convex polygon."""

    vertices: tuple = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
    side: str = "interior"
    window: Optional[tuple] = None

    name = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, float)
        if v.ndim != 2 or v.shape[0] < 3:
            raise ConfigurationError("polygon needs at least three vertices")
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 < 0:
            object.__setattr__(self, "vertices", tuple(map(tuple, v[::-1])))
        if self.side not in ("interior", "exterior"):
            raise ConfigurationError("side must be 'interior' or 'exterior'")

    @property
    def convex_complement(self):
        return self.side == "exterior"

    @property
    def bounded(self):
        return self.side == "interior"

    def _inside_closed(self, p):
        v = np.asarray(self.vertices, float)
        e = np.roll(v, -1, axis=0) - v
        rel = p[..., None, :] - v
        cross = e[:, 0] * rel[..., 1] - e[:, 1] * rel[..., 0]
        return cross

    def contains(self, x):
        cross = self._inside_closed(_pts(x))
        if self.side == "interior":
            return np.all(cross > 0, axis=-1)
        return np.any(cross < 0, axis=-1)

    def nearest(self, x):
        p, shape = self._flatten(x)
        v = np.asarray(self.vertices, float)
        feet = _segment_feet(p, v, np.roll(v, -1, axis=0))
        dist = np.linalg.norm(feet - p[:, None, :], axis=-1)
        delta, b, unique = _select_candidates(feet, dist, self.tau_b)
        inside = self.contains(p)
        delta = np.where(inside, delta, 0.0)
        b = np.where(inside[:, None], b, p)
        unique = unique | ~inside
        return delta.reshape(shape), b.reshape(shape + (2,)), unique.reshape(shape)

    def bbox(self):
        if self.window is not None:
            lo, hi = self.window
            return np.asarray(lo, float), np.asarray(hi, float)
        v = np.asarray(self.vertices, float)
        lo, hi = v.min(axis=0), v.max(axis=0)
        if self.side == "exterior":
            pad = (hi - lo).max()
            return lo - pad, hi + pad
        return lo, hi

    def describe(self):
        return {"type": "ConvexPolygon", "vertices": [list(q) for q in self.vertices],
                "side": self.side}


@dataclass(frozen=True)
class PuncturedDisk(Domain):
    """The unit disk with the origin and the points (0, 2^k), k < 0, removed.

    It has interior balls everywhere but no uniform curvature bound.  Only
    the punctures with k >= ``k_min`` are modelled; below that they are
    closer together than double precision can resolve near the origin.
    """

    k_min: int = -60

    name = "punctured_disk"

    @property
    def punctures(self) -> np.ndarray:
        ks = np.arange(-1, self.k_min - 1, -1, dtype=float)
        pts = np.stack([np.zeros_like(ks), 2.0 ** ks], axis=1)
        return np.vstack([[0.0, 0.0], pts])

    def contains(self, x):
        p = _pts(x)
        r = np.linalg.norm(p, axis=-1)
        hit = np.any(np.all(p[..., None, :] == self.punctures, axis=-1), axis=-1)
        return (r < 1.0) & ~hit

    def nearest(self, x):
        p, shape = self._flatten(x)
        r = np.linalg.norm(p, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        circ = np.where((r > 0)[:, None], p / safe[:, None], np.array([-1.0, 0.0]))
        cands = np.concatenate(
            [circ[:, None, :], np.broadcast_to(self.punctures, (p.shape[0],) + self.punctures.shape)],
            axis=1)
        dist = np.linalg.norm(cands - p[:, None, :], axis=-1)
        delta, b, unique = _select_candidates(cands, dist, self.tau_b)
        inside = self.contains(p)
        delta = np.where(inside, delta, 0.0)
        b = np.where(inside[:, None], b, p)
        unique = unique | ~inside
        return delta.reshape(shape), b.reshape(shape + (2,)), unique.reshape(shape)

    def bbox(self):
        return np.array([-1.0, -1.0]), np.array([1.0, 1.0])

    def describe(self):
        return {"type": "PuncturedDisk", "k_min": self.k_min}


class RasterMask(Domain):
    """Union of the grid cells flagged inside.

    The complement is the union of the remaining cells and everything off the
    grid.  Distances are measured to the nearest outside cell center and
    then reduced by h/2, which places the boundary on cell edges to within
    one cell.  The cell-center field comes from a two-pass exact Euclidean
    distance transform computed once at construction.
    """

    name = "raster"

    def __init__(self, grid: GridSpec, inside):
        inside = np.asarray(inside, dtype=bool)
        if inside.shape != grid.shape:
            raise ConfigurationError(f"mask shape {inside.shape} != grid shape {grid.shape}")
        if not inside.any():
            raise ConfigurationError("raster mask has no inside cells")
        self.grid = grid
        self.inside = inside
        self.tau_b = grid.h
        padded = np.ones((grid.ny + 2, grid.nx + 2), dtype=bool)
        padded[1:-1, 1:-1] = ~inside
        d2, fy, fx = _kernels.edt_squared(padded)
        self._edt_cells = np.sqrt(d2[1:-1, 1:-1])
        self._feat = (fy[1:-1, 1:-1] - 1, fx[1:-1, 1:-1] - 1)
        # outside cells (including the padding ring) adjacent to an inside cell
        nb = np.zeros_like(padded)
        core = ~padded
        nb[1:, :] |= core[:-1, :]
        nb[:-1, :] |= core[1:, :]
        nb[:, 1:] |= core[:, :-1]
        nb[:, :-1] |= core[:, 1:]
        by, bx = np.nonzero(nb & padded)
        self._bcells = grid.center_of(by - 1, bx - 1)
        self._tree = cKDTree(self._bcells)

    @classmethod
    def from_domain(cls, dom: Domain, grid: GridSpec) -> "RasterMask":
        return cls(grid, dom.contains(grid.centers()))

    @classmethod
    def from_pgm(cls, path, grid: Optional[GridSpec] = None) -> "RasterMask":
        """Read a P2/P5 graymap; pixels > 0 are inside.  The first image row
        is the top of the domain."""
        from PIL import Image

        arr = np.asarray(Image.open(Path(path)))
        if arr.ndim != 2:
            raise ConfigurationError("expected a single-channel graymap")
        inside = arr[::-1] > 0
        if grid is None:
            ny, nx = inside.shape
            grid = GridSpec((0.0, 0.0), 1.0 / max(nx, ny), (nx, ny))
        return cls(grid, inside)

    def contains(self, x):
        iy, ix = self.grid.cell_of(x)
        ok = (iy >= 0) & (iy < self.grid.ny) & (ix >= 0) & (ix < self.grid.nx)
        out = np.zeros(np.shape(iy), dtype=bool)
        out[ok] = self.inside[iy[ok], ix[ok]]
        return out

    def cell_distance(self) -> np.ndarray:
        """Distance field at cell centers (0 on outside cells)."""
        return np.where(self.inside, self._edt_cells * self.grid.h - 0.5 * self.grid.h, 0.0)

    def nearest(self, x):
        p, shape = self._flatten(x)
        h = self.grid.h
        d1, i1 = self._tree.query(p, k=1)
        c = self._bcells[i1]
        # candidates that tie within tau_b but lie on a separate piece of boundary
        unique = np.ones(p.shape[0], dtype=bool)
        groups = self._tree.query_ball_point(p, d1 + self.tau_b)
        for n, g in enumerate(groups):
            if len(g) > 1:
                spread = np.linalg.norm(self._bcells[g] - c[n], axis=-1).max()
                unique[n] = spread <= 2.0 * math.sqrt(2.0 * d1[n] * h) + 2.0 * h
        inside = self.contains(p)
        delta = np.where(inside, np.maximum(d1 - 0.5 * h, 0.0), 0.0)
        safe = np.where(d1 > 0, d1, 1.0)
        b = c + (0.5 * h) * (p - c) / safe[:, None]
        b = np.where(inside[:, None], b, p)
        unique = unique | ~inside
        return delta.reshape(shape), b.reshape(shape + (2,)), unique.reshape(shape)

    def bbox(self):
        return np.asarray(self.grid.origin, float), np.asarray(self.grid.upper, float)

    def describe(self):
        return {"type": "RasterMask", "dims": list(self.grid.dims), "h": self.grid.h,
                "inside_cells": int(self.inside.sum())}


class ShiftedDistance(Domain):
    """Test-mode wrapper that adds ``shift`` to the distance wherever
    ``x . direction > 0``; used to check that the invariant suite notices a
    corrupted distance function."""

    def __init__(self, base: Domain, shift: float, direction=(1.0, 0.0)):
        self.base = base
        self.shift = float(shift)
        self.direction = np.asarray(direction, float)
        self.name = base.name + "_shifted"
        self.convex_complement = base.convex_complement
        self.bounded = base.bounded

    def contains(self, x):
        return self.base.contains(x)

    def nearest(self, x):
        delta, b, unique = self.base.nearest(x)
        hit = (_pts(x) @ self.direction > 0) & (delta > 0)
        return delta + self.shift * hit, b, unique

    def bbox(self):
        return self.base.bbox()

    def __getattr__(self, item):
        return getattr(self.base, item)


# --------------------------------------------------------------------------
# point-query API
# --------------------------------------------------------------------------

def _require_inside(dom: Domain, x) -> np.ndarray:
    x = _pts(x)
    if x.shape != (2,):
        raise ValueError("expected a single point of shape (2,)")
    if not bool(dom.contains(x)):
        raise DomainError(f"point {x.tolist()} is not in the domain")
    return x


def distance(dom: Domain, x) -> float:
    """delta(x) = dist(x, complement)."""
    x = _require_inside(dom, x)
    return float(dom.nearest(x)[0])


def nearest_boundary(dom: Domain, x) -> BoundaryContact:
    x = _require_inside(dom, x)
    d, b, u = dom.nearest(x)
    return BoundaryContact(float(d), np.asarray(b, float), bool(u))


def grad_distance(dom: Domain, x) -> Optional[np.ndarray]:
    """(x - b_x) / delta(x), or None where the nearest point is not unique."""
    x = _require_inside(dom, x)
    c = nearest_boundary(dom, x)
    if not c.unique:
        return None
    return (x - c.b) / c.delta


def sample_points(dom: Domain, count: int, seed: int = 0, min_delta: float = 0.0,
                  box=None, max_delta: float = math.inf) -> np.ndarray:
    """First ``count`` points of a Halton sequence in ``box`` (default
    ``dom.bbox()``) that lie in the domain with min_delta <= delta <= max_delta.
    Sets for growing counts are nested."""
    lo, hi = dom.bbox() if box is None else box
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    sampler = qmc.Halton(d=2, scramble=seed != 0, seed=seed or None)
    out = []
    have = 0
    for _ in range(200):
        u = sampler.random(max(256, 2 * count))
        p = lo + u * (hi - lo)
        ok = dom.contains(p)
        if min_delta > 0 or math.isfinite(max_delta):
            d = dom.delta(p)
            ok &= (d >= min_delta) & (d <= max_delta)
        out.append(p[ok])
        have += int(ok.sum())
        if have >= count:
            break
    pts = np.concatenate(out)[:count] if out else np.empty((0, 2))
    if pts.shape[0] < count:
        raise ConfigurationError(f"could only sample {pts.shape[0]} of {count} points")
    return pts


def _tangent_ball_fits(dom: Domain, b, n, R, tol):
    c = b + R[:, None] * n
    ok = dom.contains(c)
    d = dom.delta(c)
    return ok & (d >= R * (1.0 - tol) - getattr(dom, "_fit_slack", 0.0))


def curvature_radius(dom: Domain, sample_count: int, rtol: float = 1e-3,
                     seed: int = 0) -> float:
    """Largest R such that the tangent balls B(b_x + R (x - b_x)/delta, R)
    lie in the domain for every sampled x; ``inf`` when no finite bound is
    found (convex complement)."""
    if sample_count < 1:
        raise ConfigurationError("sample_count must be positive")
    x = sample_points(dom, sample_count, seed=seed)
    delta, b, _ = dom.nearest(x)
    n = (x - b) / delta[:, None]
    lo_box, hi_box = dom.bbox()
    scale = float(np.linalg.norm(np.subtract(hi_box, lo_box)))
    tol = 1e-9
    if dom.convex_complement:
        cap = np.full(len(x), 1e6 * scale)
        if np.all(_tangent_ball_fits(dom, b, n, cap, tol)):
            return math.inf
    hi = np.full(len(x), 2.0 * scale)
    lo = np.zeros(len(x))
    # every sample needs its own bracket; R = delta(x) always fits when b_x is a
    # nearest point, which gives a non-trivial lower end
    fits = _tangent_ball_fits(dom, b, n, delta, tol)
    lo = np.where(fits, delta, lo)
    top = _tangent_ball_fits(dom, b, n, hi, tol)
    if np.all(top):
        return math.inf
    lo = np.where(top, hi, lo)
    for _ in range(200):
        active = hi > lo * (1.0 + rtol)
        active &= ~top
        if not active.any():
            break
        mid = np.where(lo > 0, np.sqrt(np.maximum(lo, 1e-300) * hi), 0.5 * hi)
        mid = np.where(lo > 0, mid, 0.5 * hi)
        ok = _tangent_ball_fits(dom, b, n, mid, tol)
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid, hi)
        if np.all(hi[active] < 1e-300):
            break
    return float(lo.min())


def curvature_evidence(dom: Domain, sample_counts: Sequence[int], seed: int = 0) -> dict:
    """Curvature-radius estimates for growing nested sample sets.

    A domain without a uniform curvature bound shows estimates that keep
    falling as samples are added.
    """
    est = [curvature_radius(dom, int(n), seed=seed) for n in sample_counts]
    finite = [e for e in est if math.isfinite(e)]
    monotone = all(a >= b for a, b in zip(est, est[1:]))
    shrink = (finite[-1] / finite[0]) if len(finite) >= 2 and finite[0] > 0 else 1.0
    return {"sample_counts": list(map(int, sample_counts)), "estimates": est,
            "monotone": monotone, "shrink_factor": shrink}


def lipschitz_violation(dom: Domain, pts: np.ndarray, slack: float = 0.0) -> float:
    """max over pairs of |delta(x) - delta(x')| - |x - x'| - slack (<= 0 when
    1-Lipschitz holds on the sample)."""
    d = dom.delta(pts)
    dd = np.abs(d[:, None] - d[None, :])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return float((dd - dist - slack).max())


DOMAIN_TYPES = {
    "Disk": Disk,
    "HalfPlane": HalfPlane,
    "DiagonalHalfPlane": DiagonalHalfPlane,
    "BallComplement": BallComplement,
    "ConvexPolygon": ConvexPolygon,
    "PuncturedDisk": PuncturedDisk,
    "Annulus": Annulus,
}


def domain_from_config(cfg: dict) -> Domain:
    """Build a domain from a config table such as
    ``{type = "Disk", center = [0, 0], radius = 1}``."""
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    if kind == "RasterMask":
        path = cfg.pop("path", None)
        if path is not None:
            grid = None
            if "grid" in cfg:
                g = cfg.pop("grid")
                grid = GridSpec(tuple(g["origin"]), float(g["h"]), tuple(g["dims"]))
            return RasterMask.from_pgm(path, grid)
        base = domain_from_config(cfg.pop("of"))
        n = int(cfg.pop("cells", 256))
        return RasterMask.from_domain(base, base.grid(n))
    if kind not in DOMAIN_TYPES:
        raise ConfigurationError(f"unknown domain type {kind!r}")
    for key in ("center", "inward_normal"):
        if key in cfg:
            cfg[key] = tuple(float(v) for v in cfg[key])
    if "vertices" in cfg:
        cfg["vertices"] = tuple(tuple(float(t) for t in v) for v in cfg["vertices"])
    if "window" in cfg:
        lo, hi = cfg["window"]
        cfg["window"] = (tuple(lo), tuple(hi))
    try:
        return DOMAIN_TYPES[kind](**cfg)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind}: {exc}") from exc
