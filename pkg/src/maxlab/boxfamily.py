"""Weighted boundary averages of thin boxes on the upper half-plane.

The family ``f = 1 on (-d, d) x (0, d^s)`` sits on the boundary of
``{x2 > 0}``.  For x = (x1, x2) the largest ball and the largest
axis-parallel square centred at x inside the half-plane both have radius
x2, and the nearest boundary point is (x1, 0) in both the Euclidean and the
max-norm.  This module evaluates

* ``ball_B1(x)``: mean over dB(x, x2) of |y - b| / x2 * f(y),
* ``cube_B1(x)``: mean over dQ(x, x2 (1 - eta)) of |y - b| / x2 * f(y),

by Gauss-Legendre panels split at every jump of f and kink of the weight,
and the L^p norms of both over a window |x1| <= W, 0 < x2 <= W with
W = ``window_factor`` * d.  The square is shrunk by ``eta`` so its bottom
side lies inside the domain and sees the boundary trace of f.

Everything is analytic in the geometry; no grid is involved, which is
necessary because d^s reaches 2^-21 on the ladders of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_GL_CACHE = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_integral(fun, breaks: np.ndarray, order: int) -> np.ndarray:
    """Integrate fun over consecutive panels of ``breaks`` (shape (N, m),
    sorted along axis 1, NaN-free) for each of the N rows.

    ``fun`` maps an (N, P) array of abscissae to integrand values.
    """
    t, w = _gl(order)
    a = breaks[:, :-1]
    b = breaks[:, 1:]
    half = 0.5 * (b - a)
    nodes = (a[..., None] + half[..., None] * (t + 1.0)).reshape(len(breaks), -1)
    vals = fun(nodes).reshape(a.shape + (order,))
    return ((vals * w).sum(-1) * half).sum(-1)


@dataclass(frozen=True)
class BoxFamily:
    d: float
    s: float
    eta: float = 1e-12

    @property
    def height(self) -> float:
        return self.d ** self.s

    def f(self, y1, y2):
        return ((np.abs(y1) < self.d) & (y2 > 0) & (y2 < self.height)).astype(float)

    def f_norm_p(self, p: float) -> float:
        return (2.0 * self.d * self.height) ** (1.0 / p)

    # -- pointwise operators --------------------------------------------
    def cube_B1(self, x1, x2, order: int = 16) -> np.ndarray:
        x1 = np.atleast_1d(np.asarray(x1, float))
        x2 = np.atleast_1d(np.asarray(x2, float))
        r = x2
        rs = r * (1.0 - self.eta)
        H = self.height
        d = self.d
        bottom = x2 - rs  # height of the shrunk bottom side
        top = x2 + rs
        total = np.zeros_like(x1)

        # horizontal sides: y2 fixed, y1 in (x1 - rs, x1 + rs) cut to (-d, d),
        # weight sqrt((y1 - x1)^2 + y2^2) / r with a kink at y1 = x1
        for y2 in (bottom, top):
            active = (y2 > 0) & (y2 < H)
            lo = np.maximum(x1 - rs, -d)
            hi = np.minimum(x1 + rs, d)
            mid = np.clip(x1, lo, hi)
            br = np.stack([lo, mid, np.maximum(mid, hi)], axis=1)
            br = np.where(active[:, None] & (hi > lo)[:, None], br, 0.0)
            yy = y2[:, None]
            xx = x1[:, None]
            val = _panel_integral(lambda t: np.sqrt((t - xx) ** 2 + yy ** 2), br, order)
            total += val / r

        # vertical sides: y1 = x1 +- rs, y2 in (bottom, top) cut to (0, H)
        for sgn in (-1.0, 1.0):
            y1 = x1 + sgn * rs
            active = np.abs(y1) < d
            lo = np.maximum(bottom, 0.0)
            hi = np.minimum(top, H)
            br = np.stack([lo, np.maximum(lo, hi)], axis=1)
            br = np.where(active[:, None] & (hi > lo)[:, None], br, 0.0)
            dx = (y1 - x1)[:, None]
            val = _panel_integral(lambda t: np.sqrt(dx ** 2 + t ** 2), br, order)
            total += val / r
        return total / (8.0 * rs)

    def ball_B1(self, x1, x2, order: int = 16) -> np.ndarray:
        x1 = np.atleast_1d(np.asarray(x1, float))
        x2 = np.atleast_1d(np.asarray(x2, float))
        r = x2
        d = self.d
        H = self.height
        # angle measured from the downward direction (towards b), in (-pi, pi)
        # y = x + r (sin t, -cos t); weight |y - b| / r = 2 |sin(t/2)|
        cands = [np.zeros_like(x1), np.full_like(x1, -math.pi), np.full_like(x1, math.pi)]
        for c in (-d, d):
            s = (c - x1) / r
            ok = np.abs(s) < 1
            a = np.arcsin(np.clip(s, -1, 1))
            cands += [np.where(ok, a, 0.0), np.where(ok, math.pi - a, 0.0),
                      np.where(ok, -math.pi - a, 0.0)]
        cth = (x2 - H) / r
        ok = np.abs(cth) < 1
        a = np.arccos(np.clip(cth, -1, 1))
        cands += [np.where(ok, a, 0.0), np.where(ok, -a, 0.0)]
        br = np.clip(np.sort(np.stack(cands, axis=1), axis=1), -math.pi, math.pi)
        xx = x1[:, None]
        yy = x2[:, None]
        rr = r[:, None]

        def integrand(t):
            y1 = xx + rr * np.sin(t)
            y2 = yy - rr * np.cos(t)
            return 2.0 * np.abs(np.sin(0.5 * t)) * self.f(y1, y2)

        val = _panel_integral(integrand, br, order)
        return val / (2.0 * math.pi)

    # -- norms ------------------------------------------------------------
    def _x2_breaks(self, W: float, per_octave: int) -> np.ndarray:
        H = self.height
        lo = H * 2.0 ** -12
        n = int(math.ceil(math.log2(W / lo) * per_octave))
        br = set(np.geomspace(lo, W, n + 1).tolist())
        br.update([H / 2, H, self.d / 2, self.d, 2 * self.d])
        br = np.array(sorted(b for b in br if lo <= b <= W))
        return np.concatenate([[0.0], br])

    def norm_p(self, kind: str, p: float, window_factor: float = 2.0 ** 10,
               order: int = 12, per_octave: int = 2) -> float:
        """L^p norm of ``kind`` in {'cube', 'ball'} over the window."""
        W = window_factor * self.d
        op = self.cube_B1 if kind == "cube" else self.ball_B1
        d = self.d
        H = self.height
        t, w = _gl(order)
        x2b = self._x2_breaks(W, per_octave)
        tot = 0.0
        for a, b in zip(x2b[:-1], x2b[1:]):
            x2n = a + 0.5 * (b - a) * (t + 1)
            wx2 = 0.5 * (b - a) * w
            for x2, wy in zip(x2n, wx2):
                reach = x2 if kind == "cube" else (
                    math.sqrt(max(2 * x2 * H - H * H, 0.0)) if x2 > H / 2 else x2)
                ext = d + reach
                c = {0.0, d, -d, ext, -ext}
                for v in (x2 - d, x2 + d, d - x2):
                    if abs(v) < ext:
                        c.update([v, -v])
                if kind == "ball":
                    for v in (reach - d, d - reach):
                        if abs(v) < ext:
                            c.update([v, -v])
                br = np.array(sorted(c))
                a1, b1 = br[:-1], br[1:]
                half = 0.5 * (b1 - a1)
                x1n = (a1[:, None] + half[:, None] * (t + 1)).ravel()
                wx1 = (half[:, None] * w).ravel()
                vals = op(x1n, np.full_like(x1n, x2))
                tot += wy * float(np.sum(wx1 * np.abs(vals) ** p))
        return tot ** (1.0 / p)

    def ratio(self, kind: str, p: float, **kw) -> float:
        return self.norm_p(kind, p, **kw) / self.f_norm_p(p)
