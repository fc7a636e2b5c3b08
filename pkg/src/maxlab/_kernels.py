"""Compiled grid kernels.

Everything here works in plain arrays and scalars so that numba can compile
it; the public modules wrap these with domain-aware APIs.  Grid convention:
arrays are indexed ``[iy, ix]`` and cell ``(iy, ix)`` has its center at
``(x0 + (ix + 0.5) h, y0 + (iy + 0.5) h)``.  Balls and squares are open and
contain the cells whose centers lie strictly inside them.
"""

import math

import numpy as np
from numba import njit

BIG = 1e30


# --------------------------------------------------------------------------
# exact Euclidean distance transform (lower envelope of parabolas)
# --------------------------------------------------------------------------

@njit(cache=True)
def _edt_1d(f, d, arg):
    n = f.shape[0]
    v = np.empty(n, np.int64)
    z = np.empty(n + 1)
    k = -1
    for q in range(n):
        if f[q] >= BIG:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            d[q] = BIG
            arg[q] = -1
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        p = v[j]
        d[q] = (q - p) * (q - p) + f[p]
        arg[q] = p


@njit(cache=True)
def edt_squared(outside):
    """Squared distance (in cells) from every cell center to the nearest
    ``outside`` cell center, plus the row/column index of that cell."""
    ny, nx = outside.shape
    col_d = np.empty((ny, nx))
    col_arg = np.empty((ny, nx), np.int64)
    f = np.empty(ny)
    d = np.empty(ny)
    a = np.empty(ny, np.int64)
    for ix in range(nx):
        for iy in range(ny):
            f[iy] = 0.0 if outside[iy, ix] else BIG
        _edt_1d(f, d, a)
        for iy in range(ny):
            col_d[iy, ix] = d[iy]
            col_arg[iy, ix] = a[iy]
    out = np.empty((ny, nx))
    fy = np.empty((ny, nx), np.int64)
    fx = np.empty((ny, nx), np.int64)
    g = np.empty(nx)
    e = np.empty(nx)
    b = np.empty(nx, np.int64)
    for iy in range(ny):
        for ix in range(nx):
            g[ix] = col_d[iy, ix]
        _edt_1d(g, e, b)
        for ix in range(nx):
            out[iy, ix] = e[ix]
            fx[iy, ix] = b[ix]
            fy[iy, ix] = col_arg[iy, b[ix]] if b[ix] >= 0 else -1
    return out, fy, fx


# --------------------------------------------------------------------------
# ball sums by row prefix sums
# --------------------------------------------------------------------------

@njit(cache=True)
def ball_sum_count(prefix, x0, y0, h, cx, cy, r):
    """Sum of the cell values and the number of lattice cells (on or off the
    grid) in the open ball B((cx, cy), r).  ``prefix`` holds row-wise cumulative
    sums with a leading zero column."""
    ny = prefix.shape[0]
    nx = prefix.shape[1] - 1
    iy_lo = int(math.floor((cy - r - y0) / h - 0.5)) + 1
    iy_hi = int(math.ceil((cy + r - y0) / h - 0.5)) - 1
    s = 0.0
    c = 0
    r2 = r * r
    for iy in range(iy_lo, iy_hi + 1):
        dy = y0 + (iy + 0.5) * h - cy
        w2 = r2 - dy * dy
        if w2 <= 0.0:
            continue
        w = math.sqrt(w2)
        ix_lo = int(math.floor((cx - w - x0) / h - 0.5)) + 1
        ix_hi = int(math.ceil((cx + w - x0) / h - 0.5)) - 1
        if ix_hi < ix_lo:
            continue
        c += ix_hi - ix_lo + 1
        if 0 <= iy < ny:
            lo = max(ix_lo, 0)
            hi = min(ix_hi, nx - 1)
            if hi >= lo:
                s += prefix[iy, hi + 1] - prefix[iy, lo]
    return s, c


@njit(cache=True)
def ball_sums_many(prefix, x0, y0, h, cx, cy, r):
    n = cx.shape[0]
    s = np.empty(n)
    c = np.empty(n, np.int64)
    for i in range(n):
        s[i], c[i] = ball_sum_count(prefix, x0, y0, h, cx[i], cy[i], r[i])
    return s, c


# --------------------------------------------------------------------------
# exact discrete fractional maximal function
# --------------------------------------------------------------------------

@njit(cache=True)
def maximal_point(vals, x0, y0, h, cx, cy, rmax, alpha):
    """Exact supremum over r in (0, rmax) of r**alpha * mean(vals on B(c, r)).

    The cell-center ball mean only changes when r crosses the distance of a
    cell center, so the supremum is a maximum over those thresholds.  Returns
    (value, argmax radius, value of the boundary candidate r -> rmax).
    """
    ny, nx = vals.shape
    iy_lo = int(math.floor((cy - rmax - y0) / h - 0.5)) + 1
    iy_hi = int(math.ceil((cy + rmax - y0) / h - 0.5)) - 1
    ix_lo = int(math.floor((cx - rmax - x0) / h - 0.5)) + 1
    ix_hi = int(math.ceil((cx + rmax - x0) / h - 0.5)) - 1
    cnt = max(iy_hi - iy_lo + 1, 0) * max(ix_hi - ix_lo + 1, 0)
    d2 = np.empty(cnt)
    vv = np.empty(cnt)
    m = 0
    r2 = rmax * rmax
    for iy in range(iy_lo, iy_hi + 1):
        dy = y0 + (iy + 0.5) * h - cy
        for ix in range(ix_lo, ix_hi + 1):
            dx = x0 + (ix + 0.5) * h - cx
            q = dx * dx + dy * dy
            if q < r2:
                d2[m] = q
                if 0 <= iy < ny and 0 <= ix < nx:
                    vv[m] = vals[iy, ix]
                else:
                    vv[m] = 0.0
                m += 1
    if m == 0:
        return 0.0, rmax, 0.0
    order = np.argsort(d2[:m], kind="mergesort")
    best = -np.inf
    best_r = rmax
    last = 0.0
    s = 0.0
    c = 0
    tie = 1e-12 * h * h
    i = 0
    while i < m:
        q = d2[order[i]]
        j = i
        while j < m and d2[order[j]] <= q + tie:
            s += vv[order[j]]
            c += 1
            j += 1
        if j < m:
            t = math.sqrt(d2[order[j]])
        else:
            t = rmax
        val = t ** alpha * s / c
        if val >= best:
            best = val
            best_r = t
        last = val
        i = j
    return best, best_r, last


@njit(cache=True)
def maximal_field(vals, rmax_cells, h, alpha, di, dj, d2, group_end):
    """Exact discrete maximal function at every cell with rmax_cells > 0.

    (di, dj, d2) is a table of lattice offsets sorted by squared length (in
    cells) with ``group_end`` marking the last offset of each distance shell.
    Returns value, argmax radius and the boundary candidate, all in physical
    units; cells with rmax_cells <= 0 get NaN.
    """
    ny, nx = vals.shape
    out = np.full((ny, nx), np.nan)
    out_r = np.full((ny, nx), np.nan)
    out_a = np.full((ny, nx), np.nan)
    n_off = d2.shape[0]
    for iy in range(ny):
        for ix in range(nx):
            rc = rmax_cells[iy, ix]
            if not rc > 0.0:
                continue
            r2 = rc * rc
            s = 0.0
            c = 0
            best = -np.inf
            best_r = rc
            last = 0.0
            m = 0
            while m < n_off and d2[m] < r2:
                jy = iy + di[m]
                jx = ix + dj[m]
                if 0 <= jy < ny and 0 <= jx < nx:
                    s += vals[jy, jx]
                c += 1
                if group_end[m]:
                    if m + 1 < n_off and d2[m + 1] < r2:
                        t = math.sqrt(d2[m + 1])
                    else:
                        t = rc
                    val = (t * h) ** alpha * s / c
                    if val >= best:
                        best = val
                        best_r = t
                    last = val
                m += 1
            out[iy, ix] = best
            out_r[iy, ix] = best_r * h
            out_a[iy, ix] = last
    return out, out_r, out_a


@njit(cache=True)
def averaging_field(prefix, x0, y0, h, radius, alpha):
    ny = prefix.shape[0]
    nx = prefix.shape[1] - 1
    out = np.full((ny, nx), np.nan)
    for iy in range(ny):
        cy = y0 + (iy + 0.5) * h
        for ix in range(nx):
            r = radius[iy, ix]
            if not r > 0.0:
                continue
            cx = x0 + (ix + 0.5) * h
            s, c = ball_sum_count(prefix, x0, y0, h, cx, cy, r)
            out[iy, ix] = r ** alpha * s / c if c > 0 else 0.0
    return out


# --------------------------------------------------------------------------
# axis-parallel squares via summed-area tables
# --------------------------------------------------------------------------

@njit(cache=True)
def _sat_box(sat, iy0, iy1, ix0, ix1):
    ny = sat.shape[0] - 1
    nx = sat.shape[1] - 1
    a0 = max(iy0, 0)
    a1 = min(iy1, ny - 1)
    b0 = max(ix0, 0)
    b1 = min(ix1, nx - 1)
    if a1 < a0 or b1 < b0:
        return 0.0
    return sat[a1 + 1, b1 + 1] - sat[a0, b1 + 1] - sat[a1 + 1, b0] + sat[a0, b0]


@njit(cache=True)
def cube_maximal_point(sat, x0, y0, h, cx, cy, rmax, alpha):
    """Like ``maximal_point`` for open axis-parallel squares of half-side r.

    The center must be a cell center; the stencil for r in (i h, (i+1) h] is
    the (2i+1)^2 block around it.
    """
    ix = int(math.floor((cx - x0) / h))
    iy = int(math.floor((cy - y0) / h))
    best = -np.inf
    best_r = rmax
    last = 0.0
    i = 0
    while i * h < rmax:
        s = _sat_box(sat, iy - i, iy + i, ix - i, ix + i)
        c = (2 * i + 1) * (2 * i + 1)
        t = min((i + 1) * h, rmax)
        val = t ** alpha * s / c
        if val >= best:
            best = val
            best_r = t
        last = val
        i += 1
    return best, best_r, last


@njit(cache=True)
def cube_maximal_field(sat, x0, y0, h, rmax, alpha):
    ny = sat.shape[0] - 1
    nx = sat.shape[1] - 1
    out = np.full((ny, nx), np.nan)
    out_r = np.full((ny, nx), np.nan)
    out_a = np.full((ny, nx), np.nan)
    for iy in range(ny):
        for ix in range(nx):
            r = rmax[iy, ix]
            if not r > 0.0:
                continue
            cx = x0 + (ix + 0.5) * h
            cy = y0 + (iy + 0.5) * h
            v, rr, a = cube_maximal_point(sat, x0, y0, h, cx, cy, r, alpha)
            out[iy, ix] = v
            out_r[iy, ix] = rr
            out_a[iy, ix] = a
    return out, out_r, out_a


def offset_table(radius_cells):
    """Lattice offsets with length < radius_cells sorted by length."""
    r = int(math.ceil(radius_cells)) + 1
    j, i = np.mgrid[-r:r + 1, -r:r + 1]
    d2 = (i * i + j * j).astype(np.float64)
    keep = d2 < radius_cells * radius_cells + 1e-9
    di, dj, d2 = j[keep], i[keep], d2[keep]
    order = np.lexsort((dj, di, d2))
    di, dj, d2 = di[order], dj[order], d2[order]
    group_end = np.ones(d2.shape[0], dtype=np.bool_)
    group_end[:-1] = d2[1:] != d2[:-1]
    return (di.astype(np.int64), dj.astype(np.int64), d2, group_end)
