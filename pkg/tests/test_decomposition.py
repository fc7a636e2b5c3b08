"""Shells, chord bands, sector integrals, the convex bodies E(y) and their probes."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxlab import decomposition as dec
from maxlab.errors import DomainError, ParameterError
from maxlab.fields import BallIndicator, Constant, ScalarField
from maxlab.geometry import BallComplement, Disk, GridSpec, HalfPlane, nearest_boundary

HP = HalfPlane((0.0, 1.0), 0.0, ((-4.0, 0.0), (4.0, 8.0)))
DISK = Disk((0.0, 0.0), 1.0)
BC = BallComplement((0.0, 0.0), 1.0, ((-4.0, -4.0), (4.0, 4.0)))


def one(dom=HP, n=256):
    return ScalarField.from_spec(Constant(1.0), dom, dom.grid(n))


# -- indices -----------------------------------------------------------------------

def test_shell_index_examples():
    assert dec.shell_index(1.0) == 0
    assert dec.shell_index(0.7) == -1
    assert dec.shell_index(2.0) == 1
    with pytest.raises(ParameterError):
        dec.shell_index(0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-12, 1e12))
def test_shell_index_brackets(d):
    k = dec.shell_index(d)
    assert 2.0 ** k <= d < 2.0 ** (k + 1)
    assert dec.shell_indices(np.array([d]))[0] == k


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-15, 2.0))
def test_chord_band_brackets(ratio):
    j = dec.chord_band(ratio)
    assert j >= 0
    assert 2.0 ** -j < ratio <= 2.0 ** (-j + 1)
    assert dec.chord_bands(np.array([ratio]))[0] == j


def test_chord_band_thresholds_are_right_closed():
    assert dec.chord_band(2.0) == 0
    assert dec.chord_band(1.0) == 1
    assert dec.chord_band(0.5) == 2
    with pytest.raises(ParameterError):
        dec.chord_band(0.0)


# -- sectors -----------------------------------------------------------------------

def test_sector_band_one_example():
    lo, hi = dec.band_angles(1)
    assert lo == pytest.approx(2 * math.asin(0.25)) and lo == pytest.approx(0.50536, abs=1e-5)
    assert hi == pytest.approx(math.pi / 3)
    sec = dec.angular_sector(HP, (0.0, 1.0), 1)
    assert len(sec.intervals) == 2
    assert sec.arc_length == pytest.approx(2 * (math.pi / 3 - 2 * math.asin(0.25)))


def test_sector_small_angle_limit():
    # each of the two arcs spans beta in (2^-j, 2^(1-j)] to first order
    ratios = [dec.band_arc_length(j, 1.0) / 2.0 ** -j for j in (10, 20, 30)]
    assert ratios[-1] == pytest.approx(2.0, rel=1e-8)
    assert abs(ratios[0] - 2) > abs(ratios[1] - 2) >= abs(ratios[2] - 2)


def test_sector_chord_law_by_rejection_sampling():
    x = np.array([0.3, 0.8])
    c = nearest_boundary(HP, x)
    th = np.random.default_rng(1).uniform(0, 2 * math.pi, 20000)
    y = x + c.delta * np.stack([np.cos(th), np.sin(th)], -1)
    ratio = np.linalg.norm(y - c.b, axis=1) / c.delta
    for j in range(0, 5):
        sec = dec.angular_sector(HP, x, j)
        inside = sec.contains_angle(th)
        in_band = (ratio > 2.0 ** -j) & (ratio <= 2.0 ** (1 - j))
        assert np.array_equal(inside, in_band)
        frac = sec.arc_length / (2 * math.pi * c.delta)
        assert inside.mean() == pytest.approx(frac, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 4))
def test_sectors_partition_the_circle(x1, x2):
    x = np.array([x1, x2])
    secs = [dec.angular_sector(HP, x, j) for j in range(64)]
    total = sum(s.arc_length for s in secs)
    assert total == pytest.approx(2 * math.pi * x2, rel=1e-12)
    th = np.linspace(0, 2 * math.pi, 1001)[:-1] + 1e-3
    count = sum(s.contains_angle(th).astype(int) for s in secs)
    assert np.all(count == 1)


def test_S_jk_examples():
    f = one()
    x = np.array([0.0, 1.0])
    assert dec.S_jk(f, x, 1, 0) == pytest.approx(2 * (math.pi / 3 - 2 * math.asin(0.25)),
                                                 rel=1e-10)
    assert dec.S_jk(f, x, 1, 0) == pytest.approx(1.0836, abs=1e-4)
    assert dec.S_jk(f, x, 1, 1) == 0.0  # x is not in shell 1
    # f supported in the half of the circle away from b_x is invisible to band 3
    g = ScalarField.from_spec(BallIndicator((0.0, 2.0), 0.3), HP, HP.grid(256))
    assert dec.S_jk(g, x, 3, 0) == pytest.approx(0.0, abs=1e-12)


# -- the convex bodies E(y) ---------------------------------------------------------

CONICS = [
    (DISK, np.array([0.3, 0.0]),
     lambda P, y: np.linalg.norm(P, axis=1) + np.linalg.norm(P - y, axis=1) - 1.0),
    (HalfPlane((0.0, 1.0), 0.0, ((-2.0, 0.0), (2.0, 4.0))), np.array([0.0, 0.5]),
     lambda P, y: P[:, 1] - (P[:, 0] ** 2 + y[1] ** 2) / (2 * y[1])),
    (BallComplement((0.0, 0.0), 1.0, ((-3.0, -3.0), (3.0, 3.0))), np.array([1.5, 0.2]),
     lambda P, y: np.linalg.norm(P, axis=1) - 1.0 - np.linalg.norm(P - y, axis=1)),
]


@pytest.mark.parametrize("dom,y,residual", CONICS, ids=["ellipse", "parabola", "hyperbola"])
def test_extracted_boundary_is_the_conic(dom, y, residual):
    h = dom.grid(256).h
    probe = dec.extract_P(dom, y, h)
    assert len(probe.points) > 100
    assert np.max(np.abs(residual(probe.points, y))) <= 2 * h
    assert np.max(probe.residuals()) <= 2 * h
    assert dec.boundary_check(probe) == 0


@pytest.mark.parametrize("dom,y", [(c[0], c[1]) for c in CONICS], ids=["disk", "hp", "bc"])
def test_midpoint_closure(dom, y):
    bad, n = dec.midpoint_closure(dom, y, 5000, seed=3)
    assert n == 5000 and bad == 0


def test_extract_rejects_outside_point():
    with pytest.raises(DomainError):
        dec.extract_P(DISK, np.array([2.0, 0.0]), 0.01)


def test_supporting_line_at_parabola_apex():
    dom, y, _ = CONICS[1]
    probe = dec.extract_P(dom, y, dom.grid(256).h)
    pts = probe.points
    apex = int(np.argmin(np.abs(pts[:, 0]) + 10 * (pts[:, 1] > y[1])))
    rep = dec.supporting_line_check(probe, apex)
    assert rep.passed
    tangent = pts[apex + 1] - pts[apex - 1]
    assert abs(tangent[1]) / np.linalg.norm(tangent) < 0.02


def test_supporting_lines_on_ellipse():
    dom, y, _ = CONICS[0]
    probe = dec.extract_P(dom, y, dom.grid(256).h)
    for i in range(5, len(probe.points) - 5, 37):
        assert dec.supporting_line_check(probe, i).passed


def test_parabola_measures_add_up_and_obey_bounds():
    dom, y, _ = CONICS[1]
    h = dom.grid(512).h
    probe = dec.extract_P(dom, y, h)
    table = probe.table()
    top = 4.0
    x1 = math.sqrt(2 * y[1] * top - y[1] ** 2)
    c = y[1]
    # arc length of x2 = (x1^2 + c^2) / (2c) over |x1| <= x1_max
    u = x1 / c
    exact = c * (u * math.sqrt(1 + u * u) + math.asinh(u))
    assert sum(table.values()) == pytest.approx(exact, abs=4 * h)
    for (j, k), L in table.items():
        assert dec.P_jk_measure(probe, j, k) == pytest.approx(L)
        assert L <= 2 * math.pi * 2.0 ** (k + 1)


def test_rough_integral_parabola_oracle():
    # y = (0, 1): on P(y), |x - y| = delta(x) = x2 = (x1^2 + 1) / 2 and the chord
    # ratio is sqrt(2 / x2); band j is 4^j <= x1^2 + 1 < 4^(j+1)
    dom = HalfPlane((0.0, 1.0), 0.0, ((-40.0, 0.0), (40.0, 80.0)))
    probe = dec.extract_P(dom, np.array([0.0, 1.0]), dom.grid(512).h)
    for j in range(0, 3):
        lo = math.sqrt(4.0 ** j - 1)
        hi = math.sqrt(4.0 ** (j + 1) - 1)
        exact = 4 * (math.asinh(hi) - math.asinh(lo))
        assert dec.rough_integral(probe, j) == pytest.approx(exact, rel=2e-3)
    assert dec.rough_integral(probe, 40) == 0.0


def test_rough_integral_disk_is_finite():
    probe = dec.extract_P(DISK, np.array([0.05, 0.0]), DISK.grid(256).h)
    for j in range(0, 9):
        v = dec.rough_integral(probe, j)
        assert math.isfinite(v) and v <= 8 * 2.0 ** j


# -- operator-norm probes -----------------------------------------------------------

def test_linf_probe_half_plane():
    # sup over shell k of the band arc 2 delta (beta_hi - beta_lo) / 2^(k - j)
    for j in range(0, 9):
        v = dec.opnorm_Linf_probe(HP, j, 0)
        lo, hi = dec.band_angles(j)
        assert v <= 2 * 2.0 * (hi - lo) * 2.0 ** j + 1e-12
        if j >= 1:
            assert 1.0 <= v <= 8.0
    assert dec.opnorm_Linf_probe(HP, 3, 5) == 0.0  # no sampled points in shell 5


def _loop_band_integrals(dom, y, eps, grid, j_max):
    out = {}
    for x in grid.centers().reshape(-1, 2):
        if not bool(dom.contains(x)):
            continue
        c = nearest_boundary(dom, x)
        dd = float(np.linalg.norm(x - y))
        if not (abs(dd - c.delta) < eps and dd > 0):
            continue
        cosg = (c.delta ** 2 + dd ** 2 - eps ** 2) / (2 * c.delta * dd)
        if cosg >= 1:
            continue
        g = math.acos(max(-1.0, cosg))
        phi = math.atan2(y[1] - x[1], y[0] - x[0])
        arc = [(phi - g, phi + g)]
        k = dec.shell_index(c.delta)
        for j in range(0, j_max + 1):
            ov = dec._arc_overlap(arc, dec.angular_sector(dom, x, j).intervals)
            if ov > 0:
                w = ov * c.delta * grid.h ** 2 / (math.pi * eps ** 2)
                out[(j, k)] = out.get((j, k), 0.0) + w
    return out


def test_small_ball_band_integrals_match_loop():
    y = np.array([0.2, 0.6])
    grid = GridSpec.covering((-1.5, 0.0), (1.5, 3.0), 96)
    eps = 4 * grid.h
    fast = dec.small_ball_band_integrals(HP, y, eps, grid)
    slow = _loop_band_integrals(HP, y, eps, grid, max(j for j, _ in fast))
    assert fast.keys() == slow.keys()
    for key in fast:
        assert fast[key] == pytest.approx(slow[key], rel=1e-9, abs=1e-14)


# -- annulus geometry and localization ------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 3), st.floats(0, 2 * math.pi))
def test_annulus_equality_on_half_plane(x1, x2, th):
    x = np.array([x1, x2])
    y = x + x2 * np.array([math.cos(th), math.sin(th)])
    rep = dec.annulus_check(HP, x, y)
    assert rep.holds
    assert rep.lhs == pytest.approx(rep.rhs, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.95), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_annulus_inequality_on_disk(r, phi, th):
    x = r * np.array([math.cos(phi), math.sin(phi)])
    d = 1 - r
    y = x + d * np.array([math.cos(th), math.sin(th)])
    assert dec.annulus_check(DISK, x, y, R=1.0).holds


def test_annulus_without_curvature_factor_fails_on_disk():
    x = np.array([0.5, 0.0])
    y = x + 0.5 * np.array([0.0, 1.0])
    assert not dec.annulus_check(DISK, x, y).holds
    assert dec.annulus_check(DISK, x, y, R=1.0).holds


@pytest.mark.parametrize("dom", [HP, BC], ids=["halfplane", "ball_complement"])
def test_band_localization(dom):
    for j in range(1, 7):
        s = dec.localization_samples(dom, j, 0, 20, seed=j)
        assert len(s) > 0
        dist = s[:, 2]
        assert np.all(dist >= 0.5 * 2.0 ** (-2 * j))
        assert np.all(dist <= 4 * 2.0 ** (-j + 1))
