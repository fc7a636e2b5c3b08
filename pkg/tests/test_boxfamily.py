"""Analytic thin-box averages on the upper half-plane."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from maxlab.boxfamily import BoxFamily
from maxlab.fields import BoxIndicator, ScalarField
from maxlab.geometry import HalfPlane
from maxlab.maximal import cube_B1

# mean of |y - b| / r over the unit square around (0, 1) with b = (0, 0)
CUBE_ONES = (1 + math.sqrt(5) + 4 * math.asinh(0.5)
             + 2 * (math.sqrt(5) + math.asinh(2.0) / 2)) / 8


def cube_oracle(x1, x2, d, H):
    """Adaptive-quadrature value of the square average with the box indicator."""
    r = x2

    def f(a, b):
        return float(abs(a) < d and 0 < b < H)

    def w(a, b):
        return math.hypot(a - x1, b) / r

    tot = 0.0
    for y2 in (0.0, 2 * x2):
        tot += quad(lambda t: w(t, y2) * f(t, y2 + 1e-15), x1 - r, x1 + r,
                    points=[x1, -d, d], limit=200)[0]
    for y1 in (x1 - r, x1 + r):
        tot += quad(lambda t: w(y1, t) * f(y1, t), 0.0, 2 * x2, points=[H], limit=200)[0]
    return tot / (8 * r)


def test_wide_box_recovers_constant_values():
    bf = BoxFamily(100.0, 1.0)
    assert bf.ball_B1(0.0, 1.0)[0] == pytest.approx(4 / math.pi, rel=1e-12)
    assert bf.cube_B1(0.0, 1.0)[0] == pytest.approx(CUBE_ONES, rel=1e-9)
    assert bf.f_norm_p(2.0) == pytest.approx(math.sqrt(2 * 100.0 * 100.0))


@pytest.mark.parametrize("x", [(0.1, 0.3), (0.45, 0.2), (-0.7, 0.4), (0.0, 0.05)])
def test_cube_matches_adaptive_quadrature(x):
    bf = BoxFamily(0.5, 1.5)
    assert bf.cube_B1(*x)[0] == pytest.approx(cube_oracle(*x, bf.d, bf.height), rel=1e-9)


def test_grid_cube_average_converges_to_analytic():
    hp = HalfPlane((0.0, 1.0), 0.0, ((-2.0, 0.0), (2.0, 4.0)))
    f = ScalarField.from_spec(BoxIndicator((-0.5, 0.0), (0.5, 0.5)), hp, hp.grid(128))
    exact = BoxFamily(0.5, 1.0).cube_B1(0.1, 0.3)[0]
    for n in (128, 512, 2048):
        assert abs(cube_B1(f, (0.1, 0.3), n_per_side=n) - exact) <= 1.0 / n


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(0.05, 2), st.floats(1, 3))
def test_averages_bounded_by_full_indicator(x1, x2, d, s):
    bf = BoxFamily(d, s)
    b = bf.ball_B1(x1, x2)[0]
    c = bf.cube_B1(x1, x2)[0]
    assert -1e-14 <= b <= 4 / math.pi + 1e-12
    assert -1e-14 <= c <= CUBE_ONES + 1e-9


def test_vectorized_evaluation_matches_scalar():
    bf = BoxFamily(0.3, 2.0)
    x1 = np.array([-0.4, 0.0, 0.25])
    x2 = np.array([0.05, 0.1, 0.3])
    vec = bf.ball_B1(x1, x2)
    for i in range(3):
        assert vec[i] == pytest.approx(bf.ball_B1(x1[i], x2[i])[0], rel=1e-14)


def test_unit_exponent_ratio_is_scale_invariant():
    # with s = 1 the family is a dilation of a single box, so the norm ratio is constant
    r = [BoxFamily(d, 1.0).ratio(kind, 2.0, window_factor=16) for d in (0.25, 0.5)
         for kind in ("ball", "cube")]
    assert r[0] == pytest.approx(r[2], rel=1e-10)
    assert r[1] == pytest.approx(r[3], rel=1e-10)
