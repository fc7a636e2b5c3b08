"""Local fractional maximal operator, averaging operators and cube variants."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxlab.decomposition import reconstruct_B
from maxlab.errors import DomainError, ParameterError
from maxlab.fields import Constant, Dilated, GaussianBumpSum, Linear, ScalarField
from maxlab.geometry import ConvexPolygon, Disk, HalfPlane, sample_points
from maxlab.maximal import (C_SPHERE, averaging_A, averaging_field_map, B_field_map, cube_B1,
                            cube_maximal, cube_maximal_field, derivative_bound_check,
                            global_fractional_maximal, grad_A_formula, local_fractional_maximal,
                            maximal_field_map, openness_check, sup_distance,
                            weighted_spherical_B)

DISK = Disk((0.0, 0.0), 1.0)
HP = HalfPlane((0.0, 1.0), 0.0, ((-2.0, 0.0), (2.0, 4.0)))
BUMPS = GaussianBumpSum(((0.2, 0.1), (-0.3, 0.25), (0.1, -0.4)), (0.12, 0.08, 0.15),
                        (1.0, 0.7, 1.2))


def field(spec, dom=DISK, n=128):
    return ScalarField.from_spec(spec, dom, dom.grid(n))


@pytest.fixture(scope="module")
def bumps():
    return field(BUMPS)


unit_point = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8)).filter(
    lambda p: 0.05 < math.hypot(*p) < 0.85)


# -- closed forms ------------------------------------------------------------------

def test_constant_field_maximal_examples():
    f = field(Constant(1.0))
    res = local_fractional_maximal(f, (0.25, 0.0), 1.0)
    assert res.value == pytest.approx(0.75, abs=1e-12)
    assert res.radius == pytest.approx(0.75)
    assert res.constrained
    res = local_fractional_maximal(f, (0.25, 0.0), 0.0)
    assert res.value == pytest.approx(1.0)
    assert res.constrained


def test_narrow_bump_is_unconstrained():
    x = np.array([0.1, 0.0])
    f = field(GaussianBumpSum((tuple(x),), (0.03,), (1.0,)), n=256)
    res = local_fractional_maximal(f, x, 0.0)
    assert not res.constrained
    assert res.radius < 0.2 * 0.9
    # brute-force radius sweep oracle
    oracle = local_fractional_maximal(f, x, 0.0, method="ladder", n_r=10_000)
    assert res.value == pytest.approx(oracle.value, rel=1e-3)
    assert res.radius == pytest.approx(oracle.radius, abs=2 * f.grid.h)


def test_averaging_examples():
    f = field(Constant(1.0), HP)
    assert averaging_A(f, (0.0, 0.6), 1.0)[0] == pytest.approx(0.6, abs=1e-12)
    assert averaging_A(f, (0.3, 1.1), 0.0)[0] == pytest.approx(1.0)
    f = field(Constant(1.0))
    assert averaging_A(f, (0.5, 0.0), 2.0)[0] == pytest.approx(0.25)


def test_weighted_spherical_examples():
    f = field(Constant(1.0), HP, 512)
    for x in [(0.0, 0.3), (1.0, 1.7), (-0.4, 0.05)]:
        assert weighted_spherical_B(f, x, 1.0).value == pytest.approx(4 / math.pi, abs=1e-3)
    assert weighted_spherical_B(field(Constant(0.0), HP), (0.0, 1.0), 1.0).value == 0.0
    g = field(Constant(1.0), DISK, 512)
    assert weighted_spherical_B(g, (0.5, 0.0), 1.0).value == pytest.approx(4 / math.pi,
                                                                           abs=1e-3)


def test_weighted_spherical_flags_symmetric_point():
    res = weighted_spherical_B(field(Constant(1.0)), (0.0, 0.0), 1.0)
    assert not res.unique


def test_derivative_bound_examples():
    f = field(Constant(1.0), HP, 256)
    r = derivative_bound_check(f, np.array([0.2, 0.7]), 1.0)
    assert r.L == pytest.approx(1.0, abs=1e-9)
    assert r.R >= 1.0
    assert r.ratio <= 1.0
    z = derivative_bound_check(field(Constant(0.0), HP), np.array([0.2, 0.7]), 1.0)
    assert (z.L, z.R, z.ratio) == (0.0, 0.0, 0.0)
    assert C_SPHERE == 2.0


def test_gradient_formula_matches_difference(bumps):
    x = np.array([0.3, -0.2])
    r = derivative_bound_check(bumps, x, 1.0, step=1e-4)
    np.testing.assert_allclose(np.linalg.norm(r.formula_gradient), r.L, rtol=1e-3)
    np.testing.assert_allclose(grad_A_formula(bumps, x, 1.0), r.formula_gradient)


def test_derivative_bound_rejects_symmetric_point(bumps):
    with pytest.raises(DomainError):
        derivative_bound_check(bumps, np.array([0.0, 0.0]), 1.0)


def test_alpha_range():
    f = field(Constant(1.0), n=32)
    with pytest.raises(ParameterError):
        local_fractional_maximal(f, (0.1, 0.0), 2.0)
    with pytest.raises(ParameterError):
        local_fractional_maximal(f, (0.1, 0.0), -0.5)


def test_reconstruction_examples():
    f = field(Constant(1.0), HP, 256)
    x = np.array([0.1, 0.7])
    r20 = reconstruct_B(f, x, 1.0, j_max=20)
    r30 = reconstruct_B(f, x, 1.0, j_max=30)
    assert 0.5 <= r20.ratio_to_B <= 4.0
    assert abs(r30.ratio_to_B - r20.ratio_to_B) <= 1e-3
    assert reconstruct_B(field(Constant(0.0), HP), x, 1.0).total == 0.0


# -- properties -----------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(unit_point, st.sampled_from([0.0, 0.5, 1.0, 1.5]))
def test_result_invariants_and_domination(bumps, p, alpha):
    res = local_fractional_maximal(bumps, p, alpha)
    d = float(DISK.delta(np.array(p)))
    assert 0 < res.radius <= d
    a, _ = averaging_A(bumps.abs(), p, alpha)
    assert res.value >= a - 1e-12
    assert res.constrained == (res.value - res.boundary_value
                               <= 2 * (bumps.grid.h / d) * abs(res.boundary_value) + 1e-12)


@settings(max_examples=20, deadline=None)
@given(unit_point, st.floats(0.0, 5.0))
def test_positive_homogeneity(bumps, p, c):
    a = local_fractional_maximal(bumps, p, 1.0).value
    b = local_fractional_maximal(c * bumps, p, 1.0).value
    assert b == pytest.approx(c * a, rel=1e-12, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(unit_point)
def test_sublinearity(bumps, p):
    g = field(Linear((1.0, -0.5), 0.2))
    lhs = local_fractional_maximal(bumps + g, p, 1.0).value
    rhs = local_fractional_maximal(bumps, p, 1.0).value + local_fractional_maximal(g, p, 1.0).value
    assert lhs <= rhs + 1e-12


@settings(max_examples=15, deadline=None)
@given(unit_point, st.sampled_from([0.0, 1.0, 1.5]))
def test_dilation_scaling(bumps, p, alpha):
    lam = 2.0
    big = Disk((0.0, 0.0), lam)
    g = ScalarField.from_spec(Dilated(BUMPS, lam), big, big.grid(128))
    a = local_fractional_maximal(bumps, p, alpha).value
    b = local_fractional_maximal(g, lam * np.asarray(p), alpha).value
    assert b == pytest.approx(lam ** alpha * a, rel=1e-9)


def test_global_dominates_local(bumps):
    for p in sample_points(DISK, 10, min_delta=0.05):
        assert global_fractional_maximal(bumps, p, 1.0) >= \
            local_fractional_maximal(bumps, p, 1.0).value - 1e-12


# -- field maps -------------------------------------------------------------------

def test_field_maps_match_pointwise():
    f = field(BUMPS, n=64)
    fm = maximal_field_map(f, 1.0)
    am = averaging_field_map(f, 1.0)
    bm = B_field_map(f, 1.0, n_theta=512)
    c = f.grid.centers()
    rng = np.random.default_rng(0)
    cells = np.argwhere(f.inside & (fm.delta > 3 * f.grid.h))
    for iy, ix in cells[rng.choice(len(cells), 20, replace=False)]:
        x = c[iy, ix]
        assert fm.value[iy, ix] == pytest.approx(local_fractional_maximal(f, x, 1.0).value,
                                                 rel=1e-12)
        assert am.value[iy, ix] == pytest.approx(averaging_A(f, x, 1.0)[0], rel=1e-12)
        assert bm.value[iy, ix] == pytest.approx(weighted_spherical_B(f, x, 1.0, 512).value,
                                                 rel=1e-10)
    assert np.all(np.isnan(fm.value[~f.inside]) | (fm.value[~f.inside] == 0))


def test_maximal_map_mask_leaves_other_cells_undefined():
    f = field(BUMPS, n=64)
    mask = np.zeros(f.grid.shape, bool)
    mask[30:34, 30:34] = True
    fm = maximal_field_map(f, 1.0, mask=mask)
    assert np.all(np.isfinite(fm.value[mask]))
    assert np.all(~np.isfinite(fm.value[~mask & f.inside]))


def test_unconstrained_set_is_open():
    f = field(BUMPS, n=128)
    fm = maximal_field_map(f, 1.0)
    sample = np.random.default_rng(0).permutation(int(np.sum(~fm.constrained & f.inside)))[:150]
    checked, violations, _ = openness_check(fm, sample=sample)
    assert checked > 0
    assert violations == 0


# -- cube variants ----------------------------------------------------------------

def test_cube_examples():
    f = field(Constant(1.0), HP)
    res = cube_maximal(f, (0.0, 0.5), 1.0)
    assert res.value == pytest.approx(0.5)
    assert res.radius == pytest.approx(0.5)
    assert res.constrained


def test_sup_distance():
    r, b = sup_distance(HP, (0.3, 0.5))
    assert r == pytest.approx(0.5)
    np.testing.assert_allclose(b, (0.3, 0.0))
    sq = ConvexPolygon()
    r, _ = sup_distance(sq, (0.3, 0.5))
    assert r == pytest.approx(0.3, abs=1e-12)
    r, _ = sup_distance(DISK, (0.0, 0.0))
    assert r == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_cube_B1_constant_half_plane():
    # weight |y - b| / r on the boundary of the unit square around (0, 1), b = (0, 0)
    f = field(Constant(1.0), HP, 256)
    val = cube_B1(f, (0.0, 1.0), n_per_side=128)
    bottom = 1.0
    top = math.sqrt(5) + 4 * math.asinh(0.5)
    sides = 2 * (math.sqrt(5) + math.asinh(2.0) / 2)
    exact = (bottom + top + sides) / 8.0
    # the kink of |s| on the bottom side limits Gauss-Legendre to second order
    assert val == pytest.approx(exact, rel=1e-5)


def test_cube_field_matches_pointwise():
    f = field(BUMPS, HP, 64)
    cm = cube_maximal_field(f, 1.0)
    c = f.grid.centers()
    for iy, ix in [(5, 10), (20, 30), (40, 2)]:
        assert cm.value[iy, ix] == pytest.approx(cube_maximal(f, c[iy, ix], 1.0).value,
                                                 rel=1e-12)
