import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from halfspace.errors import HalfSpaceError
from halfspace.fields import ScalarField, expression_field, linear_field
from halfspace.geometry import constants
from halfspace.measures import load_measure
from halfspace.potentials import RepresentationTriple, represent
from halfspace.rings import (
    ball_limit_integral,
    classical_ring_integral,
    default_r0,
    green_ring_integral,
    green_ring_weight_integral,
    ring_equivalent_integral,
    ring_plus_integral,
    scan,
    trailing_slope,
    verdict_from,
)


def one(dim):
    return ScalarField(dim, lambda p: np.ones(p.shape[0]), name="1")


def e_n(dim, a=1.0):
    x = np.zeros(dim)
    x[-1] = a
    return x


@pytest.fixture(scope="module")
def green_delta():
    mu = load_measure({"dim": 2, "atoms": [{"loc": [0, 1], "w": 1}]})
    return represent(RepresentationTriple.of(2, mu=mu))


def slab_moment(dim, rho, y0, y1):
    """int y_N over {|y'| < rho, y0 < y_N < y1}, clipped to y_N > 0."""
    y0 = max(y0, 0.0)
    if y1 <= y0:
        return 0.0
    base = 2 * rho if dim == 2 else math.pi * rho**2
    return base * (y1**2 - y0**2) / 2


def exact_ring_of_one(dim, a, R):
    outer = slab_moment(dim, 2 * R, a - 2 * R, a + 2 * R)
    inner = slab_moment(dim, R, a - R, a + R)
    return (outer - inner) / R ** (dim + 2)


def half_disc(r, a):
    """Area of the disc of radius r centered at height a, above y_N = 0."""
    if a >= r:
        return math.pi * r * r
    return r * r * (math.pi - math.acos(a / r)) + a * math.sqrt(r * r - a * a)


# -- ring integrals ---------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("a, R", [(1.0, 4.0), (3.0, 2.0), (5.0, 2.0), (0.5, 32.0)])
def test_ring_plus_of_one_exact(dim, a, R):
    assert_allclose(ring_plus_integral(one(dim), 0.0, e_n(dim, a), R), exact_ring_of_one(dim, a, R), rtol=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("a, R", [(1.0, 4.0), (3.0, 2.0)])
def test_ball_limit_of_one_exact(dim, a, R):
    ref = slab_moment(dim, R, a - R, a + R) / R ** (dim + 2)
    assert_allclose(ball_limit_integral(one(dim), 0.0, e_n(dim, a), R), ref, rtol=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
def test_linear_field_rings_vanish(dim):
    u = linear_field(dim, 1.0)
    x = e_n(dim)
    for R in (4.0, 64.0):
        assert ring_plus_integral(u, 1.0, x, R) == 0.0
        assert ball_limit_integral(u, 1.0, x, R) == 0.0


def test_ring_of_one_halves():
    x = e_n(2)
    v = [ring_plus_integral(one(2), 0.0, x, R) for R in (64.0, 128.0)]
    assert_allclose(v[1] / v[0], 0.5, rtol=1e-2)


def test_ring_of_green_potential_decays(green_delta):
    x = e_n(2)
    v = [ring_plus_integral(green_delta, 0.0, x, R) for R in (16.0, 32.0, 64.0)]
    # I(2R) / I(R) tends to 2^{-N}
    assert_allclose(v[2] / v[1], 0.25, rtol=0.1)


def test_ball_dominates_ring(green_delta):
    x = e_n(2)
    for R in (4.0, 8.0):
        ring = ring_plus_integral(green_delta, 0.0, x, R)
        ball = ball_limit_integral(green_delta, 0.0, x, 2 * R)
        assert ball >= 2.0 ** -(2 + 2) * ring
        # domain decomposition: ball(2R) = ball(R) + ring(R), after undoing the scalings
        lhs = ball * (2 * R) ** 4
        rhs = ball_limit_integral(green_delta, 0.0, x, R) * R**4 + ring * R**4
        assert_allclose(lhs, rhs, rtol=1e-5)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-2, 2), h=st.floats(-2, 2))
def test_slope_shift_invariance(a, h):
    u = expression_field("1/(1+xn)", 2)
    shifted = ScalarField(2, lambda p: u(p) + a * p[:, -1])
    x = e_n(2)
    assert_allclose(ring_plus_integral(shifted, h + a, x, 4.0), ring_plus_integral(u, h, x, 4.0), rtol=1e-5)


@pytest.mark.parametrize("a, R", [(1.0, 4.0), (3.0, 2.0), (1.0, 64.0)])
def test_classical_ring_of_one(a, R):
    ref = (half_disc(2 * R, a) - half_disc(R, a)) / R**2
    assert_allclose(classical_ring_integral(one(2), 0.0, [0.0, a], R), ref, rtol=1e-9)


def test_classical_ring_of_constant_level():
    # u = l on the half-space and 0 below: |u - l| = l on the lower part only
    u = ScalarField(2, lambda p: np.full(p.shape[0], 2.0))
    a, R = 1.0, 4.0
    lower = math.pi * 3 * R * R - (half_disc(2 * R, a) - half_disc(R, a))
    assert_allclose(classical_ring_integral(u, 2.0, [0.0, a], R), 2.0 * lower / R**2, rtol=1e-8)


def test_classical_ring_compact_support():
    u = expression_field("max(0, 1 - |x|^2)", 2)
    assert classical_ring_integral(u, 0.0, [0.0, 1.0], 8.0) == 0.0


# -- level-set rings ----------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("R", [1.0, 8.0, 32.0])
def test_green_ring_weight_is_normalized(dim, R):
    assert_allclose(green_ring_weight_integral(e_n(dim), R), 1.0, rtol=1e-6)


@pytest.mark.parametrize("R", [8.0, 16.0, 32.0])
def test_green_ring_recovers_harmonic_field(R):
    u = expression_field("2 + 3*x2", 2)
    assert_allclose(green_ring_integral(u, [0.0, 1.0], R), 5.0, rtol=2e-2)


def test_green_ring_of_green_potential_decays(green_delta):
    v = [green_ring_integral(green_delta, [0.0, 1.0], R) for R in (8.0, 16.0, 32.0, 64.0)]
    assert np.all(np.diff(v) < 0)
    # the ring value is proportional to 1 / R here
    assert_allclose(v[-1] / v[0], 1 / 8, rtol=1e-3)


def test_ring_equivalent_of_level_is_zero():
    u = ScalarField(2, lambda p: np.full(p.shape[0], 3.0))
    assert ring_equivalent_integral(u, 3.0, [0.0, 1.0], 8.0) == 0.0


@pytest.mark.parametrize("dim, R", [(2, 8.0), (2, 16.0), (3, 16.0), (3, 32.0)])
def test_ring_equivalent_comparable_to_green_ring(dim, R):
    # |grad G|^2 / G against R |x - y|^{-2N} on the ring, where R < 1/G < 2R
    x = e_n(dim)
    cp = constants(dim).C_prime
    k = (1 + dim) ** 2 + dim**2
    eq = ring_equivalent_integral(one(dim), 0.0, x, R)
    gr = green_ring_integral(one(dim), x, R) * math.log(2)
    assert gr / (2 * cp**2 * k) <= eq <= gr / ((cp / 2) ** 2)


def test_ring_equivalent_upper_comparison_fails_near_pole():
    # for N = 3 and R = 8 the ring lies within about 1.3 of the pole, where the
    # claimed gradient lower bound is false, and so is the upper comparison
    x = e_n(3)
    cp = constants(3).C_prime
    eq = ring_equivalent_integral(one(3), 0.0, x, 8.0)
    gr = green_ring_integral(one(3), x, 8.0) * math.log(2)
    assert eq > gr / ((cp / 2) ** 2)


def test_ring_equivalent_of_green_potential_decays(green_delta):
    v = [ring_equivalent_integral(green_delta, 0.0, [0.0, 1.0], R) for R in (8.0, 32.0, 128.0)]
    assert v[2] < v[1] < v[0]


# -- scans and verdicts ------------------------------------------------------------------


def test_scan_linear_satisfied():
    rep = scan(linear_field(2, 1.0), 1.0, [0.0, 1.0], "(R+)")
    assert rep.verdict == "satisfied"
    assert rep.values == [0.0] * 8
    assert rep.slope == -math.inf


def test_scan_one_r_plus():
    rep = scan(one(2), 0.0, [0.0, 1.0], "(R+)", levels=24)
    assert rep.verdict == "satisfied"
    assert rep.slope == pytest.approx(-1.0, abs=0.05)


def test_scan_one_classical():
    rep = scan(one(2), 0.0, [0.0, 1.0], "(R)")
    assert rep.verdict == "not-satisfied"
    assert rep.slope == pytest.approx(0.0, abs=0.05)


def test_scan_report_serialization():
    rep = scan(one(2), 0.0, [0.0, 1.0], "(R)", levels=4)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,R,I,cumulative_min,slope"
    assert len(lines) == 5
    doc = json.loads(rep.to_json())
    assert doc["condition"] == "(R)" and len(doc["radii"]) == 4
    assert rep.cumulative_min == sorted(rep.cumulative_min, reverse=True)


def test_scan_rejects_bad_input():
    with pytest.raises(HalfSpaceError):
        scan(one(2), 0.0, [0.0, 1.0], "(Q)")
    with pytest.raises(HalfSpaceError):
        scan(one(2), 0.0, [0.0, 1.0], "(R+)", levels=3)
    with pytest.raises(HalfSpaceError):
        ring_plus_integral(one(2), 0.0, [0.0, 0.0], 1.0)


def test_default_r0():
    assert default_r0([0.0, 1.0]) == 4.0
    assert default_r0([0.0, 10.0]) == 25.0


@pytest.mark.parametrize(
    "values, slope, tol, verdict",
    [
        ([0.0] * 4, -math.inf, 1e-4, "satisfied"),
        ([1e-3, 1e-4, 1e-5, 1e-6], -3.3, 1e-4, "satisfied"),
        ([1.0, 1.0, 1.0, 1.0], 0.0, 1e-4, "not-satisfied"),
        ([1.0, 0.5, 0.25, 0.125], -1.0, 1e-4, "inconclusive"),
        ([1e-3, 1e-3, 1e-3, 1e-3], 0.0, 1e-3, "inconclusive"),
        ([math.nan] * 4, math.nan, 1e-4, "inconclusive"),
    ],
)
def test_verdict_rules(values, slope, tol, verdict):
    assert verdict_from(values, slope, tol) == verdict


def test_trailing_slope():
    r = [2.0**k for k in range(6)]
    assert trailing_slope(r, [x**-2.0 for x in r]) == pytest.approx(-2.0)
    assert math.isnan(trailing_slope(r, [1, 1, 1, math.nan, 1, 1]))
    assert math.isnan(trailing_slope(r[:3], [1, 1, 1]))
