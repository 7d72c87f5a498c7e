import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from halfspace.errors import HalfSpaceError, PreconditionError
from halfspace.fields import ScalarField, expression_field, linear_field
from halfspace.huber import (
    LiftedField,
    annulus_comparison,
    annulus_split_bound,
    cap_weight,
    lift,
    lifted_box_mc,
    lifted_cylinder_integral,
    sphere_directions,
    spherical_mean,
    unlift,
)
from halfspace.measures import load_measure
from halfspace.potentials import RepresentationTriple, represent


@pytest.fixture(scope="module")
def green_delta():
    mu = load_measure({"dim": 2, "atoms": [{"loc": [0, 1], "w": 1}]})
    return represent(RepresentationTriple.of(2, mu=mu))


@pytest.fixture(scope="module")
def poisson_bump():
    nu = load_measure({"dim": 2, "side": "boundary", "density": {"name": "bump", "params": {"radius": 1.0}}})
    return represent(RepresentationTriple.of(2, nu=nu))


def lifted_points(dim, count, seed):
    return np.random.default_rng(seed).uniform(-3, 3, (count, dim + 2))


# -- lift and unlift -------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3])
def test_lift_of_linear_is_one(dim):
    xi = lifted_points(dim, 50, 0)
    assert_allclose(lift(linear_field(dim))(xi), 1.0, rtol=1e-15)


def test_lift_of_square_is_norm():
    v = lift(expression_field("x2^2", 2))
    xi = lifted_points(2, 50, 1)
    assert_allclose(v(xi), np.linalg.norm(xi[:, 1:], axis=1), rtol=1e-14)


def test_lift_on_symmetry_subspace():
    v = lift(expression_field("x2 + x2^2", 2))
    xi = np.array([[0.3, 0.0, 0.0, 0.0]])
    # min over t = 2^-j of 1 + t, attained at the smallest probe
    assert_allclose(v(xi), 1 + 2.0**-20)


def test_lift_rejects_wrong_shape():
    with pytest.raises(HalfSpaceError):
        lift(linear_field(2))(np.zeros((1, 3)))


@pytest.mark.parametrize("dim", [2, 3])
def test_unlift_lift_round_trip(dim, green_delta):
    u = green_delta if dim == 2 else expression_field("exp(-|x|^2) * x3", 3)
    rng = np.random.default_rng(dim)
    x = rng.uniform(-2, 2, (100, dim))
    x[:, -1] = rng.uniform(0.05, 3, 100)
    assert_allclose(unlift(lift(u))(x), u(x), rtol=1e-14)


def test_unlift_constant():
    v = LiftedField(3, lambda xi: np.full(xi.shape[0], 2.5))
    x = np.array([[0.1, 0.2, 0.7], [1.0, -1.0, 3.0]])
    assert_allclose(unlift(v)(x), 2.5 * x[:, -1])
    with pytest.raises(HalfSpaceError):
        unlift(LiftedField(3, lambda xi: xi[:, 0], symmetric=False))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), seed=st.integers(0, 2**31))
def test_lift_linear_combination(a, seed):
    u1 = expression_field("exp(-|x|^2) * x2", 2)
    u2 = expression_field("x2 / (1 + |x|^2)", 2)
    comb = ScalarField(2, lambda p: a * u1(p) + u2(p))
    xi = lifted_points(2, 20, seed)
    assert_allclose(lift(comb)(xi), a * lift(u1)(xi) + lift(u2)(xi), rtol=1e-12, atol=1e-14)


# -- spherical means ------------------------------------------------------------------


def test_sphere_directions_unit_and_seeded():
    d = sphere_directions(5, 100, seed=3)
    assert d.shape == (100, 5)
    assert_allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.array_equal(d, sphere_directions(5, 100, seed=3))


def test_spherical_mean_of_constant():
    v = LiftedField(2, lambda xi: np.ones(xi.shape[0]))
    m = spherical_mean(v, np.zeros(4), 1.7)
    assert m.mean == 1.0 and m.stderr == 0.0


def test_spherical_mean_of_lifted_linear():
    m = spherical_mean(lift(linear_field(2)), np.array([0.0, 1.0, 0.5, 0.0]), 3.0)
    assert m.mean == 1.0


def test_spherical_mean_of_harmonic_polynomial():
    # xi_1^2 - xi_2^2 is harmonic in R^4; antipodal pairs cancel nothing here
    v = LiftedField(2, lambda xi: xi[:, 0] ** 2 - xi[:, 1] ** 2, symmetric=False)
    c = np.array([0.5, 1.0, 0.0, 0.0])
    m = spherical_mean(v, c, 2.0)
    assert abs(m.mean - (0.25 - 1.0)) < 5 * m.stderr + 1e-3


def test_spherical_mean_superharmonic_lift(green_delta):
    v = lift(green_delta)
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 20:
        c = rng.uniform(-1.5, 1.5, 4)
        bar = np.linalg.norm(c[1:])
        r = rng.uniform(0.1, 0.8) * bar
        pole = math.hypot(c[0], bar - 1.0)
        if bar < 0.3 or abs(pole - r) < 0.2 * r:
            continue
        m = spherical_mean(v, c, r)
        centre = float(v(c[None, :])[0])
        assert m.mean <= centre + 4 * m.stderr + 1e-9
        checked += 1


def test_spherical_mean_rejects_radius():
    with pytest.raises(HalfSpaceError):
        spherical_mean(lift(linear_field(2)), np.zeros(4), 0.0)


# -- lifted integrals -------------------------------------------------------------------


def test_cap_weight_limits():
    a, s = 2.0, 1.0
    assert cap_weight(np.array([0.5]), a, s)[0] == 0.0
    assert cap_weight(np.array([4.0]), a, s)[0] == 0.0
    assert cap_weight(np.array([0.5]), 1.0, 3.0)[0] == 2.0
    assert_allclose(cap_weight(np.array([2.0]), a, s)[0], 1 - (4 + 4 - 1) / 8)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("rho, s", [((0.0, 2.0), (0.0, 0.5)), ((1.0, 3.0), (0.5, 2.5))])
def test_lifted_cylinder_volume(dim, rho, s):
    # u = x_N lifts to v = 1, so the integral is the volume of the region in R^{N+2}
    x = np.zeros(dim)
    x[-1] = 1.0
    (r0, r1), (s0, s1) = rho, s
    tang = 2 * (r1 - r0) if dim == 2 else math.pi * (r1**2 - r0**2)
    bar = 4 / 3 * math.pi * (s1**3 - s0**3)
    got = lifted_cylinder_integral(linear_field(dim), 0.0, x, rho, s)
    assert_allclose(got, tang * bar, rtol=1e-8)


def test_lifted_cylinder_against_monte_carlo(green_delta):
    x = np.array([0.0, 1.0])
    got = lifted_cylinder_integral(green_delta, 0.0, x, (0.0, 2.0), (0.0, 2.0))
    mc = lifted_box_mc(green_delta, 0.0, x, (0.0, 2.0), (0.0, 2.0), samples=2**18)
    assert_allclose(got, mc, rtol=2e-2)


# -- comparison inequalities ----------------------------------------------------------------


def test_annulus_comparison_linear_is_zero():
    res = annulus_comparison(linear_field(2, 1.5), 1.5, [0.0, 1.0], 4.0)
    assert res.lhs == 0.0 and res.rhs == 0.0 and res.holds


def test_annulus_comparison_green(green_delta):
    res = annulus_comparison(green_delta, 0.0, [0.0, 1.0], 4.0, 0.5)
    assert res.holds and res.lhs > res.rhs > 0


def test_annulus_comparison_homogeneous(green_delta):
    double = ScalarField(2, lambda p: 2.0 * green_delta(p), singular_points=green_delta.singular_points)
    a = annulus_comparison(green_delta, 0.0, [0.0, 1.0], 4.0)
    b = annulus_comparison(double, 0.0, [0.0, 1.0], 4.0)
    assert_allclose([b.lhs, b.rhs], [2 * a.lhs, 2 * a.rhs], rtol=1e-6)


@pytest.mark.parametrize("gamma, R", [(0.0, 4.0), (1.0, 4.0), (0.5, 1.0), (0.9, 4.0)])
def test_annulus_comparison_preconditions(gamma, R):
    with pytest.raises(PreconditionError):
        annulus_comparison(linear_field(2), 0.0, [0.0, 1.0], R, gamma)


def test_annulus_comparison_simple_threshold_is_sufficient():
    # R > 2 max(1, 1/(sqrt(1 - g^2) - g)) x_N always passes the sharp check
    for g in (0.1, 0.3, 0.5, 0.7):
        R = 2 * max(1, 1 / (math.sqrt(1 - g * g) - g)) * 1.0 * 1.001
        annulus_comparison(linear_field(2), 0.0, [0.0, 1.0], R, g)


def test_split_bound_zero():
    zero = ScalarField(2, lambda p: np.zeros(p.shape[0]))
    res = annulus_split_bound(zero, [0.0, 1.0], 8.0, 0.8)
    assert res.lhs == 0.0 and res.rhs == 0.0 and res.holds


def test_split_bound_poisson_bump(poisson_bump):
    res = annulus_split_bound(poisson_bump, [0.0, 1.0], 8.0, 0.8)
    assert res.holds and res.lhs > 0


def test_split_bound_constant():
    one = ScalarField(2, lambda p: np.ones(p.shape[0]))
    res = annulus_split_bound(one, [0.0, 1.0], 6.0, 0.75)
    assert res.holds


@pytest.mark.parametrize("tau, R", [(0.7, 10.0), (1.0, 10.0), (0.8, 7.9)])
def test_split_bound_preconditions(tau, R):
    with pytest.raises(PreconditionError):
        annulus_split_bound(linear_field(2), [0.0, 1.0], R, tau)


def test_split_bound_threshold_admitted():
    # R = 2 tau x_N / (1 - tau) exactly
    annulus_split_bound(linear_field(2), [0.0, 1.0], 8.0, 0.8)
