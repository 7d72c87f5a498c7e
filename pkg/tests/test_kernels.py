import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import gamma

from halfspace.errors import CoincidentPointsError, HalfSpaceError
from halfspace.estimates import (
    asymptotic_errors,
    audit,
    dn_green_upper,
    green_upper,
    grad_sq_lower,
    grad_sq_upper,
)
from halfspace.geometry import (
    CylinderBall,
    HalfSpacePoint,
    LevelSetRing,
    constants,
    cyl_norm,
    gamma_half,
    mirror,
)
from halfspace.kernels import (
    aux_a,
    fundamental,
    grad_green,
    grad_green_sq,
    green,
    green_unsafe,
    in_level_ring,
    poisson,
)

DIMS = [2, 3, 4, 5, 6, 7, 8]


def naive_green(x, y, n):
    """Gamma(x - y) - Gamma(x_hat - y) with scipy's gamma; fine away from the boundary."""
    sigma = 2 * math.pi ** (n / 2) / gamma(n / 2)
    xh = np.array(x, float)
    xh[-1] *= -1
    r = np.linalg.norm(np.subtract(x, y))
    rh = np.linalg.norm(xh - y)
    if n == 2:
        return (math.log(rh) - math.log(r)) / sigma
    return (r ** (2 - n) - rh ** (2 - n)) / (sigma * (n - 2))


def pair(dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, dim)
    y = rng.uniform(-2, 2, dim)
    x[-1] = rng.uniform(0.1, 3)
    y[-1] = rng.uniform(0.1, 3)
    return x, y


# -- geometry -----------------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 12))
def test_gamma_half_matches_scipy(n):
    assert_allclose(gamma_half(n), gamma(n / 2), rtol=1e-14)


@pytest.mark.parametrize("dim", DIMS)
def test_constants_from_dimension(dim):
    c = constants(dim)
    sigma = 2 * math.pi ** (dim / 2) / gamma(dim / 2)
    assert_allclose(c.sigma, sigma, rtol=1e-14)
    assert_allclose(c.C, 1 / (sigma * max(dim - 2, 1)), rtol=1e-14)
    assert_allclose(c.C_prime, 2 / sigma, rtol=1e-14)


def test_known_constants():
    assert_allclose(constants(2).sigma, 2 * math.pi)
    assert_allclose(constants(3).sigma, 4 * math.pi)
    assert_allclose(constants(2).C_prime, 1 / math.pi)
    assert_allclose(constants(3).C_prime, 1 / (2 * math.pi))


@pytest.mark.parametrize("bad", [1, 9, 2.5])
def test_dimension_out_of_range(bad):
    with pytest.raises(HalfSpaceError):
        constants(bad)


@pytest.mark.parametrize(
    "x, expected",
    [([0.0, 1.0], [0.0, -1.0]), ([1.0, 2.0, 3.0], [1.0, 2.0, -3.0])],
)
def test_mirror_examples(x, expected):
    assert_allclose(mirror(np.array(x)), expected)


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=8))
def test_mirror_involution(coords):
    x = np.array(coords)
    assert np.array_equal(mirror(mirror(x)), x)


def test_mirror_does_not_mutate():
    x = np.array([0.5, 1.0])
    mirror(x)
    assert x[-1] == 1.0


def test_halfspace_point():
    p = HalfSpacePoint((1.0, 2.0), 3.0)
    assert p.dim == 3 and p.interior
    assert_allclose(mirror(p), [1, 2, -3])
    assert not HalfSpacePoint((0.0,), 0.0).interior
    with pytest.raises(HalfSpaceError):
        HalfSpacePoint((0.0,), -1.0)


def test_cylinder_ball_membership():
    b = CylinderBall([0.0, 0.0, 2.0], 1.0)
    assert b.contains([0.5, 0.5, 2.5])
    assert not b.contains([0.8, 0.8, 2.0])  # tangential distance 1.13
    assert b.in_annulus([1.5, 0.0, 2.0])
    assert not b.in_annulus([2.0, 0.0, 2.0])
    lo, hi = CylinderBall([0.0, 0.5], 1.0).bounding_box()
    assert_allclose(lo, [-1, 0])
    assert_allclose(hi, [1, 1.5])


@given(st.lists(st.floats(-100, 100).filter(lambda t: t == 0 or abs(t) > 1e-100), min_size=2, max_size=6))
def test_cyl_norm_between_norm_bounds(v):
    v = np.array(v)
    c = cyl_norm(v)
    e = np.linalg.norm(v)
    assert c <= e * (1 + 1e-12) + 1e-300
    assert e <= math.sqrt(2) * c * (1 + 1e-12) + 1e-300


# -- aux_a ----------------------------------------------------------------------


def test_aux_a_example():
    a1, a2 = aux_a([0.0, 1.0], [0.0, 2.0])
    assert a1 == 9.0 and a2 == 1.0


def test_aux_a_coincident():
    a1, a2 = aux_a([0.3, 1.5], [0.3, 1.5])
    assert_allclose(a1, 4 * 1.5**2)
    assert a2 == 0.0


@pytest.mark.parametrize("dim", [2, 3, 5])
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), eps=st.floats(0, 0.99))
def test_aux_a_difference(dim, seed, eps):
    x, y = pair(dim, seed)
    a1, a2 = aux_a(x, y, eps)
    assert a1 >= a2
    assert_allclose(a1 - a2, 4 * x[-1] * y[-1], rtol=1e-12, atol=1e-12 * a1)


# -- fundamental and Green --------------------------------------------------------


def test_fundamental_examples():
    assert_allclose(fundamental([0, 0, 1.0], [0, 0, 2.0]), 1 / (4 * math.pi), rtol=1e-14)
    assert fundamental([0.0, 1.0], [1.0, 1.0]) == 0.0
    for n in (3, 4, 6):
        x = np.ones(n)
        assert_allclose(fundamental(x, x, 0.5), constants(n).C * 0.5 ** (-(n - 2)), rtol=1e-14)


@pytest.mark.parametrize("fn", [fundamental, green, grad_green, grad_green_sq])
def test_coincident_points_raise(fn):
    with pytest.raises(CoincidentPointsError):
        fn([0.0, 1.0], [0.0, 1.0])


@pytest.mark.parametrize("eps", [-0.1, 1.0, math.nan])
def test_eps_range(eps):
    with pytest.raises(HalfSpaceError):
        green([0.0, 1.0], [0.0, 2.0], eps)


def test_green_examples():
    assert_allclose(green([0.0, 1.0], [0.0, 2.0]), math.log(3) / (2 * math.pi), rtol=1e-15)
    assert_allclose(green([0, 0, 1.0], [0, 0, 2.0]), 1 / (6 * math.pi), rtol=1e-15)
    assert green([0.0, 1.0], [3.0, 0.0]) == 0.0
    assert green([0, 0, 1.0], [1.0, -2.0, 0.0]) == 0.0


@pytest.mark.parametrize("dim", DIMS)
@pytest.mark.parametrize("seed", range(5))
def test_green_matches_image_formula(dim, seed):
    x, y = pair(dim, seed)
    assert_allclose(green(x, y), naive_green(x, y, dim), rtol=1e-10)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_green_accurate_near_boundary(dim):
    # the leading term of G at small y_N is y_N dG/dy_N(y', 0) = y_N K^x(y')
    x = np.zeros(dim)
    x[-1] = 1.0
    yp = np.full(dim - 1, 0.3)
    for t in (1e-6, 1e-9, 1e-12):
        y = np.append(yp, t)
        assert_allclose(green(x, y) / t, poisson(x, yp), rtol=10 * t + 1e-12)


def test_green_unsafe_pole():
    assert green_unsafe(np.array([0.0, 1.0]), np.array([0.0, 1.0])) == math.inf
    assert_allclose(green_unsafe(np.array([0.0, 1.0]), np.array([0.0, 2.0])), math.log(3) / (2 * math.pi))


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), eps=st.floats(0, 0.99))
def test_green_symmetry_and_sign(dim, seed, eps):
    x, y = pair(dim, seed)
    g = green(x, y, eps)
    assert g >= 0
    assert_allclose(g, green(y, x, eps), rtol=1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), e1=st.floats(0, 0.99), e2=st.floats(0, 0.99))
def test_green_monotone_in_eps(dim, seed, e1, e2):
    x, y = pair(dim, seed)
    lo, hi = sorted((e1, e2))
    assert green(x, y, lo) >= green(x, y, hi) * (1 - 1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), eps=st.floats(0, 0.99))
def test_green_upper_bound(dim, seed, eps):
    x, y = pair(dim, seed)
    assert green(x, y, eps) <= green_upper(x, y, eps) * (1 + 1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_green_harmonic_away_from_pole(dim):
    x = np.zeros(dim)
    x[-1] = 1.0
    y = np.full(dim, 0.7)
    y[-1] = 2.5

    def lap(h):
        tot = -2 * dim * green(x, y)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            tot += green(x, y + e) + green(x, y - e)
        return tot / h**2

    l1, l2 = abs(lap(1e-2)), abs(lap(5e-3))
    assert l1 < 1e-4
    # O(h^2): halving the step divides the truncation error by about 4
    assert l2 < l1 / 3


# -- Poisson kernel -------------------------------------------------------------------


def test_poisson_examples():
    assert_allclose(poisson([0.0, 1.0], [0.0]), 1 / math.pi, rtol=1e-15)
    assert_allclose(poisson([0, 0, 1.0], [0.0, 0.0]), 1 / (2 * math.pi), rtol=1e-15)


def test_poisson_rejects_bad_input():
    with pytest.raises(HalfSpaceError):
        poisson([0.0, 0.0], [0.0])
    with pytest.raises(HalfSpaceError):
        poisson([0.0, 0.0, 1.0], [0.0])


@pytest.mark.parametrize("dim", [2, 3, 4])
@pytest.mark.parametrize("seed", range(4))
def test_poisson_is_fd_normal_derivative(dim, seed):
    x, y = pair(dim, seed)
    yp = y[:-1]
    h = 1e-5
    fd = (green(x, np.append(yp, h)) - 0.0) / h
    fd2 = (4 * green(x, np.append(yp, h)) - green(x, np.append(yp, 2 * h))) / (2 * h)
    assert_allclose(fd2, poisson(x, yp), rtol=1e-6)
    assert_allclose(fd, poisson(x, yp), rtol=1e-3)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("x", [(0.0, 1.0), (1.5, 0.2), (-3.0, 4.0)])
def test_poisson_normalization_radial(dim, x):
    # int K dy' over R^{N-1} in polar form: sigma_{N-1} int_0^inf K(r) r^{N-2} dr
    xn = x[1]
    cp = constants(dim).C_prime
    area = 2.0 if dim == 2 else 2 * math.pi
    val = quad(lambda r: cp * xn * (xn**2 + r**2) ** (-dim / 2) * r ** (dim - 2), 0, math.inf, epsabs=0, epsrel=1e-12)[0]
    assert_allclose(area * val, 1.0, rtol=1e-9)


# -- gradient ---------------------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3, 5])
@pytest.mark.parametrize("eps", [0.0, 0.3])
def test_grad_green_matches_fd(dim, eps):
    rng = np.random.default_rng(dim)
    for _ in range(20):
        x, y = pair(dim, int(rng.integers(2**31)))
        g = grad_green(x, y, eps)
        h = 1e-5 * math.sqrt(eps**2 + np.sum((x - y) ** 2))
        fd = np.empty(dim)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            fd[j] = (green(x, y + e, eps) - green(x, y - e, eps)) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


@pytest.mark.parametrize("dim", [2, 3, 4])
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), eps=st.floats(0, 0.99))
def test_grad_sq_split_formula(dim, seed, eps):
    x, y = pair(dim, seed)
    g = grad_green(x, y, eps)
    assert_allclose(grad_green_sq(x, y, eps), g @ g, rtol=1e-9)


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), eps=st.floats(0, 0.99))
def test_gradient_upper_bounds(dim, seed, eps):
    x, y = pair(dim, seed)
    dn = abs(grad_green(x, y, eps)[-1])
    fine, coarse = dn_green_upper(x, y, eps)
    assert dn <= fine * (1 + 1e-12) and fine <= coarse * (1 + 1e-12)
    gsq = grad_green_sq(x, y, eps)
    fine, coarse = grad_sq_upper(x, y, eps)
    assert gsq <= fine * (1 + 1e-12) and fine <= coarse * (1 + 1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_claimed_gradient_lower_bound_fails_near_pole(dim):
    # near y = x, |grad G|^2 ~ (C'/2)^2 a2^{1-N} while the claimed bound is
    # (C'/2)^2 x_N^2 a2^{-N}; their ratio x_N^2 / a2 is unbounded
    x = np.zeros(dim)
    x[-1] = 1.0
    y = x.copy()
    y[-1] = 1.01
    assert grad_sq_lower(x, y) > 100 * grad_green_sq(x, y)
    far = np.full(dim, 3.0)
    assert grad_sq_lower(x, far) <= grad_green_sq(x, far)


# -- level sets ---------------------------------------------------------------------------


def test_level_ring_threshold():
    x = np.array([0.0, 1.0])
    y = np.array([0.0, 2.0])
    r_star = 2 * math.pi / math.log(3)
    assert_allclose(r_star, 5.719, atol=1e-3)
    assert in_level_ring(x, y, r_star * 1.001)[0]
    assert not in_level_ring(x, y, r_star * 0.999)[0]
    in_r, in_2r, ring = in_level_ring(x, y, r_star * 0.75)
    assert not in_r and in_2r and ring


def test_level_ring_extremes():
    x = np.array([0.0, 1.0])
    for R in (1.0, 1e3):
        # G(x, x + d e_N) ~ log(4 / d^2) / (2 pi) = 8.8 at d = 1e-12
        assert in_level_ring(x, [0.0, 1.0 + 1e-12], R)[0]
    for R in (1e-3, 1.0, 1e3):
        assert not in_level_ring(x, [0.0, 0.0], R)[1]
    with pytest.raises(HalfSpaceError):
        in_level_ring(x, [0.0, 2.0], 0.0)


def test_level_set_ring_type():
    ring = LevelSetRing([0.0, 1.0], 6.0)
    pts = np.array([[0.0, 1.0], [0.0, 2.0], [0.0, 0.0], [50.0, 1.0]])
    assert ring.contains(pts).tolist() == [True, True, False, False]
    with pytest.raises(HalfSpaceError):
        LevelSetRing([0.0, 0.0], 1.0)


# -- estimates --------------------------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3])
def test_asymptotics_decrease(dim):
    x = np.zeros(dim)
    x[-1] = 1.0
    ge, ke = asymptotic_errors(dim, x, [1e2, 1e3, 1e4])
    assert np.all(np.diff(ge) < 0) and np.all(np.diff(ke) < 0)
    assert ge[-1] < 1e-2 and ke[-1] < 1e-2


def test_audit_report_is_deterministic():
    a = audit(3, 200, seed=5)
    b = audit(3, 200, seed=5)
    assert a.rows() == b.rows()
    for key in ("symmetry", "monotone_eps", "green_upper", "dn_green_upper", "grad_sq_upper", "gradient_fd"):
        assert a.violations[key] == 0
