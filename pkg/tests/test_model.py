import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parisilab.model import DomainError, MixtureSpec, theta, theta_overlap, xi, xi_prime, xi_second

from conftest import mixtures

SK = MixtureSpec.from_pairs([(2, 1.0)])


def test_xi_examples():
    assert xi(SK, 0.5) == pytest.approx(0.25)
    assert xi(MixtureSpec.from_squares({2: 0.3, 3: 0.1}), 0.0) == 0.0
    assert xi(MixtureSpec.from_squares({2: 0.3, 3: 0.1}), 1.0) == pytest.approx(0.4)


def test_derivative_examples():
    assert xi_prime(SK, 0.5) == pytest.approx(1.0)
    field = MixtureSpec.from_pairs([(1, 1.0)])
    assert np.allclose(xi_prime(field, np.linspace(-1, 1, 7)), 1.0)
    assert xi_second(SK, 1.0) == pytest.approx(2.0)


def test_theta_examples():
    assert theta(SK, 0.0) == 0.0
    assert theta(SK, 0.5) == pytest.approx(0.25)
    assert theta(SK, 1.0) == pytest.approx(xi_prime(SK, 1.0) - xi(SK, 1.0))


@pytest.mark.parametrize("fn,x", [(xi, 1.5), (xi_prime, -1.01), (xi_second, 2.0), (theta, -0.1), (theta, 1.2)])
def test_domain_errors(fn, x):
    with pytest.raises(DomainError):
        fn(SK, x)


def test_spec_validation():
    with pytest.raises(ValueError):
        MixtureSpec((0.5, -0.1))
    with pytest.raises(ValueError):
        MixtureSpec.from_pairs([(40, 1e3)])
    zero = MixtureSpec.zero(3)
    assert zero.is_zero and zero.p_max == 3
    assert MixtureSpec.from_pairs([(3, 0.5)]).orders == (3,)


def test_scalar_and_array_outputs():
    assert isinstance(xi(SK, 0.3), float)
    assert xi(SK, np.array([0.1, 0.2])).shape == (2,)


@given(mixtures())
def test_monotone_nonnegative_on_unit_interval(spec):
    q = np.linspace(0, 1, 101)
    for f in (xi, xi_prime, theta):
        v = f(spec, q)
        assert np.all(v >= -1e-15)
        assert np.all(np.diff(v) >= -1e-13)


@given(mixtures())
def test_theta_derivative_matches_q_xi_second(spec):
    # central differences on a cubic-or-lower error scale
    h = 1e-5
    q = np.linspace(0.05, 0.95, 19)
    fd = (theta(spec, q + h) - theta(spec, q - h)) / (2 * h)
    assert np.allclose(fd, q * xi_second(spec, q), atol=1e-8)


@given(mixtures(even_only=True))
def test_even_mixtures_are_convex(spec):
    x = np.linspace(-1, 1, 201)
    h = x[1] - x[0]
    v = xi(spec, x)
    assert np.all(v[2:] - 2 * v[1:-1] + v[:-2] >= -1e-12 * max(1.0, h))


def test_odd_cubic_is_not_convex():
    spec = MixtureSpec.from_squares({3: 0.5})
    assert not spec.even_only
    assert xi_second(spec, -0.5) < 0


@given(mixtures(), st.floats(-1, 1))
def test_theta_overlap_extends_theta(spec, r):
    if r >= 0:
        assert theta_overlap(spec, r) == pytest.approx(theta(spec, r), abs=1e-14)
