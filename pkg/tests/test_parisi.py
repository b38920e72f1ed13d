import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from parisilab import parisi
from parisilab.model import MixtureSpec, xi, xi_prime
from parisilab.parisi import (LOG2, QuadratureGrid, QuadratureOverflow, RSBParams, duplicate_level, evaluate_parisi,
                              evaluate_X0, format_value, variance_increments)

from conftest import mixtures, rsb_params

SK = MixtureSpec.from_pairs([(2, 1.0)])
HALF = MixtureSpec.from_pairs([(2, 0.5)])


def test_rsb_params_validation():
    RSBParams((0.2, 0.2), (0.1, 0.1))
    for m, q in [((0.5, 0.2), (0.1, 0.2)), ((0.2,), (1.2,)), ((-0.1,), (0.3,)), ((0.2, 0.3), (0.5,)), ((), ())]:
        with pytest.raises(ValueError):
            RSBParams(m, q)
    p = RSBParams((0.3, 0.6), (0.2, 0.7))
    assert p.k == 2 and p.q_ext == (0.0, 0.2, 0.7, 1.0) and p.m_ext == (0.0, 0.3, 0.6)


@pytest.mark.parametrize("n", [5, 20, 40])
def test_quadrature_grid_invariants(n):
    g = QuadratureGrid(n)
    assert np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
    for power, moment in [(0, 1.0), (2, 1.0), (4, 3.0)]:
        assert g.expect(lambda x: x**power) == pytest.approx(moment, abs=1e-10)


def test_variance_increments_examples():
    assert np.allclose(variance_increments(SK, RSBParams((0.5,), (0.5,))), [1.0, 1.0])
    assert np.all(variance_increments(MixtureSpec.zero(3), RSBParams((0.2, 0.9), (0.3, 0.4))) == 0.0)


@given(mixtures(), rsb_params())
def test_variance_increments_telescope(spec, params):
    v = variance_increments(spec, params)
    assert len(v) == params.k + 1 and np.all(v >= 0)
    assert v.sum() == pytest.approx(xi_prime(spec, 1.0), abs=1e-12)


@given(rsb_params())
def test_zero_mixture_gives_log2(params):
    assert abs(evaluate_X0(MixtureSpec.zero(2), params) - LOG2) < 1e-12
    assert abs(evaluate_parisi(MixtureSpec.zero(2), params) - LOG2) < 1e-12


def test_annealed_closed_form_sk():
    # E ch(g) = exp(Var/2) with Var = xi'(1) = 2
    assert evaluate_X0(SK, RSBParams((1.0,), (0.0,))) == pytest.approx(LOG2 + 1.0, abs=1e-8)


def test_replica_symmetric_high_temperature_value():
    assert evaluate_parisi(HALF, RSBParams((1.0,), (0.0,))) == pytest.approx(LOG2 + 0.125, abs=1e-8)


def test_one_level_against_direct_integration():
    # k=1, m=0.4: X0 = E_0 (1/m) log E_1 (2ch(z0+z1))^m, computed by nested adaptive quadrature
    spec = MixtureSpec.from_squares({2: 0.5, 3: 0.2})
    params = RSBParams((0.4,), (0.35,))
    v0, v1 = variance_increments(spec, params)
    phi = lambda x: np.exp(-x * x / 2) / np.sqrt(2 * np.pi)
    def inner(h):
        val, _ = integrate.quad(lambda g: phi(g) * (2 * np.cosh(h + np.sqrt(v1) * g)) ** 0.4, -12, 12)
        return np.log(val) / 0.4
    oracle, _ = integrate.quad(lambda g: phi(g) * inner(np.sqrt(v0) * g), -12, 12)
    assert evaluate_X0(spec, params) == pytest.approx(oracle, abs=1e-9)


def test_zero_m_is_the_expectation_branch():
    spec = MixtureSpec.from_squares({2: 0.5})
    tiny = evaluate_X0(spec, RSBParams((1e-9, 0.6), (0.3, 0.8)))
    zero = evaluate_X0(spec, RSBParams((0.0, 0.6), (0.3, 0.8)))
    small = evaluate_X0(spec, RSBParams((1e-6, 0.6), (0.3, 0.8)))
    assert tiny == zero
    assert small == pytest.approx(zero, abs=1e-6)


# xi'(1) <= 1.2: the region where the default 40-node rule is converged below 1e-8
@given(mixtures(p_max=3, max_sq=0.2), rsb_params(k_max=2), st.integers(1, 2), st.sampled_from(["q", "m"]),
       st.floats(0, 1))
def test_level_duplication_invariance(spec, params, j, mode, value):
    j = min(j, params.k)
    a = evaluate_parisi(spec, params)
    b = evaluate_parisi(spec, duplicate_level(params, j, mode, value))
    assert b == pytest.approx(a, abs=1e-8)


@given(mixtures(), rsb_params(k_max=3), st.integers(1, 3))
def test_repeated_q_duplication_is_exact(spec, params, j):
    # a zero-variance level is skipped, so any grid reproduces the value
    j = min(j, params.k)
    g = QuadratureGrid(16)
    assert evaluate_parisi(spec, duplicate_level(params, j, "q"), g) == pytest.approx(
        evaluate_parisi(spec, params, g), abs=1e-12)


# xi'(1) <= 2; larger field variances need more nodes (see README)
@settings(max_examples=10)
@given(mixtures(p_max=3, max_sq=0.33), rsb_params(k_max=3))
def test_quadrature_doubling_stability(spec, params):
    a = evaluate_X0(spec, params, QuadratureGrid(40))
    b = evaluate_X0(spec, params, QuadratureGrid(80))
    assert abs(a - b) < 1e-6


def test_embedded_minimum_not_larger():
    # min over a k+1 grid that contains the embedded k grid is at most the k minimum
    spec = MixtureSpec.from_squares({2: 0.9})
    g = QuadratureGrid(16)
    grid1 = [RSBParams((m,), (q,)) for m in np.linspace(0.1, 1, 5) for q in np.linspace(0, 0.9, 5)]
    grid2 = [duplicate_level(p, 1, "q") for p in grid1] + [RSBParams((0.3, 0.8), (0.2, 0.6))]
    best1 = min(evaluate_parisi(spec, p, g) for p in grid1)
    best2 = min(evaluate_parisi(spec, p, g) for p in grid2)
    assert best2 <= best1 + 1e-12


def test_deterministic_and_formatted():
    p = RSBParams((0.3, 0.7), (0.2, 0.6))
    a, b = evaluate_parisi(HALF, p), evaluate_parisi(HALF, p)
    assert a == b
    assert format_value(LOG2) == "0.69314718056"


def test_overflow_is_reported(monkeypatch):
    monkeypatch.setattr(parisi, "log_cosh", lambda x: np.full_like(x, np.nan))
    with pytest.raises(QuadratureOverflow):
        evaluate_X0(HALF, RSBParams((0.5,), (0.3,)))


def test_duplicate_level_shapes():
    p = RSBParams((0.3, 0.7), (0.2, 0.6))
    dq = duplicate_level(p, 2, "q")
    dm = duplicate_level(p, 1, "m")
    assert dq.k == 3 and dq.q == (0.2, 0.6, 0.6)
    assert dm.k == 3 and dm.m == (0.3, 0.3, 0.7)
    with pytest.raises(ValueError):
        duplicate_level(p, 3, "q")
