import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besovkit.embedding import (
    EmbeddingSpec,
    embedding_estimate_check,
    symbol_sup,
    optimal_h,
    xi_samples,
)
from besovkit.errors import HypothesisViolation, ValidationError
from besovkit.grid import Grid, random_band_limited
from besovkit.littlewood_paley import BesovParams
from besovkit.operators import DiagonalScale, certify_positive, fractional_power
from reference import minimize_over_h

TWO_PI = 2 * math.pi
NONNORMAL = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 0.5], [0.2, 0.0, 5.0]])
PARAMS = BesovParams(0.5, 2.0, 2.0)


@pytest.mark.parametrize("l,alpha,mu,ok", [
    ((2,), (1,), 0.0, True),
    ((2,), (1,), 0.5, True),
    ((2,), (1,), 0.6, False),
    ((2,), (3,), 0.0, False),
    ((2, 4), (1, 1), 0.0, True),
    ((2, 4), (1, 2), 0.0, False),
])
def test_admissibility(l, alpha, mu, ok):
    spec = EmbeddingSpec(l, alpha, mu=mu)
    assert spec.admissible() is ok
    if not ok:
        with pytest.raises(HypothesisViolation):
            spec.check()


def test_derived_exponents():
    spec = EmbeddingSpec((2, 4), (1, 1), t=(4.0, 16.0), mu=0.1)
    assert spec.kappa == pytest.approx(0.75)
    assert spec.nu == pytest.approx(0.25)
    assert spec.theta == pytest.approx(0.15)
    assert spec.eta == pytest.approx(4.0**0.5 * 16.0**0.25)


@pytest.mark.parametrize("kw", [dict(l=(0,), alpha=(1,)), dict(l=(2,), alpha=(-1,)), dict(l=(2,), alpha=(1,), t=(0.0,)),
                                dict(l=(2, 2), alpha=(1,))])
def test_spec_validation(kw):
    with pytest.raises(ValidationError):
        EmbeddingSpec(**kw)


def test_xi_samples_include_origin():
    xi = xi_samples(3.0, 10, 2)
    assert xi.shape == (121, 2) and np.any(np.all(xi == 0, axis=1))


def test_scalar_symbol_sup_closed_form():
    # sqrt(2) |xi| / (2 + xi^2 + 1) peaks at xi = sqrt(3)
    A = DiagonalScale(1.0, 1)
    rep = symbol_sup(A, EmbeddingSpec((2,), (1,)), np.array([[math.sqrt(3.0)], [0.3], [7.0]]))
    assert rep.value == pytest.approx(math.sqrt(2) * math.sqrt(3) / 6, rel=1e-14)


@pytest.mark.parametrize("mu", [0.0, 0.25, 0.5])
def test_nondiagonal_symbol_against_dense_evaluation(mu):
    A = certify_positive(NONNORMAL, 0.5 * math.pi)
    spec = EmbeddingSpec((2,), (1,), mu=mu)
    xi = np.linspace(-5, 5, 41)[:, None]
    t, h = 0.5, 0.25
    rep = symbol_sup(A, spec, xi, (t,), (h,))
    P = fractional_power(A, spec.theta)
    ref = max(t**0.5 * abs(x) * h**-mu
              * np.linalg.norm(P @ np.linalg.inv(NONNORMAL + (t * x**2 + 1 / h) * np.eye(3)), 2) for x in xi[:, 0])
    assert rep.value == pytest.approx(ref, rel=1e-10)


def test_diagnostic_mode_evaluates_inadmissible_specs():
    A = DiagonalScale(1.0, 4)
    spec = EmbeddingSpec((2,), (3,))
    with pytest.raises(HypothesisViolation):
        symbol_sup(A, spec, xi_samples(10.0, 11))
    small = symbol_sup(A, spec, xi_samples(10.0, 101), diagnostic=True).value
    big = symbol_sup(A, spec, xi_samples(100.0, 1001), diagnostic=True).value
    assert big > 10 * small


def test_multiplicative_ratio_is_twice_the_balanced_ratio(rng):
    g = Grid((64,), (TWO_PI,))
    A = DiagonalScale(1.0, 2)
    spec = EmbeddingSpec((2,), (1,), mu=0.5)
    u = random_band_limited(g, 2, 16.0, rng)
    base = embedding_estimate_check(u, A, spec, PARAMS, h_values=())
    at = embedding_estimate_check(u, A, spec, PARAMS, h_values=(base.b_norm / base.y_norm,))
    lhs_over_balanced = at.lhs / at.rhs_by_h[0][1]
    assert base.multiplicative_ratio == pytest.approx(2 * lhs_over_balanced, rel=1e-12)


def test_fiber_dimension_must_match(rng):
    u = random_band_limited(Grid((64,), (TWO_PI,)), 3, 16.0, rng)
    with pytest.raises(ValidationError):
        embedding_estimate_check(u, DiagonalScale(1.0, 2), EmbeddingSpec((2,), (1,)), PARAMS)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.05, 0.95))
def test_optimal_h_against_numeric_minimum(y, b, mu):
    h, val = optimal_h(y, b, mu)
    h_ref, val_ref = minimize_over_h(lambda h: h**mu * y + h ** (mu - 1) * b)
    assert val == pytest.approx(val_ref, rel=1e-7)
    assert h == pytest.approx(h_ref, rel=1e-3)


@given(st.integers(0, 2**31), st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2, allow_nan=False),
       st.sampled_from([0.0, 0.25, 0.5]))
def test_estimate_ratios_are_scale_invariant(seed, c, mu):
    g = Grid((64,), (TWO_PI,))
    A = DiagonalScale(1.0, 2)
    spec = EmbeddingSpec((2,), (1,), mu=mu)
    u = random_band_limited(g, 2, 16.0, np.random.default_rng(seed))
    a = embedding_estimate_check(u, A, spec, PARAMS)
    b = embedding_estimate_check(c * u, A, spec, PARAMS)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-10)
    assert b.multiplicative_ratio == pytest.approx(a.multiplicative_ratio, rel=1e-10)


@given(st.integers(0, 2**31), st.sampled_from([0.25, 0.5]))
def test_optimum_never_exceeds_the_lattice(seed, mu):
    u = random_band_limited(Grid((64,), (TWO_PI,)), 2, 16.0, np.random.default_rng(seed))
    rep = embedding_estimate_check(u, DiagonalScale(1.0, 2), EmbeddingSpec((2,), (1,), mu=mu), PARAMS)
    assert rep.rhs_min <= min(v for _, v in rep.rhs_by_h) * (1 + 1e-12)
