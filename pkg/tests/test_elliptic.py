import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besovkit import oracles
from besovkit.errors import (
    EllipticityViolation,
    NonContractiveError,
    SingularModeError,
    ValidationError,
)
from besovkit.elliptic import (
    EllipticProblem,
    EllipticSymbol,
    LowerTerm,
    check_ellipticity,
    contraction_estimate,
    resolvent_sweep,
    solve_full,
    solve_principal,
)
from besovkit.grid import Grid, GridFunction, random_band_limited, spectral_derivative
from besovkit.littlewood_paley import BesovParams, besov_norm, build_partition
from besovkit.operators import DiagonalScale, certify_positive

TWO_PI = 2 * math.pi
NONNORMAL = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 0.5], [0.2, 0.0, 5.0]])
LAP1 = EllipticSymbol.positive_laplacian_power(1, 1)


@pytest.mark.parametrize("n,l", [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)])
def test_positive_laplacian_power_has_unit_ellipticity(n, l):
    g = Grid((16,) * n, (TWO_PI,))
    rep = check_ellipticity(EllipticSymbol.positive_laplacian_power(n, l), g)
    assert rep.m0 == pytest.approx(1.0, rel=1e-12)
    assert rep.sector_angle == pytest.approx(0.0, abs=1e-12)


def test_symbol_uses_i_xi_powers():
    sym = EllipticSymbol(1, {(2, 0): 1.0, (1, 1): 2.0j, (0, 2): 1.0})
    xi = np.array([[3.0, 1.0]])
    assert sym.evaluate(xi)[0] == pytest.approx(-9 - 6j - 1)


def test_missing_direction_is_not_elliptic():
    sym = EllipticSymbol(1, {(2, 0): -1.0})
    with pytest.raises(EllipticityViolation) as exc:
        check_ellipticity(sym, Grid((16, 16), (TWO_PI,)))
    assert exc.value.witness[0] == 0


@pytest.mark.parametrize("idx,lam", [((0,), 1.0), ((5,), 3 - 2j), ((-7,), 100.0)])
def test_principal_solve_of_a_mode(idx, lam):
    g = Grid((32,), (3.0,))
    A = certify_positive(NONNORMAL, 0.5 * math.pi)
    v = np.array([1.0, 2j, -1.0])
    u, rep = solve_principal(EllipticProblem(g, LAP1, A, lam), GridFunction.mode(g, idx, v))
    xi = 2 * math.pi * idx[0] / 3.0
    uh = np.linalg.solve(NONNORMAL + (lam + xi**2) * np.eye(3), v)
    assert np.allclose(u.values, GridFunction.mode(g, idx, uh).values, atol=1e-13)
    assert rep.residual <= 1e-13


def test_full_solve_against_dense_modes_in_1d(rng):
    g = Grid((32,), (TWO_PI,))
    A = certify_positive(NONNORMAL, 0.5 * math.pi)
    lower = {(1,): 0.3 * rng.standard_normal((3, 3)), (0,): 0.2 * rng.standard_normal((3, 3))}
    prob = EllipticProblem(g, LAP1, A, 1.0, tuple(LowerTerm(a, c) for a, c in lower.items()))
    f = random_band_limited(g, 3, 8.0, rng)
    u, rep = solve_full(prob, f)
    ref = oracles.direct_idft(oracles.dense_mode_solve(NONNORMAL, 1.0, LAP1.coefficients, lower,
                                                       oracles.direct_dft(f.values, 1), g.sizes, g.periods), 1)
    assert np.allclose(u.values, ref, atol=1e-9 * np.max(np.abs(ref)))
    assert rep.iterations > 1 and rep.residual <= 1e-9


def test_singular_mode_detected():
    g = Grid((16,), (TWO_PI,))
    with pytest.raises(SingularModeError):
        solve_principal(EllipticProblem(g, LAP1, certify_positive(np.eye(2), 0.5), -1.0), GridFunction.zeros(g, 2))


def test_large_lower_term_is_not_contractive(rng):
    g = Grid((32,), (TWO_PI,))
    prob = EllipticProblem(g, LAP1, DiagonalScale(0.5, 2), 1.0, (LowerTerm((0,), 20 * np.eye(2)),))
    with pytest.raises(NonContractiveError) as exc:
        solve_full(prob, random_band_limited(g, 2, 4.0, rng))
    assert exc.value.contraction >= 1


def test_constant_zero_order_contraction_is_exact():
    # L1 R acts on each mode as c / (a + lam + xi^2), largest at xi = 0
    g = Grid((64,), (TWO_PI,))
    prob = EllipticProblem(g, LAP1, certify_positive([[1.0]], 0.5), 1.0, (LowerTerm((0,), [[0.6]]),))
    assert contraction_estimate(prob, iterations=40) == pytest.approx(0.3, rel=1e-6)


@pytest.mark.parametrize("kwargs,err", [
    (dict(lower=(LowerTerm((2,), np.eye(2)),)), "not of lower order"),
    (dict(lower=(LowerTerm((0,), np.eye(3)),)), "size differs"),
    (dict(lower=(LowerTerm((0, 0), np.eye(2)),)), "wrong length"),
])
def test_problem_validation(kwargs, err):
    with pytest.raises(ValidationError, match=err):
        EllipticProblem(Grid((16,), (TWO_PI,)), LAP1, DiagonalScale(1.0, 2), **kwargs)


def test_rhs_fiber_must_match():
    g = Grid((16,), (TWO_PI,))
    with pytest.raises(ValidationError):
        solve_principal(EllipticProblem(g, LAP1, DiagonalScale(1.0, 2)), GridFunction.zeros(g, 3))


def test_relative_bound_of_constant_term():
    A = DiagonalScale(1.0, 2)
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    prob = EllipticProblem(Grid((16,), (TWO_PI,)), LAP1, A, 1.0, (LowerTerm((1,), C, mu=0.0),))
    # C A^-(1 - 1/2) = C diag(2^-1/2, 4^-1/2)
    assert prob.relative_bounds()[0] == pytest.approx(2**-0.5)


def test_closed_form_table_matches_explicit_mode_solves():
    g = Grid((32,), (TWO_PI,))
    part = build_partition(g)
    prob = EllipticProblem(g, LAP1, DiagonalScale(1.0, 2), 1.0, params=BesovParams(0.5))
    lam = 10.0
    tab = resolvent_sweep(prob, (lam,), probes=0, partition=part)
    best = np.zeros(len(tab.columns))
    xi = g.frequencies()[0]
    for j in np.nonzero(np.abs(xi) <= 2.0**part.k_max)[0]:
        for ch in range(2):
            f = GridFunction.mode(g, (int(round(xi[j])),), np.eye(2)[ch])
            u, _ = solve_principal(prob.with_lambda(lam), f, part, report=False)
            fb = besov_norm(f, prob.params, part)
            row = [lam ** (1 - a / 2) * besov_norm(spectral_derivative(u, (a,)), prob.params, part) / fb
                   for a in (0, 1, 2)]
            row.append(besov_norm(u.replace(prob.operator.apply(u.values)), prob.params, part) / fb)
            best = np.maximum(best, row)
    assert tab.columns == ("D(0,)", "D(1,)", "D(2,)", "A")
    assert np.allclose(tab.values[0], best, rtol=1e-10)


def test_random_probes_never_lower_the_table():
    g = Grid((32,), (TWO_PI,))
    prob = EllipticProblem(g, LAP1, DiagonalScale(0.5, 4), 1.0)
    a = resolvent_sweep(prob, (1.0, 100.0), probes=0).values
    b = resolvent_sweep(prob, (1.0, 100.0), probes=3).values
    assert np.all(b >= a)


@given(st.integers(0, 2**31), st.floats(0.1, 1e3), st.floats(-0.45, 0.45))
def test_residual_for_sectorial_lambdas(seed, r, angle):
    g = Grid((32,), (TWO_PI,))
    lam = r * np.exp(1j * math.pi * angle)
    prob = EllipticProblem(g, LAP1, certify_positive(NONNORMAL, 0.5 * math.pi), lam)
    f = random_band_limited(g, 3, 8.0, np.random.default_rng(seed))
    _, rep = solve_principal(prob, f)
    assert rep.residual <= 1e-12


@given(st.integers(0, 2**31), st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_full_solve_is_linear(seed, c):
    g = Grid((32,), (TWO_PI,))
    rng = np.random.default_rng(seed)
    field = (0.2 + 0.1 * np.cos(g.coordinates()[0]))[:, None, None] * np.eye(2)
    prob = EllipticProblem(g, LAP1, DiagonalScale(0.5, 2), 1.0, (LowerTerm((1,), field),))
    f1, f2 = random_band_limited(g, 2, 8.0, rng), random_band_limited(g, 2, 8.0, rng)
    u1, _ = solve_full(prob, f1, tol=1e-14, report=False)
    u2, _ = solve_full(prob, f2, tol=1e-14, report=False)
    u, _ = solve_full(prob, f1 + c * f2, tol=1e-14, report=False)
    scale = 1 + abs(c)
    assert np.allclose(u.values, u1.values + c * u2.values, atol=1e-10 * scale)
