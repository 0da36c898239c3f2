import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from besovkit import oracles
from besovkit.elliptic import EllipticProblem, EllipticSymbol, LowerTerm
from besovkit.errors import HypothesisViolation, ValidationError
from besovkit.grid import Grid, GridFunction, random_band_limited
from besovkit.operators import DiagonalScale, certify_positive
from besovkit.parabolic import ParabolicProblem, phi1, phi2, solve_cauchy

TWO_PI = 2 * math.pi
LAP1 = EllipticSymbol.positive_laplacian_power(1, 1)
ROTATING = np.array([[2.0, -1.0], [1.0, 2.0]])


def _problem(A, dt=0.05, steps=20, lower=(), N=32, **kw):
    g = Grid((N,), (TWO_PI,))
    return ParabolicProblem(EllipticProblem(g, LAP1, A, 0.0, lower), dt, steps, **kw)


def _series(z, terms=30):
    # sum_k (-z)^k / (k + j)! for j = 1, 2
    k = np.arange(terms)
    f1 = sum((-z) ** kk / math.factorial(kk + 1) for kk in k)
    f2 = sum((-z) ** kk / math.factorial(kk + 2) for kk in k)
    return f1, f2


@given(st.floats(1e-6, 0.3), st.floats(-math.pi, math.pi))
def test_phi_functions_near_the_series_cutoff(r, arg):
    z = r * np.exp(1j * arg)
    f1, f2 = _series(z)
    assert abs(phi1(z) - f1) <= 2e-15 * abs(f1)
    assert abs(phi2(z) - f2) <= 1e-14 * abs(f2)


@pytest.mark.parametrize("z", [0.0, 1e-20, 1.0, 10.0, 3 + 4j, 700.0])
def test_phi_functions_closed_forms(z):
    if z == 0 or abs(z) < 1e-10:
        assert phi1(z) == 1 and phi2(z) == 0.5
        return
    assert phi1(z) == pytest.approx((1 - np.exp(-z)) / z, rel=1e-14)
    assert phi2(z) == pytest.approx((1 - (1 - np.exp(-z)) / z) / z, rel=1e-12)


def test_constant_forcing_of_an_eigenmode():
    pp = _problem(certify_positive(ROTATING, 0.75 * math.pi), dt=0.05, steps=40)
    g = pp.grid
    mus, vecs = np.linalg.eig(ROTATING + 9 * np.eye(2))
    for mu, v in zip(mus, vecs.T):
        f = GridFunction.mode(g, (3,), v)
        u, _ = solve_cauchy(pp, f, report=False)
        exact = oracles.closed_form_duhamel(mu, pp.times())[:, None, None] * f.values[None]
        assert np.allclose(u, exact, rtol=0, atol=1e-13)


def test_step_forcing_against_matrix_exponential(rng):
    # exact for piecewise-constant forcing: one augmented exponential per step
    A = certify_positive(ROTATING, 0.75 * math.pi)
    pp = _problem(A, dt=0.1, steps=12, lower=(LowerTerm((1,), 0.3 * np.eye(2)),))
    g = pp.grid
    j = 4
    amps = rng.standard_normal((12, 2)) + 1j * rng.standard_normal((12, 2))
    mode = GridFunction.mode(g, (j,), [1.0]).values[..., 0]
    F = amps[:, None, :] * mode[None, :, None]
    u, rep = solve_cauchy(pp, F)
    M = ROTATING + (j**2 + 0.3j * j) * np.eye(2)
    y = np.zeros(2, dtype=complex)
    for m in range(12):
        aug = np.zeros((3, 3), dtype=complex)
        aug[:2, :2], aug[:2, 2] = -M, amps[m]
        y = (expm(aug * pp.dt) @ np.append(y, 1.0))[:2]
        assert np.allclose(u[m + 1], mode[:, None] * y[None, :], atol=1e-12)
    assert rep.residual <= 1e-12


def test_zero_forcing_stays_zero():
    pp = _problem(DiagonalScale(0.5, 3))
    u, _ = solve_cauchy(pp, GridFunction.zeros(pp.grid, 3), report=False)
    assert not np.any(u)


def test_causality(rng):
    pp = _problem(DiagonalScale(0.5, 2), steps=16)
    F = np.stack([random_band_limited(pp.grid, 2, 4.0, rng).values for _ in range(16)])
    u1, _ = solve_cauchy(pp, F, report=False)
    G = F.copy()
    G[9:] *= -3
    u2, _ = solve_cauchy(pp, G, report=False)
    assert np.array_equal(u1[:10], u2[:10])
    assert not np.allclose(u1[10:], u2[10:])


def test_sector_violation():
    # eigenvalues 1 +- 5i sit outside the sector allowed by phi = 3 pi / 4
    A = certify_positive(np.array([[1.0, -5.0], [5.0, 1.0]]), 0.45 * math.pi)
    with pytest.raises(HypothesisViolation):
        solve_cauchy(_problem(A), GridFunction.zeros(Grid((32,), (TWO_PI,)), 2))


@pytest.mark.parametrize("kw", [dict(sector_angle=0.4 * math.pi), dict(sector_angle=math.pi), dict(dt=0.0),
                                dict(steps=0), dict(time_q=0.5)])
def test_problem_validation(kw):
    args = dict(dt=0.1, steps=4)
    args.update(kw)
    with pytest.raises(ValidationError):
        _problem(DiagonalScale(1.0, 1), **args)


def test_spatial_lambda_must_vanish():
    g = Grid((16,), (TWO_PI,))
    with pytest.raises(ValidationError):
        ParabolicProblem(EllipticProblem(g, LAP1, DiagonalScale(1.0, 1), 1.0), 0.1, 4)


def test_forcing_shape_checked():
    pp = _problem(DiagonalScale(1.0, 2))
    with pytest.raises(ValidationError):
        solve_cauchy(pp, np.zeros((3, 32, 2)))


def test_report_norm_keys(rng):
    pp = _problem(DiagonalScale(0.5, 2), steps=8)
    _, rep = solve_cauchy(pp, random_band_limited(pp.grid, 2, 4.0, rng))
    assert set(rep.norms) == {"dt", "D(2,)", "A", "f"}
    assert rep.averages.shape == (8, 32, 2)
    assert rep.ratio == pytest.approx((rep.norms["dt"] + rep.norms["D(2,)"] + rep.norms["A"]) / rep.norms["f"])


@given(st.integers(0, 2**31), st.floats(1e-3, 0.5), st.integers(1, 12))
def test_discrete_balance_residual(seed, dt, steps):
    pp = _problem(certify_positive(ROTATING, 0.75 * math.pi), dt=dt, steps=steps)
    rng = np.random.default_rng(seed)
    F = np.stack([random_band_limited(pp.grid, 2, 8.0, rng).values for _ in range(steps)])
    _, rep = solve_cauchy(pp, F)
    assert rep.residual <= 1e-11


@given(st.integers(0, 2**31), st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_solution_is_linear_in_forcing(seed, c):
    pp = _problem(DiagonalScale(0.5, 2), steps=6)
    rng = np.random.default_rng(seed)
    F1 = np.stack([random_band_limited(pp.grid, 2, 8.0, rng).values for _ in range(6)])
    F2 = np.stack([random_band_limited(pp.grid, 2, 8.0, rng).values for _ in range(6)])
    u1, _ = solve_cauchy(pp, F1, report=False)
    u2, _ = solve_cauchy(pp, F2, report=False)
    u, _ = solve_cauchy(pp, F1 + c * F2, report=False)
    assert np.allclose(u, u1 + c * u2, atol=1e-12 * (1 + abs(c)))
