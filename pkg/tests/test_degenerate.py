import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besovkit.degenerate import (
    degenerate_derivative,
    degenerate_solve,
    degenerate_transform,
    tau_derivative,
)
from besovkit.elliptic import EllipticProblem, EllipticSymbol, solve_principal
from besovkit.errors import ValidationError
from besovkit.grid import Grid, GridFunction, random_band_limited, spectral_derivative
from besovkit.operators import DiagonalScale

TWO_PI = 2 * math.pi
LAP1 = EllipticSymbol.positive_laplacian_power(1, 1)


def periodic_gamma(x):
    return 1 + 0.5 * np.cos(math.pi * x / 2) ** 2


def smooth_u(x):
    return np.exp(np.sin(math.pi * x))


def smooth_du(x):
    return math.pi * np.cos(math.pi * x) * smooth_u(x)


def test_unit_weight_gives_identity_maps(rng):
    g = Grid((32, 16), (TWO_PI, 3.0))
    dmap = degenerate_transform(g, lambda x: np.ones_like(x))
    f = random_band_limited(g, 2, 4.0, rng)
    assert dmap.identity and dmap.tau_grid == g
    assert np.array_equal(dmap.to_tau(f).values, f.values)
    for alpha in [(1, 0), (0, 2), (1, 1)]:
        assert np.array_equal(tau_derivative(f, dmap, alpha).values, spectral_derivative(f, alpha).values)


def test_tau_period_is_the_integral_of_the_inverse_weight():
    dmap = degenerate_transform(Grid((256,), (4.0,)), lambda x: 1 + x**2)
    assert dmap.tau_grid.periods[0] == pytest.approx(2 * math.atan(2.0), rel=1e-5)
    # the origin maps to the origin
    x = dmap.x_coordinates()[0]
    assert dmap.tau_nodes[0][np.argmin(np.abs(x))] == pytest.approx(0.0, abs=1e-14)


def test_weight_must_be_positive_on_the_closed_box():
    with pytest.raises(ValidationError):
        degenerate_transform(Grid((32,), (2.0,)), lambda x: x**2)
    # vanishing only outside the box is fine
    dmap = degenerate_transform(Grid((32,), (2.0,)), lambda x: (x - 1.5) ** 2)
    assert not dmap.identity


@pytest.mark.parametrize("N", [64, 128])
def test_resampling_round_trip(N):
    g = Grid((N,), (2.0,))
    dmap = degenerate_transform(g, periodic_gamma)
    x = dmap.x_coordinates()[0]
    u = GridFunction(g, smooth_u(x))
    back = dmap.to_x(dmap.to_tau(u))
    assert np.max(np.abs(back.values - u.values)) < 1e-3 * (64 / N) ** 2


def test_x_route_is_spectrally_accurate():
    g = Grid((64,), (2.0,))
    dmap = degenerate_transform(g, periodic_gamma)
    x = dmap.x_coordinates()[0]
    got = degenerate_derivative(GridFunction(g, smooth_u(x)), dmap, (1,)).values[:, 0]
    assert np.allclose(got, periodic_gamma(x) * smooth_du(x), atol=1e-10)


def test_tau_route_converges_at_second_order():
    errs = []
    for N in (64, 128, 256):
        g = Grid((N,), (2.0,))
        dmap = degenerate_transform(g, periodic_gamma)
        x = dmap.x_coordinates()[0]
        got = tau_derivative(GridFunction(g, smooth_u(x)), dmap, (1,)).values[:, 0]
        errs.append(np.max(np.abs(got - periodic_gamma(x) * smooth_du(x))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_identity_solve_matches_principal_solve(rng):
    g = Grid((64,), (TWO_PI,))
    dmap = degenerate_transform(g, lambda x: np.ones_like(x))
    prob = EllipticProblem(g, LAP1, DiagonalScale(0.5, 2), 3.0)
    f = random_band_limited(g, 2, 16.0, rng)
    u, rep = degenerate_solve(prob, dmap, f)
    ref, _ = solve_principal(prob, f, report=False)
    assert np.allclose(u.values, ref.values, atol=1e-14)
    assert rep.coercive_ratio > 0


def test_problem_must_live_on_tau_grid(rng):
    g = Grid((64,), (2.0,))
    dmap = degenerate_transform(g, periodic_gamma)
    prob = EllipticProblem(g, LAP1, DiagonalScale(0.5, 2), 3.0)
    with pytest.raises(ValidationError):
        degenerate_solve(prob, dmap, random_band_limited(g, 2, 8.0, rng))


def test_function_must_live_on_x_grid():
    dmap = degenerate_transform(Grid((32,), (2.0,)), periodic_gamma)
    with pytest.raises(ValidationError):
        dmap.to_tau(GridFunction.zeros(Grid((32,), (3.0,))))


@given(st.floats(0.2, 5.0))
def test_constant_weight_rescales_tau(c):
    g = Grid((32,), (2.0,))
    dmap = degenerate_transform(g, lambda x: c * np.ones_like(x))
    assert dmap.tau_grid.periods[0] == pytest.approx(2.0 / c, rel=1e-12)
    x = dmap.x_coordinates()[0]
    u = GridFunction(g, smooth_u(x))
    # gamma d/dx with constant gamma is exact on both routes
    assert np.allclose(tau_derivative(u, dmap, (1,)).values[:, 0], c * smooth_du(x), atol=1e-8)


@given(st.integers(0, 2**31), st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_maps_are_linear(seed, c):
    g = Grid((32,), (2.0,))
    dmap = degenerate_transform(g, periodic_gamma)
    rng = np.random.default_rng(seed)
    a, b = random_band_limited(g, 2, 8.0, rng), random_band_limited(g, 2, 8.0, rng)
    lhs = dmap.to_tau(a + c * b).values
    rhs = dmap.to_tau(a).values + c * dmap.to_tau(b).values
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + abs(c)))
