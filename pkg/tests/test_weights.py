import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from besovkit.errors import ConfigError, HypothesisViolation, ValidationError
from besovkit.grid import Grid, GridFunction
from besovkit.weights import Weight, ap_constant, ap_refinement_sweep, lq_norm_of, weighted_lq_norm
from reference import brute_ap, cell_average

TWO_PI = 2 * math.pi


@pytest.mark.parametrize("beta", [0.5, -0.5, -0.9, 1.5])
def test_singular_cell_is_the_exact_average(beta):
    g = Grid((32,), (2.0,))
    cells = Weight.power_law(beta).cell_values(g)
    h = g.spacing[0]
    ref = cell_average(lambda t: abs(t) ** beta, -h / 2, h / 2, singular=0.0)
    assert cells[0] == pytest.approx(ref, rel=1e-9)
    # regular cells are point values of the periodic distance
    x = g.coordinates()[0]
    d = np.minimum(x, 2.0 - x)
    assert np.allclose(cells[1:], d[1:] ** beta)


def test_nonintegrable_singularity_drops_the_cell():
    cells = Weight.power_law(-1.0).cell_values(Grid((16,), (2.0,)))
    assert cells[0] == 0 and np.all(cells[1:] > 0)


def test_regularized_weight_is_pointwise():
    g = Grid((16,), (2.0,))
    x = g.coordinates()[0]
    assert np.allclose(Weight.power_law(0.5, eps=0.1).cell_values(g), (0.1 + np.minimum(x, 2 - x)) ** 0.5)


def test_product_weight_in_2d():
    g = Grid((8, 16), (2.0, 4.0))
    w = Weight.power_law((0.5, 0.25), eps=0.2)
    x0, x1 = g.coordinates()
    d0, d1 = np.minimum(x0, 2 - x0), np.minimum(x1, 4 - x1)
    ref = (0.2 + d0)[:, None] ** 0.5 * (0.2 + d1)[None, :] ** 0.25
    assert np.allclose(w.cell_values(g), ref)


def test_weighted_lq_by_hand():
    g = Grid((8,), (2.0,))
    vals = np.arange(1.0, 9.0)
    w = Weight.tabulated(g, np.linspace(1, 2, 8))
    got = weighted_lq_norm(GridFunction(g, vals), 3.0, w)
    ref = (np.sum(vals**3 * np.linspace(1, 2, 8)) * 0.25) ** (1 / 3)
    assert got == pytest.approx(ref, rel=1e-14)


def test_sup_norm_ignores_dropped_cells():
    g = Grid((8,), (2.0,))
    cells = np.array([0.0, 1, 1, 1, 1, 1, 1, 1])
    vals = np.array([100.0, 1, 2, 3, 4, 5, 6, 7])
    assert lq_norm_of(vals, g, math.inf, cells=cells) == 7.0


@pytest.mark.parametrize("spec,kind", [("constant:2.5", "constant"), ("power:beta=0.5,eps=0.1", "power"),
                                       ("power:beta=0.5;-0.25,center=1;0", "power")])
def test_from_spec(spec, kind):
    assert Weight.from_spec(spec).kind == kind


@pytest.mark.parametrize("spec", ["power:gamma=1", "bogus:1", "constant:abc", "constant:-1"])
def test_from_spec_rejects(spec):
    with pytest.raises(ConfigError):
        Weight.from_spec(spec)


def test_table_weight_must_be_positive():
    g = Grid((8,), (1.0,))
    with pytest.raises(ValidationError):
        Weight.tabulated(g, np.linspace(-1, 1, 8))


@pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
def test_ap_rejects_boundary_exponents(p):
    with pytest.raises(HypothesisViolation):
        ap_constant(Weight.unit(), p, Grid((16,), (1.0,)))


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
@pytest.mark.parametrize("sizes", [(64,), (16, 16)])
def test_unit_weight_constant_is_one(p, sizes):
    assert ap_constant(Weight.unit(), p, Grid(sizes, (2.0,))).estimate == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ap_matches_brute_force_window_scan(p, rng):
    g = Grid((32,), (1.0,))
    vals = np.exp(rng.standard_normal(32))
    w = Weight.tabulated(g, vals)
    m = 4
    rep = ap_constant(w, p, g, scales=[m * g.spacing[0]], positions=32)
    assert rep.estimate == pytest.approx(brute_ap(vals, vals ** (-1 / (p - 1)), p, m), rel=1e-12)


def test_power_weight_plateau_and_growth():
    sq = [r.estimate for r in ap_refinement_sweep(Weight.power_law(0.5), 2.0, 2.0, 64, 4)]
    inv = [r.estimate for r in ap_refinement_sweep(Weight.power_law(-1.0), 2.0, 2.0, 64, 4)]
    assert abs(sq[-1] / sq[-2] - 1) < 0.05
    assert np.all(np.diff(inv) > 0) and inv[-1] / inv[-2] > 1.05


@given(arrays(np.float64, 16, elements=st.floats(-3, 3)), st.floats(1.2, 5.0), st.floats(0.01, 100.0))
def test_ap_at_least_one_and_scale_invariant(logw, p, c):
    g = Grid((16,), (1.0,))
    a = ap_constant(Weight.tabulated(g, np.exp(logw)), p, g).estimate
    b = ap_constant(Weight.tabulated(g, c * np.exp(logw)), p, g).estimate
    assert a >= 1 - 1e-12
    assert b == pytest.approx(a, rel=1e-9)


@given(arrays(np.float64, 16, elements=st.floats(-50, 50)), st.floats(1.0, 6.0), st.floats(-5, 5))
def test_lq_norm_homogeneous(vals, q, logc):
    g = Grid((16,), (3.0,))
    w = Weight.power_law(0.3, eps=0.1)
    c = math.exp(logc)
    assert lq_norm_of(c * np.abs(vals), g, q, w) == pytest.approx(c * lq_norm_of(np.abs(vals), g, q, w),
                                                                 rel=1e-10, abs=1e-300)
