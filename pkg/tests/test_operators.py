import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besovkit import oracles
from besovkit.bsgf import write_matrix
from besovkit.errors import ConfigError, NotDiagonalizable, PositivityViolation, ValidationError
from besovkit.operators import (
    DiagonalScale,
    certify_positive,
    fractional_power,
    graph_norm,
    operator_from_spec,
    operator_norm,
)

NONNORMAL = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 0.5], [0.2, 0.0, 5.0]])


def test_identity_bound_at_right_angle():
    # (1 + r) / |1 + i r| peaks at r = 1
    A = certify_positive(np.eye(2), 0.5 * math.pi)
    assert A.bound == pytest.approx(math.sqrt(2), rel=1e-6)


@pytest.mark.parametrize("matrix,phi", [(np.eye(2), 0.5 * math.pi), (NONNORMAL, 0.5 * math.pi),
                                        (np.diag([1.0, 4.0, 16.0]), 0.75 * math.pi),
                                        (np.array([[2.0, -1.0], [1.0, 2.0]]), 0.75 * math.pi)])
def test_sampled_bound_against_dense_polar_sweep(matrix, phi):
    A = certify_positive(matrix, phi)
    ref = oracles.angular_resolvent_sweep(matrix, phi, angles=61, moduli=120)
    # the certificate samples three rays; the sweep fills the sector but its
    # modulus spacing misses peaks by a few 1e-4
    assert A.bound <= ref * (1 + 5e-3)
    assert A.bound >= 0.5 * ref


def test_negative_eigenvalue_is_rejected_with_witness():
    with pytest.raises(PositivityViolation) as exc:
        certify_positive(np.diag([-1.0, 2.0]), 0.25 * math.pi)
    assert abs(exc.value.witness - 1.0) < 0.2 and exc.value.ratio > 1e8


def test_positivity_checked_before_diagonalizability():
    jordan_negative = np.array([[-1.0, 1.0], [0.0, -1.0]])
    with pytest.raises(PositivityViolation):
        certify_positive(jordan_negative, 0.25 * math.pi)


def test_jordan_block_is_not_diagonalizable():
    with pytest.raises(NotDiagonalizable):
        certify_positive(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.25 * math.pi)


@pytest.mark.parametrize("phi", [-0.1, math.pi, 4.0])
def test_sector_angle_range(phi):
    with pytest.raises(ValidationError):
        certify_positive(np.eye(2), phi)


def test_non_square_rejected():
    with pytest.raises(ValidationError):
        certify_positive(np.ones((2, 3)), 0.5)


@pytest.mark.parametrize("sigma,d", [(1.0, 4), (0.5, 8), (-0.5, 3)])
def test_diagonal_scale(sigma, d):
    A = DiagonalScale(sigma, d)
    assert A.is_diagonal and A.eigvec_cond == 1.0
    assert np.allclose(np.diag(A.matrix), 2.0 ** (sigma * np.arange(1, d + 1)))


@pytest.mark.parametrize("theta", [-1.0, -0.5, 0.25, 0.5, 1.0])
def test_fractional_power_of_diagonal(theta):
    A = DiagonalScale(1.0, 4)
    assert np.allclose(fractional_power(A, theta), np.diag(2.0 ** (theta * np.arange(1, 5))))


def test_fractional_power_range():
    with pytest.raises(ValidationError):
        fractional_power(DiagonalScale(1.0, 2), 1.5)


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_operator_norm_closed_forms(p, rng):
    M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert operator_norm(M, p) == pytest.approx(np.linalg.norm(M, ord=p), rel=1e-12)


def test_operator_norm_between_exponents_is_attained_on_probes(rng):
    M = rng.standard_normal((3, 3))
    val = float(operator_norm(M, 3.0, 1.5))
    v = rng.standard_normal((2000, 3))
    ratios = np.linalg.norm(v @ M.T, ord=1.5, axis=1) / np.linalg.norm(v, ord=3, axis=1)
    assert ratios.max() <= val * (1 + 1e-9)
    assert ratios.max() >= 0.9 * val


def test_graph_norm_by_hand():
    A = DiagonalScale(1.0, 2)
    v = np.array([3.0, 4.0])
    assert graph_norm(v, A) == pytest.approx(math.sqrt(25 + 36 + 256))
    assert graph_norm(v, A, 0.5, math.inf) == pytest.approx(max(4.0, 4.0 * 2.0))


def test_spec_parsing(tmp_path):
    assert operator_from_spec("identity:3").dim == 3
    assert operator_from_spec("diag:sigma=0.5,d=5").dim == 5
    write_matrix(NONNORMAL, tmp_path / "m.bsgf")
    assert np.array_equal(operator_from_spec("matrix:m.bsgf", tmp_path).matrix, NONNORMAL)
    for bad in ("diag:tau=1", "cube:2", "identity:x"):
        with pytest.raises(ConfigError):
            operator_from_spec(bad)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_fractional_powers_compose(a, b):
    A = certify_positive(NONNORMAL, 0.5 * math.pi)
    if abs(a + b) > 1:
        return
    lhs = fractional_power(A, a) @ fractional_power(A, b)
    assert np.allclose(lhs, fractional_power(A, a + b), atol=1e-10)


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=6), st.floats(0.05, 0.95))
def test_square_root_squares_back(eigs, phi_frac):
    A = certify_positive(np.diag(eigs), phi_frac * math.pi)
    R = fractional_power(A, 0.5)
    assert np.allclose(R @ R, A.matrix, rtol=1e-12, atol=1e-12)
    # (1 + r) / (r + lam) -> 1; the largest sampled modulus is 1e6
    assert A.bound >= 1 - 2e-4
