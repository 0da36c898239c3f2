"""Positive matrix operators on the fiber and their functional calculus.

A square matrix ``A`` is accepted as positive with angle ``phi`` when

    ||(A + xi)^-1|| <= M / (1 + |xi|)

holds at every sampled ``xi`` in the closed sector ``|arg xi| <= phi``.
Samples cover 64 log-spaced moduli in ``[1e-3, 1e6]`` on the two boundary
rays and on the positive axis, plus ``xi = 0``.  Fractional powers use the
eigendecomposition with the principal branch of ``lambda^theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bsgf import read_matrix
from .errors import (
    BranchCutError,
    ConfigError,
    NotDiagonalizable,
    PositivityViolation,
    ValidationError,
)

__all__ = [
    "PositiveOperator",
    "DiagonalScale",
    "certify_positive",
    "fractional_power",
    "graph_norm",
    "operator_norm",
    "resolvent_samples",
    "operator_from_spec",
    "EIGVEC_COND_LIMIT",
]

#: Largest eigenvector condition number accepted for functional calculus.
EIGVEC_COND_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class PositiveOperator:
    """A certified positive matrix with cached eigendecomposition."""

    matrix: np.ndarray
    sector_angle: float
    bound: float
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    eigenvectors_inv: np.ndarray = field(repr=False)
    eigvec_cond: float = 1.0
    fiber_p: float = 2.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return bool(np.all(m == np.diag(np.diag(m))))

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply the matrix to the trailing fiber axis of ``values``."""
        return values @ self.matrix.T

    def function(self, fn) -> np.ndarray:
        """``V diag(fn(lambda)) V^-1`` for a scalar function ``fn``."""
        V, Vi = self.eigenvectors, self.eigenvectors_inv
        return (V * fn(self.eigenvalues)) @ Vi


def DiagonalScale(sigma: float, d: int, phi: float = 0.5 * np.pi) -> PositiveOperator:
    """Certified ``diag(2^(sigma i))`` for ``i = 1 .. d``."""
    if d < 1:
        raise ValidationError("dimension d must be >= 1")
    return certify_positive(np.diag(2.0 ** (sigma * np.arange(1, d + 1))), phi)


def resolvent_samples(phi: float, count: int = 64, lo: float = 1e-3, hi: float = 1e6) -> np.ndarray:
    """Sample points in the closed sector of half-angle ``phi``."""
    r = np.logspace(math.log10(lo), math.log10(hi), count)
    rays = [r.astype(complex)]
    if phi > 0:
        rays += [r * np.exp(1j * phi), r * np.exp(-1j * phi)]
    return np.concatenate([[0.0 + 0.0j]] + rays)


def _p_norm(x, p, axis=-1):
    a = np.abs(x)
    if math.isinf(p):
        return a.max(axis=axis)
    return np.sum(a**p, axis=axis) ** (1.0 / p)


def _dual(y, p):
    """Norming functional direction of ``y`` in l_p (unit l_p' norm)."""
    a = np.abs(y)
    nrm = _p_norm(y, p)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        ph = np.where(a > 0, y / np.where(a > 0, a, 1), 0)
        out = ph * (a / np.where(nrm > 0, nrm, 1)) ** (p - 1)
    return out


def operator_norm(M: np.ndarray, p_in: float = 2.0, p_out: float | None = None, iters: int = 60) -> np.ndarray:
    """Norm of ``M : l_p_in -> l_p_out`` over the last two axes.

    Exact for ``p_in = p_out`` in {1, 2, inf}, for ``p_in = 1`` and for
    diagonal matrices with equal exponents; otherwise a lower bound from a
    nonlinear power iteration.
    """
    M = np.asarray(M)
    p_out = p_in if p_out is None else p_out
    if p_in == p_out:
        if p_in == 2:
            if M.shape[-1] == 1 or M.shape[-2] == 1:
                return np.sqrt(np.sum(np.abs(M) ** 2, axis=(-2, -1)))
            return np.linalg.norm(M, ord=2, axis=(-2, -1))
        if p_in == 1:
            return np.abs(M).sum(axis=-2).max(axis=-1)
        if math.isinf(p_in):
            return np.abs(M).sum(axis=-1).max(axis=-1)
        if M.shape[-1] == M.shape[-2]:
            off = M - np.einsum("...ii->...i", M)[..., None] * np.eye(M.shape[-1])
            if not np.any(off):
                return np.abs(np.einsum("...ii->...i", M)).max(axis=-1)
    if p_in == 1:
        return _p_norm(np.swapaxes(M, -1, -2), p_out).max(axis=-1)
    # nonlinear power iteration for ||M||_{p -> q}
    pd_in = math.inf if p_in == 1 else (1.0 if math.isinf(p_in) else p_in / (p_in - 1))
    best = np.zeros(M.shape[:-2])
    starts = [np.ones(M.shape[:-2] + (M.shape[-1],), dtype=complex)]
    rng = np.random.default_rng(0)
    starts.append(rng.standard_normal(starts[0].shape) + 0j)
    for x in starts:
        x = x / _p_norm(x, p_in)[..., None]
        for _ in range(iters):
            y = np.einsum("...ij,...j->...i", M, x)
            z = np.einsum("...ji,...j->...i", M.conj(), _dual(y, p_out))
            x = _dual(z, pd_in) if not math.isinf(pd_in) else np.sign(z)
            nx = _p_norm(x, p_in)[..., None]
            x = np.where(nx > 0, x / np.where(nx > 0, nx, 1), x)
        y = np.einsum("...ij,...j->...i", M, x)
        best = np.maximum(best, _p_norm(y, p_out))
    return best


def _resolvent_norms(A: np.ndarray, samples: np.ndarray, p: float) -> np.ndarray:
    d = A.shape[0]
    mats = A[None] + samples[:, None, None] * np.eye(d)[None]
    if p == 2:
        sv = np.linalg.svd(mats, compute_uv=False)
        smin = sv[:, -1]
        with np.errstate(divide="ignore"):
            return np.where(smin > 0, 1.0 / smin, np.inf)
    out = np.empty(len(samples))
    for i, m in enumerate(mats):
        try:
            if np.linalg.cond(m) > 1e15:
                out[i] = np.inf
                continue
            out[i] = operator_norm(np.linalg.inv(m), p)
        except np.linalg.LinAlgError:
            out[i] = np.inf
    return out


def certify_positive(matrix, phi: float, m_cap: float = 1e8, p: float = 2.0,
                     samples: np.ndarray | None = None) -> PositiveOperator:
    """Certify positivity with angle ``phi`` and return the operator.

    The sampled bound ``M = max ||(A + xi)^-1|| (1 + |xi|)`` is checked
    first; if it is infinite or exceeds ``m_cap`` a
    :class:`PositivityViolation` carrying the worst sample is raised.  Then
    the eigendecomposition is computed and a :class:`NotDiagonalizable`
    error is raised if the eigenvector condition number exceeds
    ``EIGVEC_COND_LIMIT``.
    """
    A = np.array(matrix, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("operator matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValidationError("operator matrix must be finite")
    if not 0 <= phi < np.pi:
        raise ValidationError(f"sector angle must satisfy 0 <= phi < pi, got {phi}")
    xs = resolvent_samples(phi) if samples is None else np.asarray(samples, dtype=complex)
    ratios = _resolvent_norms(A, xs, p) * (1 + np.abs(xs))
    worst = int(np.argmax(ratios))
    M = float(ratios[worst])
    if not (M <= m_cap):
        raise PositivityViolation(
            f"resolvent bound fails at xi = {xs[worst]:.3g} (ratio {M:.3g} > cap {m_cap:.3g})",
            complex(xs[worst]),
            M,
        )
    w, V = np.linalg.eig(A)
    cond = float(np.linalg.cond(V))
    if not cond <= EIGVEC_COND_LIMIT:
        raise NotDiagonalizable(f"eigenvector condition number {cond:.3g} exceeds {EIGVEC_COND_LIMIT:g}")
    if np.all(A == np.diag(np.diag(A))):
        w, V, Vi = np.diag(A).copy(), np.eye(A.shape[0], dtype=complex), np.eye(A.shape[0], dtype=complex)
        cond = 1.0
    else:
        Vi = np.linalg.inv(V)
    for arr in (A, w, V, Vi):
        arr.setflags(write=False)
    return PositiveOperator(A, float(phi), M * (1 + 1e-10), w, V, Vi, cond, p)


def _principal_power(lam: np.ndarray, theta: float) -> np.ndarray:
    bad = (np.abs(lam.imag) <= 1e-14 * np.abs(lam)) & (lam.real <= 0)
    if np.any(bad):
        raise BranchCutError(f"eigenvalue {lam[bad][0]} lies on the branch cut (-inf, 0]")
    return np.exp(theta * np.log(lam))


def fractional_power(A: PositiveOperator, theta: float) -> np.ndarray:
    """``A^theta`` for ``theta`` in ``[-1, 1]`` via the principal branch."""
    if not -1 <= theta <= 1:
        raise ValidationError(f"theta must lie in [-1, 1], got {theta}")
    if theta == 0:
        return np.eye(A.dim, dtype=complex)
    if theta == 1:
        return A.matrix.copy()
    return A.function(lambda lam: _principal_power(lam, theta))


def graph_norm(v: np.ndarray, A: PositiveOperator, theta: float = 1.0, p: float = 2.0) -> np.ndarray:
    """``(|v|_p^p + |A^theta v|_p^p)^(1/p)`` over the trailing axis."""
    p = float(p)
    if not (p >= 1 or math.isinf(p)):
        raise ValidationError(f"p must be >= 1, got {p}")
    v = np.asarray(v)
    Av = v @ fractional_power(A, theta).T
    a, b = _p_norm(v, p), _p_norm(Av, p)
    if math.isinf(p):
        return np.maximum(a, b)
    return (a**p + b**p) ** (1.0 / p)


def operator_from_spec(text: str, base_dir=None, phi: float = 0.5 * np.pi) -> PositiveOperator:
    """Parse ``identity:d``, ``diag:sigma=..,d=..`` or ``matrix:<path>``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip()
    try:
        if kind == "identity":
            return certify_positive(np.eye(int(rest)), phi)
        if kind == "diag":
            opts = {k.strip(): v.strip() for k, v in (item.split("=", 1) for item in rest.split(",") if item.strip())}
            unknown = set(opts) - {"sigma", "d"}
            if unknown:
                raise ConfigError(f"unknown diag option(s) {sorted(unknown)}")
            return DiagonalScale(float(opts.get("sigma", 1.0)), int(opts.get("d", 1)), phi)
        if kind == "matrix":
            path = Path(rest.strip())
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return certify_positive(read_matrix(path), phi)
    except ValueError as exc:
        raise ConfigError(f"bad operator spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown operator kind in {text!r}")
