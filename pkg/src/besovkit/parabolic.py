"""Cauchy problems ``du/dt + G u = f``, ``u(0) = 0``, on periodic grids.

``G`` is the spatial operator of an :class:`~besovkit.elliptic.EllipticProblem`
with ``lambda = 0``: the principal symbol, the positive operator ``A`` and
optional constant-coefficient lower-order terms.  Per Fourier mode ``G`` is
a ``d x d`` matrix; after diagonalization every component obeys the scalar
ODE ``y' + mu y = g``.  Forcing is piecewise constant on a uniform step
grid, and the exponential integrator

    y_{m+1} = exp(-mu dt) y_m + dt phi1(mu dt) g_m,   phi1(z) = (1 - e^-z) / z

is exact on every step.  The time average over a step is

    ybar_m = phi1(mu dt) y_m + dt phi2(mu dt) g_m,    phi2(z) = (1 - phi1(z)) / z,

so the discrete balance ``(y_{m+1} - y_m)/dt + mu ybar_m = g_m`` holds
identically and serves as the residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticProblem
from .errors import HypothesisViolation, NotDiagonalizable, ValidationError
from .degenerate import project_to_band
from .grid import GridFunction, derivative_symbol, multi_indices, spectral_derivative
from .littlewood_paley import Partition, besov_norm, build_partition
from .operators import EIGVEC_COND_LIMIT

__all__ = [
    "ParabolicProblem",
    "ParabolicReport",
    "phi1",
    "phi2",
    "solve_cauchy",
    "solve_cauchy_degenerate",
    "forcing_series",
]

_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 16  # truncation error below 0.1^16 / 17!


def _phi_series(z: np.ndarray, j: int) -> np.ndarray:
    """``sum_k (-z)^k / (k + j)!`` by Horner's rule."""
    out = np.zeros_like(z)
    for k in range(_SERIES_TERMS - 1, -1, -1):
        out = out * (-z) + 1.0 / math.factorial(k + j)
    return out


def phi1(z) -> np.ndarray:
    """``(1 - exp(-z)) / z`` with the limit 1 at ``z = 0``."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    direct = -np.expm1(-zs) / zs
    return np.where(small, _phi_series(z, 1), direct)


def phi2(z) -> np.ndarray:
    """``(1 - phi1(z)) / z`` with the limit 1/2 at ``z = 0``."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    direct = (1 - phi1(zs)) / zs
    return np.where(small, _phi_series(z, 2), direct)


@dataclass(frozen=True, eq=False)
class ParabolicProblem:
    """Spatial operator, sector angle and uniform time grid.

    ``sector_angle`` must lie in ``(pi/2, pi)``; every per-mode eigenvalue
    ``mu`` of ``G`` has to satisfy ``|arg mu| <= pi - sector_angle``.
    """

    spatial: EllipticProblem
    dt: float
    steps: int
    sector_angle: float = 0.75 * math.pi
    time_q: float = 2.0

    def __post_init__(self):
        if not (0.5 * math.pi < self.sector_angle < math.pi):
            raise ValidationError(f"sector angle must lie in (pi/2, pi), got {self.sector_angle}")
        if self.spatial.lam != 0:
            raise ValidationError("the spatial problem must have lambda = 0")
        if self.spatial.has_variable_coefficients:
            raise ValidationError("parabolic solves need constant-coefficient lower-order terms")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("time step must be positive")
        if int(self.steps) < 1:
            raise ValidationError("at least one time step is required")
        if not (self.time_q >= 1):
            raise ValidationError("time exponent must be >= 1")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def grid(self):
        return self.spatial.grid

    @property
    def t_end(self) -> float:
        return self.dt * self.steps

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True)
class ParabolicReport:
    """Discrete maximal-regularity report.

    ``norms`` holds the time-discrete norms ``(sum_m dt ||X_m||_B^q)^(1/q)``
    of ``du/dt``, of each top-order ``D^a u``, of ``A u`` and of ``f``,
    with ``X_m`` sampled at the end of step ``m``.
    """

    residual: float
    norms: dict
    ratio: float
    dt: float
    steps: int
    averages: np.ndarray = field(repr=False, default=None)


class _Modal:
    """Per-mode eigendecomposition of ``G(xi)``."""

    def __init__(self, problem: ParabolicProblem):
        sp = problem.spatial
        g = sp.grid
        A = sp.operator
        d = A.dim
        K = sp.symbol.on_grid(g)
        self.axes = tuple(range(g.n))
        self.V = self.Vi = None
        if not sp.lower:
            self.mu = A.eigenvalues[None, :] + K.reshape(-1, 1)
            self.mu = self.mu.reshape(g.sizes + (d,))
            if not A.is_diagonal:
                self.V = np.broadcast_to(A.eigenvectors, g.sizes + (d, d))
                self.Vi = np.broadcast_to(A.eigenvectors_inv, g.sizes + (d, d))
        else:
            M = np.broadcast_to(A.matrix, g.sizes + (d, d)) + K[..., None, None] * np.eye(d)
            for t in sp.lower:
                M = M + derivative_symbol(g, t.alpha)[..., None, None] * t.dense()
            w, V = np.linalg.eig(M)
            cond = np.linalg.cond(V)
            if not np.all(cond <= EIGVEC_COND_LIMIT):
                raise NotDiagonalizable(f"per-mode eigenvector condition {np.max(cond):.3g} too large")
            self.mu, self.V, self.Vi = w, V, np.linalg.inv(V)
        mu = self.mu.ravel()
        nz = np.abs(mu) > 0
        worst = float(np.max(np.abs(np.angle(mu[nz])))) if np.any(nz) else 0.0
        if worst > math.pi - problem.sector_angle + 1e-12:
            raise HypothesisViolation(
                f"per-mode symbol angle {worst:.4g} exceeds pi - phi = {math.pi - problem.sector_angle:.4g}"
            )

    def to_eig(self, coef):
        return coef if self.V is None else np.einsum("...ij,...j->...i", self.Vi, coef)

    def from_eig(self, coef):
        return coef if self.V is None else np.einsum("...ij,...j->...i", self.V, coef)


def forcing_series(problem: ParabolicProblem, forcing) -> np.ndarray:
    """Normalize forcing to a ``(steps, *sizes, d)`` complex array.

    Accepts such an array, a sequence of grid functions, or a single grid
    function held constant in time.
    """
    g = problem.grid
    d = problem.spatial.operator.dim
    if isinstance(forcing, GridFunction):
        forcing = [forcing] * problem.steps
    if not isinstance(forcing, np.ndarray):
        items = list(forcing)
        for f in items:
            if f.grid != g:
                raise ValidationError("forcing step lives on a different grid")
        forcing = np.stack([f.values for f in items]) if items else np.zeros((0,) + g.sizes + (d,))
    F = np.asarray(forcing, dtype=complex)
    if F.shape != (problem.steps,) + g.sizes + (d,):
        raise ValidationError(f"forcing shape {F.shape} != {(problem.steps,) + g.sizes + (d,)}")
    if not np.all(np.isfinite(F)):
        raise ValidationError("forcing must be finite")
    return F


def _time_norm(values, dt, q) -> float:
    v = np.asarray(values, dtype=float)
    if math.isinf(q):
        return float(v.max(initial=0.0))
    return float((dt * np.sum(v**q)) ** (1.0 / q))


def _apply_G(problem: ParabolicProblem, coef: np.ndarray, dsyms: dict) -> np.ndarray:
    """FFT coefficients of ``G u`` from those of ``u`` (independent of the eigen route)."""
    sp = problem.spatial
    out = coef @ sp.operator.matrix.T
    for a, c in sp.symbol.coefficients.items():
        out = out + c * dsyms[a][..., None] * coef
    for t in sp.lower:
        out = out + t.act(dsyms[t.alpha][..., None] * coef)
    return out


def solve_cauchy(problem: ParabolicProblem, forcing, fiber_p: float = 2.0, partition: Partition | None = None,
                 strict: bool = True, report: bool = True):
    """Integrate ``du/dt + G u = f`` from ``u(0) = 0``.

    Returns ``(u, report)`` with ``u`` of shape ``(steps + 1, *sizes, d)``;
    ``u[m]`` is the state at ``t = m dt``.
    """
    F = forcing_series(problem, forcing)
    modal = _Modal(problem)
    g = problem.grid
    axes = tuple(range(1, g.n + 1))
    dt = problem.dt
    z = modal.mu * dt
    decay = np.exp(-z)
    gain = dt * phi1(z)
    avg_y = phi1(z)
    avg_g = dt * phi2(z)
    G = modal.to_eig(np.fft.fftn(F, axes=axes)) if modal.V is not None else np.fft.fftn(F, axes=axes)
    M = problem.steps
    Y = np.zeros((M + 1,) + g.sizes + (problem.spatial.operator.dim,), dtype=complex)
    Ybar = np.empty((M,) + Y.shape[1:], dtype=complex)
    for m in range(M):
        Ybar[m] = avg_y * Y[m] + avg_g * G[m]
        Y[m + 1] = decay * Y[m] + gain * G[m]
    # exact derivative at the end of each step, in eigen coordinates
    dY = G - modal.mu * Y[1:]
    U_hat = modal.from_eig(Y)
    u = np.fft.ifftn(U_hat, axes=axes)
    if not report:
        return u, None
    Ubar_hat = modal.from_eig(Ybar)
    dU_hat = modal.from_eig(dY)
    sp = problem.spatial
    dsyms = {a: derivative_symbol(g, a) for a in multi_indices(g.n, sp.symbol.order)}
    F_hat = np.fft.fftn(F, axes=axes)
    res = (U_hat[1:] - U_hat[:-1]) / dt + _apply_G(problem, Ubar_hat, dsyms) - F_hat
    fscale = np.sqrt(np.sum(np.abs(F_hat) ** 2, axis=tuple(range(1, F.ndim))))
    rscale = np.sqrt(np.sum(np.abs(res) ** 2, axis=tuple(range(1, F.ndim))))
    residual = float(rscale.max() / fscale.max()) if fscale.max() > 0 else float(rscale.max())
    part = partition or build_partition(g, sp.params.profile)

    def series_norm(vals_hat):
        vals = np.fft.ifftn(vals_hat, axes=axes)
        return _time_norm(
            [besov_norm(GridFunction(g, v, fiber_p), sp.params, part, strict=strict) for v in vals],
            dt,
            problem.time_q,
        )

    norms = {"dt": series_norm(dU_hat)}
    top = 0.0
    for a in multi_indices(g.n, sp.symbol.order, exact=True):
        norms[f"D{a}"] = series_norm(U_hat[1:] * dsyms[a][..., None])
        top += norms[f"D{a}"]
    norms["A"] = series_norm(U_hat[1:] @ sp.operator.matrix.T)
    norms["f"] = series_norm(F_hat)
    ratio = (norms["dt"] + top + norms["A"]) / norms["f"] if norms["f"] > 0 else 0.0
    avg = np.fft.ifftn(Ubar_hat, axes=axes)
    return u, ParabolicReport(residual, norms, float(ratio), dt, M, avg)


def solve_cauchy_degenerate(problem: ParabolicProblem, dmap, forcing_x, fiber_p: float = 2.0):
    """Degenerate Cauchy problem solved on the ``tau`` grid and pulled back.

    ``problem`` is posed on ``dmap.tau_grid``; ``forcing_x`` lives on the
    ``x`` grid (array or sequence as in :func:`forcing_series`).  Each step
    is resampled to ``tau`` and projected onto the resolved band.  The
    report holds x-space norms of ``du/dt``, of ``D^[a] u`` for the top
    order, of ``A u`` and of ``f``; the top dyadic block absorbs the tail.
    Returns ``(u_x, report)``.
    """
    tg = dmap.tau_grid
    if problem.grid != tg:
        raise ValidationError("problem must be posed on the map's tau grid")
    xg = dmap.x_grid
    d = problem.spatial.operator.dim
    if isinstance(forcing_x, GridFunction):
        forcing_x = [forcing_x] * problem.steps
    if isinstance(forcing_x, np.ndarray):
        fx = [GridFunction(xg, v, fiber_p) for v in forcing_x]
    else:
        fx = list(forcing_x)
    if len(fx) != problem.steps or any(f.grid != xg or f.fiber_dim != d for f in fx):
        raise ValidationError("forcing must hold one x-grid function per step with the operator's fiber size")
    part = build_partition(tg, problem.spatial.params.profile)
    f_tau = np.stack([project_to_band(dmap.to_tau(f), part).values for f in fx])
    u_tau, rep = solve_cauchy(problem, f_tau, fiber_p, part)
    params = problem.spatial.params
    dt = problem.dt

    def pulled(vals):
        return besov_norm(dmap.to_x(GridFunction(tg, vals, fiber_p)), params, strict=False)

    # du/dt at step ends: f_m - G u_{m+1}, evaluated on the tau side
    axes = tuple(range(1, tg.n + 1))
    dsyms = {a: derivative_symbol(tg, a) for a in multi_indices(tg.n, problem.spatial.symbol.order)}
    U_hat = np.fft.fftn(u_tau[1:], axes=axes)
    du = f_tau - np.fft.ifftn(_apply_G(problem, U_hat, dsyms), axes=axes)
    q = problem.time_q
    norms = {"dt": _time_norm([pulled(v) for v in du], dt, q)}
    top = 0.0
    for a in multi_indices(tg.n, problem.spatial.symbol.order, exact=True):
        vals = [spectral_derivative(GridFunction(tg, v, fiber_p), a).values for v in u_tau[1:]]
        norms[f"D{a}"] = _time_norm([pulled(v) for v in vals], dt, q)
        top += norms[f"D{a}"]
    A = problem.spatial.operator
    norms["A"] = _time_norm([pulled(A.apply(v)) for v in u_tau[1:]], dt, q)
    norms["f"] = _time_norm([besov_norm(f, params, strict=False) for f in fx], dt, q)
    ratio = (norms["dt"] + top + norms["A"]) / norms["f"] if norms["f"] > 0 else 0.0
    u_x = np.stack([dmap.to_x(GridFunction(tg, v, fiber_p)).values for v in u_tau])
    return u_x, ParabolicReport(rep.residual, norms, float(ratio), dt, problem.steps)
