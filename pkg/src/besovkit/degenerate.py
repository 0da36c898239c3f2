"""Change of variables for degenerate weighted derivatives.

For positive axis weights ``gamma_k`` the derivative
``D_k^[1] = gamma_k(x_k) d/dx_k`` becomes ``d/dtau_k`` under

    tau_k(x_k) = int_0^{x_k} dy / gamma_k(y),

so an equation in ``D^[a]`` on the ``x``-box turns into a nondegenerate
equation on the ``tau``-box, which is again treated as a torus.  The
``tau`` table is built with the cumulative trapezoid rule on the ``x``
nodes; the inverse map uses monotone cubic (PCHIP) interpolation, and
grid functions are moved between the two boxes by evaluating their
trigonometric interpolants at the mapped nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .elliptic import ResolventTable, _column_labels, _mode_ladder, solve_full
from .errors import ValidationError
from .grid import Grid, GridFunction, derivative_symbol, multi_indices, random_band_limited, spectral_derivative
from .littlewood_paley import besov_norm, build_partition

__all__ = [
    "DegenerateMap",
    "degenerate_transform",
    "degenerate_derivative",
    "tau_derivative",
    "project_to_band",
    "degenerate_solve",
    "degenerate_resolvent_sweep",
]


def _trig_eval_matrix(N: int, L: float, pts: np.ndarray) -> np.ndarray:
    """Matrix ``E`` with ``(E @ v)[m] = trig interpolant of v at pts[m]``.

    ``pts`` are offsets from the first node; the interpolant uses the FFT
    frequency set, including the unpaired Nyquist mode as is.
    """
    xi = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    F = np.exp(-1j * np.outer(xi, np.arange(N) * (L / N))) / N
    return np.exp(1j * np.outer(pts, xi)) @ F


def _apply_axis(mat: np.ndarray, vals: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(vals, axis, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class DegenerateMap:
    """Tabulated substitution between an ``x``-grid and a ``tau``-grid.

    ``x_lo`` is the lower corner of the ``x`` box, so node ``j`` of axis
    ``k`` sits at ``x_lo[k] + j L_k / N_k``.  The ``tau`` grid has the same
    point counts and periods ``T_k = tau_k(x_lo + L) - tau_k(x_lo)``.
    """

    x_grid: Grid
    x_lo: tuple
    gammas: tuple
    tau_nodes: tuple = field(repr=False)
    tau_lo: tuple
    tau_grid: Grid
    identity: bool
    _to_tau: tuple = field(repr=False, default=())
    _to_x: tuple = field(repr=False, default=())

    def x_coordinates(self) -> list:
        return [lo + x for lo, x in zip(self.x_lo, self.x_grid.coordinates())]

    def tau_coordinates(self) -> list:
        return [lo + t for lo, t in zip(self.tau_lo, self.tau_grid.coordinates())]

    def gamma_values(self) -> list:
        return [np.asarray(g(x), dtype=float) * np.ones_like(x) for g, x in zip(self.gammas, self.x_coordinates())]

    def to_tau(self, f: GridFunction) -> GridFunction:
        """Resample ``u(x)`` to ``u(x(tau))`` on the ``tau`` grid."""
        if f.grid != self.x_grid:
            raise ValidationError("function does not live on the map's x grid")
        if self.identity:
            return GridFunction(self.tau_grid, f.values, f.fiber_norm_p)
        vals = f.values
        for k, mat in enumerate(self._to_tau):
            vals = _apply_axis(mat, vals, k)
        return GridFunction(self.tau_grid, vals, f.fiber_norm_p)

    def to_x(self, f: GridFunction) -> GridFunction:
        """Resample ``v(tau)`` to ``v(tau(x))`` on the ``x`` grid."""
        if f.grid != self.tau_grid:
            raise ValidationError("function does not live on the map's tau grid")
        if self.identity:
            return GridFunction(self.x_grid, f.values, f.fiber_norm_p)
        vals = f.values
        for k, mat in enumerate(self._to_x):
            vals = _apply_axis(mat, vals, k)
        return GridFunction(self.x_grid, vals, f.fiber_norm_p)


def degenerate_transform(grid: Grid, gammas: Sequence[Callable] | Callable, x_lo=None) -> DegenerateMap:
    """Build the substitution ``tau_k = int dx / gamma_k`` on each axis.

    ``gammas`` holds one vectorized callable per axis (a single callable is
    used for all axes).  ``x_lo`` defaults to ``-L_k / 2``.  Every weight
    must be positive and finite at the nodes, including the closing node
    ``x_lo + L``; degeneracy is allowed only outside the sampled box.
    """
    if callable(gammas):
        gammas = (gammas,) * grid.n
    gammas = tuple(gammas)
    if len(gammas) != grid.n:
        raise ValidationError("one weight per axis is required")
    x_lo = tuple(-L / 2 for L in grid.periods) if x_lo is None else tuple(np.atleast_1d(x_lo).astype(float))
    identity = True
    tau_nodes, tau_lo, periods, to_tau, to_x = [], [], [], [], []
    for k, (g, N, L, lo) in enumerate(zip(gammas, grid.sizes, grid.periods, x_lo)):
        x = lo + np.arange(N + 1) * (L / N)
        gam = np.asarray(g(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite(gam)) or np.any(gam <= 0):
            raise ValidationError(f"axis {k}: weight must be positive and finite on the closed box")
        unit = bool(np.all(gam == 1.0))
        identity &= unit
        if unit:
            # exact: summed cell widths drift from L by a few ulps
            tau, T = x.copy(), float(L)
        else:
            inv = 1.0 / gam
            h = L / N
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (inv[1:] + inv[:-1]))])
            # offset so that tau(0) = 0 when 0 lies in the box
            shift = float(np.interp(0.0, x, cum)) if x[0] <= 0 <= x[-1] else 0.0
            tau = cum - shift
            T = tau[-1] - tau[0]
        tau_nodes.append(tau[:-1])
        tau_lo.append(float(tau[0]))
        periods.append(float(T))
        inverse = PchipInterpolator(tau, x - lo)
        tau_pts = np.arange(N) * (T / N)
        x_at_tau = inverse(tau[0] + tau_pts)
        to_tau.append(_trig_eval_matrix(N, L, x_at_tau))
        to_x.append(_trig_eval_matrix(N, T, tau[:-1] - tau[0]))
    tau_grid = Grid(grid.sizes, tuple(periods))
    return DegenerateMap(grid, x_lo, gammas, tuple(tau_nodes), tuple(tau_lo), tau_grid, identity,
                         tuple(to_tau), tuple(to_x))


def degenerate_derivative(f: GridFunction, dmap: DegenerateMap, alpha: Sequence[int]) -> GridFunction:
    """``D^[alpha] f = prod_k (gamma_k d/dx_k)^alpha_k f`` computed in ``x``.

    Each factor is a spectral derivative followed by multiplication with
    the axis weight at the nodes.
    """
    g = f.grid
    if g != dmap.x_grid:
        raise ValidationError("function does not live on the map's x grid")
    gam = dmap.gamma_values()
    vals = f.values
    axes = tuple(range(g.n))
    for k, a in enumerate(alpha):
        unit = tuple(1 if j == k else 0 for j in range(g.n))
        sym = derivative_symbol(g, unit)[..., None]
        shape = [1] * (g.n + 1)
        shape[k] = -1
        for _ in range(int(a)):
            vals = np.fft.ifftn(np.fft.fftn(vals, axes=axes) * sym, axes=axes) * gam[k].reshape(shape)
    return f.replace(vals)


def tau_derivative(f: GridFunction, dmap: DegenerateMap, alpha: Sequence[int]) -> GridFunction:
    """``D^[alpha]`` computed as ``d^alpha/dtau^alpha`` on the ``tau`` grid and pulled back."""
    return dmap.to_x(spectral_derivative(dmap.to_tau(f), alpha))


# -- degenerate elliptic problems ----------------------------------------------


@dataclass(frozen=True)
class DegenerateReport:
    norms: dict
    coercive_ratio: float
    tau_report: object = None


def project_to_band(f: GridFunction, partition) -> GridFunction:
    """Drop the Fourier modes of ``f`` outside the partition's resolved band."""
    axes = tuple(range(f.grid.n))
    coef = np.fft.fftn(f.values, axes=axes) * partition.band_mask()[..., None]
    return f.replace(np.fft.ifftn(coef, axes=axes))


def _pulled_back_norms(u_tau: GridFunction, dmap: DegenerateMap, problem, f_x: GridFunction) -> dict:
    """x-space Besov norms of ``D^[a] u`` for ``|a| <= 2l`` and of ``A u``.

    The top dyadic block absorbs the spectral tail, since pulled-back
    functions are not band-limited on the x grid.
    """
    params = problem.params
    norms = {}
    for a in multi_indices(u_tau.grid.n, problem.symbol.order):
        d = dmap.to_x(spectral_derivative(u_tau, a))
        norms[f"D{a}"] = besov_norm(d, params, strict=False)
    u_x = dmap.to_x(u_tau)
    norms["A"] = besov_norm(u_x.replace(problem.operator.apply(u_x.values)), params, strict=False)
    norms["f"] = besov_norm(f_x, params, strict=False)
    return norms


def degenerate_solve(problem, dmap: DegenerateMap, f_x: GridFunction):
    """Solve the degenerate equation through the substitution.

    ``problem`` is an :class:`~besovkit.elliptic.EllipticProblem` posed on
    ``dmap.tau_grid``; ``f_x`` lives on the x grid.  The resampled
    right-hand side is projected onto the resolved tau band first.  Returns ``(u_x, report)``
    where the report holds x-space norms of ``D^[a] u``.
    """
    if problem.grid != dmap.tau_grid:
        raise ValidationError("problem must be posed on the map's tau grid")
    part = build_partition(dmap.tau_grid, problem.params.profile)
    # resampling leaks a little mass past the band; solve in the band (Galerkin)
    f_tau = project_to_band(dmap.to_tau(f_x), part)
    u_tau, rep = solve_full(problem, f_tau, partition=part, report=False)
    norms = _pulled_back_norms(u_tau, dmap, problem, f_x)
    top = sum(norms[f"D{a}"] for a in multi_indices(problem.grid.n, problem.symbol.order, exact=True))
    ratio = (top + norms["A"]) / norms["f"] if norms["f"] > 0 else 0.0
    return dmap.to_x(u_tau), DegenerateReport(norms, float(ratio), rep)


def degenerate_resolvent_sweep(problem, dmap: DegenerateMap, lams, probes: int = 4, seed: int = 0,
                               fiber_p: float = 2.0):
    """x-space table of ``|lambda|^(1-|a|/(2l)) ||D^[a] (Q + lambda)^-1||`` and ``||A (Q + lambda)^-1||``.

    Probes are single tau-modes on a half-octave ladder (pulled back to x)
    and random band-limited tau-functions, each paired with channel
    vectors.  For a diagonal operator only the extreme channels are
    probed, since channels decouple and every column is monotone in the
    eigenvalue.
    """
    tg = dmap.tau_grid
    d = problem.operator.dim
    alphas, labels = _column_labels(problem)
    order = problem.symbol.order
    part = build_partition(tg, problem.params.profile)
    if problem.operator.is_diagonal and d > 2:
        lam_order = np.argsort(np.abs(problem.operator.eigenvalues))
        channels = [int(lam_order[0]), int(lam_order[-1])]
    else:
        channels = list(range(d))
    sources = []
    for idx in _mode_ladder(tg, part.k_max):
        for ch in channels:
            v = np.zeros(d)
            v[ch] = 1
            sources.append(GridFunction.mode(tg, idx, v, fiber_p))
    for i in range(probes):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        sources.append(random_band_limited(tg, d, 2.0**part.k_max, rng, fiber_p, decay=float(i % 3)))
    f_list = [dmap.to_x(s) for s in sources]
    rows = []
    for lam in lams:
        prob = problem.with_lambda(lam)
        lam_abs = abs(complex(lam))
        row = np.zeros(len(labels))
        for f_x in f_list:
            _, rep = degenerate_solve(prob, dmap, f_x)
            vals = [lam_abs ** (1 - sum(a) / order) * rep.norms[f"D{a}"] / rep.norms["f"] for a in alphas]
            vals.append(rep.norms["A"] / rep.norms["f"])
            row = np.maximum(row, vals)
        rows.append(row)
    return ResolventTable(tuple(complex(l) for l in lams), labels, np.array(rows))
