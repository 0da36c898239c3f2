"""Truncated infinite systems with diagonal principal operators.

A system of ``d`` channels carries positive diagonal entries ``d_m(x)``
and lower-order couplings ``C_b(x)`` (one ``d x d`` matrix or field per
multi-index ``b``).  Its natural fiber norm is

    ||u||_{l_p(Q)} = (sum_m |d_m(x) u_m(x)|^p)^(1/p).

For the solvers the diagonal is split at an anchor node ``x0`` as
``diag(d_m(x0)) + diag(d_m(x) - d_m(x0))``: the constant part becomes the
positive operator and the difference is an order-zero lower term.  The
comparability constants ``C1 <= d_m(x)/d_m(x0) <= C2`` are measured on the
grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic import EllipticProblem, EllipticSymbol, LowerTerm, ResolventTable, _mode_ladder, solve_full
from .errors import ComparabilityViolation, ValidationError
from .grid import Grid, GridFunction, fiber_norm, multi_indices, random_band_limited, spectral_derivative
from .littlewood_paley import BesovParams, Partition, besov_norm, build_partition
from .operators import certify_positive
from .parabolic import ParabolicProblem, solve_cauchy
from .weights import Weight, lq_norm_of

__all__ = [
    "TruncatedSystem",
    "lpq_fiber",
    "lpq_norm",
    "build_system_problem",
    "TruncationReport",
    "truncation_study",
    "system_resolvent_sweep",
    "system_parabolic",
    "DEFAULT_COMPARABILITY_LIMIT",
]

#: Largest accepted ``C2 / C1`` before a system is rejected.
DEFAULT_COMPARABILITY_LIMIT = 1e3


@dataclass(frozen=True, eq=False)
class TruncatedSystem:
    """Diagonal entries, couplings and fiber exponent of a ``d``-channel system.

    ``diagonal`` has shape ``(*sizes, d)`` and must be real and positive.
    ``couplings`` maps multi-indices to ``(d, d)`` constants or
    ``(*sizes, d, d)`` fields.  ``anchor`` is the grid index of ``x0``.
    """

    grid: Grid
    diagonal: np.ndarray = field(repr=False)
    couplings: dict = field(default_factory=dict, repr=False)
    p: float = 2.0
    anchor: tuple = None

    def __post_init__(self):
        g = self.grid
        dg = np.asarray(self.diagonal)
        if np.iscomplexobj(dg):
            if np.any(dg.imag != 0):
                raise ValidationError("diagonal entries d_m(x) must be real")
            dg = dg.real
        dg = np.array(dg, dtype=float)
        if dg.ndim == 1:
            dg = np.broadcast_to(dg, g.sizes + dg.shape).copy()
        if dg.shape[:-1] != g.sizes or dg.shape[-1] < 1:
            raise ValidationError(f"diagonal table shape {dg.shape} does not match grid {g.sizes}")
        if not np.all(np.isfinite(dg)):
            raise ValidationError("diagonal entries must be finite")
        if np.any(dg <= 0):
            bad = np.unravel_index(int(np.argmin(dg)), dg.shape)
            raise ValidationError(
                f"diagonal entries must be positive everywhere; d_{bad[-1] + 1} = {dg[bad]:.4g} at node {bad[:-1]}"
            )
        dg.setflags(write=False)
        object.__setattr__(self, "diagonal", dg)
        d = dg.shape[-1]
        coup = {}
        for a, c in dict(self.couplings).items():
            a = tuple(int(x) for x in np.atleast_1d(a))
            c = np.array(c, dtype=complex)
            if len(a) != g.n:
                raise ValidationError(f"coupling multi-index {a} has wrong length")
            if c.shape not in ((d, d), g.sizes + (d, d)):
                raise ValidationError(f"coupling {a} has shape {c.shape}, expected (d, d) or (*sizes, d, d)")
            c.setflags(write=False)
            coup[a] = c
        object.__setattr__(self, "couplings", coup)
        anchor = (0,) * g.n if self.anchor is None else tuple(int(i) for i in self.anchor)
        if len(anchor) != g.n or any(not 0 <= i < N for i, N in zip(anchor, g.sizes)):
            raise ValidationError(f"anchor index {anchor} outside the grid")
        object.__setattr__(self, "anchor", anchor)
        if not (self.p >= 1):
            raise ValidationError("fiber exponent p must be >= 1")

    @classmethod
    def pow2(cls, grid: Grid, d: int, sigma: float, modulation: Callable | None = None, couplings=None,
             p: float = 2.0) -> "TruncatedSystem":
        """``d_m(x) = 2^(sigma m) (1 + modulation(x))`` for ``m = 1 .. d``."""
        if d < 1:
            raise ValidationError("system size d must be >= 1")
        base = 2.0 ** (sigma * np.arange(1, d + 1))
        mod = np.ones(grid.sizes)
        if modulation is not None:
            mod = 1.0 + np.asarray(modulation(*np.moveaxis(grid.mesh(), -1, 0)), float)
        return cls(grid, mod[..., None] * base, couplings or {}, p)

    @property
    def d(self) -> int:
        return self.diagonal.shape[-1]

    @property
    def anchor_values(self) -> np.ndarray:
        return self.diagonal[self.anchor]

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.diagonal == self.anchor_values))

    def comparability(self) -> tuple:
        """``(C1, C2)``: extreme values of ``d_m(x) / d_m(x0)``."""
        r = self.diagonal / self.anchor_values
        return float(r.min()), float(r.max())

    def coupling_bound(self, order: int, mu: float = 0.0) -> float:
        """``sup_x max_b max_m sum_k |C_b[m, k](x)| d_k(x0)^-(1 - |b|/order - mu)``."""
        best = 0.0
        dk = self.anchor_values
        for a, c in self.couplings.items():
            expo = 1.0 - sum(a) / order - mu
            s = np.sum(np.abs(c) * dk ** (-expo), axis=-1)
            best = max(best, float(np.max(s)))
        return best

    def truncated(self, d: int) -> "TruncatedSystem":
        """Leading ``d`` channels of the system."""
        if not 1 <= d <= self.d:
            raise ValidationError(f"cannot truncate {self.d} channels to {d}")
        return TruncatedSystem(
            self.grid, self.diagonal[..., :d], {a: c[..., :d, :d] for a, c in self.couplings.items()},
            self.p, self.anchor,
        )


def lpq_fiber(system: TruncatedSystem) -> Callable:
    """Pointwise ``(sum_m |d_m(x) v_m|^p)^(1/p)`` for arrays shaped like the grid fiber."""
    dg = system.diagonal
    return lambda v: fiber_norm(dg * v, system.p)  # noqa: E731


def lpq_norm(u: GridFunction, system: TruncatedSystem, params: BesovParams | None = None,
             partition: Partition | None = None, q: float | None = None, weight: Weight | None = None,
             strict: bool = True) -> float:
    """Outer norm of the pointwise ``l_p(Q)`` fiber norm.

    With ``params`` the outer norm is the Besov norm; otherwise the
    (weighted) ``L_q`` norm with ``q`` defaulting to ``system.p``.
    """
    if u.grid != system.grid:
        raise ValidationError("function and system live on different grids")
    if u.fiber_dim != system.d:
        raise ValidationError(f"function has {u.fiber_dim} channels, system has {system.d}")
    fib = lpq_fiber(system)
    if params is not None:
        return besov_norm(u, params, partition, fiber=fib, strict=strict)
    return lq_norm_of(fib(u.values), u.grid, system.p if q is None else q, weight)


def build_system_problem(system: TruncatedSystem, symbol: EllipticSymbol, lam=1.0,
                         params: BesovParams | None = None,
                         comparability_limit: float = DEFAULT_COMPARABILITY_LIMIT,
                         phi: float = 0.5 * math.pi) -> EllipticProblem:
    """Elliptic problem for the system with the diagonal anchored at ``x0``.

    Raises :class:`ComparabilityViolation` if ``C2 / C1`` exceeds
    ``comparability_limit``.
    """
    c1, c2 = system.comparability()
    if not c2 / c1 <= comparability_limit:
        raise ComparabilityViolation(
            f"diagonal comparability ratio C2/C1 = {c2 / c1:.4g} exceeds {comparability_limit:.4g} "
            f"(C1 = {c1:.4g}, C2 = {c2:.4g})"
        )
    A = certify_positive(np.diag(system.anchor_values), phi, p=system.p)
    lower = []
    if not system.is_constant:
        lower.append(LowerTerm((0,) * system.grid.n, system.diagonal - system.anchor_values, diagonal=True))
    for a, c in system.couplings.items():
        lower.append(LowerTerm(a, c))
    return EllipticProblem(system.grid, symbol, A, lam, tuple(lower), params or BesovParams(0.0))


def _pad(values: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(values.shape[:-1] + (d,), dtype=complex)
    out[..., : values.shape[-1]] = values
    return out


@dataclass(frozen=True)
class TruncationReport:
    dims: tuple
    distances: tuple
    ratios: tuple
    convergent: bool
    solutions: tuple = field(repr=False, default=())


def truncation_study(family: Callable[[int], TruncatedSystem], d0: int, symbol: EllipticSymbol,
                     forcing: GridFunction, lam=1.0, params: BesovParams | None = None, levels: int = 3,
                     min_ratio: float = 2.0) -> TruncationReport:
    """Solve at ``d = d0, 2 d0, 4 d0, ...`` and compare successive truncations.

    ``forcing`` carries the leading channels (at most ``d0``) and is padded
    with zeros.  Distances are Besov norms of ``u_{2d} - u_d`` with the
    ``l_p(Q)`` fiber of the larger system.  The study counts as convergent
    when every distance is negligible or each one shrinks by at least
    ``min_ratio``.
    """
    if forcing.fiber_dim > d0:
        raise ValidationError("forcing must be supported on the first d0 channels")
    params = params or BesovParams(0.0)
    dims = tuple(d0 * 2**i for i in range(levels))
    part = build_partition(forcing.grid, params.profile)
    sols, dists = [], []
    prev = None
    for d in dims:
        system = family(d)
        if system.d != d:
            raise ValidationError(f"family returned {system.d} channels for d = {d}")
        prob = build_system_problem(system, symbol, lam, params)
        f = GridFunction(forcing.grid, _pad(forcing.values, d), system.p)
        u, _ = solve_full(prob, f, partition=part, report=False)
        if prev is not None:
            diff = u.replace(u.values - _pad(prev.values, d))
            # differences can sit near roundoff, so the tail check would be noise
            dists.append(lpq_norm(diff, system, params, part, strict=False))
        sols.append(u)
        prev = u
    scale = max(lpq_norm(sols[-1], family(dims[-1]), params, part), 1e-300)
    ratios = tuple(a / b if b > 0 else math.inf for a, b in zip(dists[:-1], dists[1:]))
    negligible = all(x <= 1e-13 * scale for x in dists)
    convergent = negligible or all(r >= min_ratio for r in ratios)
    return TruncationReport(dims, tuple(dists), ratios, bool(convergent), tuple(sols))


def _probe_channels(d: int) -> list:
    return sorted({0, d // 2, d - 1})


def system_resolvent_sweep(system: TruncatedSystem, symbol: EllipticSymbol, lams, params: BesovParams | None = None,
                           probes: int = 4, seed: int = 0) -> ResolventTable:
    """Table of ``|lambda|^(1-|a|/(2l)) ||D^a u||_B / ||f||_B`` and ``||u||_{B(l_p(Q))} / ||f||_B``.

    ``u`` solves the system with spectral parameter ``lambda``.  Probes are
    single modes on a half-octave ladder in the first, middle and last
    channels, plus ``probes`` random band-limited right-hand sides.
    """
    params = params or BesovParams(0.0)
    g = system.grid
    d = system.d
    part = build_partition(g, params.profile)
    order = symbol.order
    alphas = multi_indices(g.n, order)
    labels = tuple(f"D{a}" for a in alphas) + ("Q",)
    sources = []
    for idx in _mode_ladder(g, part.k_max):
        for ch in _probe_channels(d):
            v = np.zeros(d)
            v[ch] = 1
            sources.append(GridFunction.mode(g, idx, v, system.p))
    for i in range(probes):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        sources.append(random_band_limited(g, d, 2.0**part.k_max, rng, system.p, decay=float(i % 3)))
    fnorms = [besov_norm(f, params, part) for f in sources]
    rows = []
    for lam in lams:
        prob = build_system_problem(system, symbol, lam, params)
        lam_abs = abs(complex(lam))
        row = np.zeros(len(labels))
        for f, fn in zip(sources, fnorms):
            u, _ = solve_full(prob, f, seed=seed, partition=part, report=False)
            vals = [lam_abs ** (1 - sum(a) / order) * besov_norm(spectral_derivative(u, a), params, part) / fn
                    for a in alphas]
            vals.append(lpq_norm(u, system, params, part) / fn)
            row = np.maximum(row, vals)
        rows.append(row)
    return ResolventTable(tuple(complex(l) for l in lams), labels, np.array(rows))


def system_parabolic(system: TruncatedSystem, symbol: EllipticSymbol, forcing, dt: float, steps: int,
                     params: BesovParams | None = None, sector_angle: float = 0.75 * math.pi):
    """Cauchy problem for a system with an x-independent diagonal.

    Couplings must be constant matrices.  Returns ``(u, ParabolicReport)``
    as :func:`~besovkit.parabolic.solve_cauchy`; the ``A`` entry of the
    report is the ``l_p(Q)`` term.
    """
    if not system.is_constant:
        raise ValidationError("parabolic systems need an x-independent diagonal")
    prob = build_system_problem(system, symbol, 0.0, params)
    pp = ParabolicProblem(prob, dt, steps, sector_angle)
    return solve_cauchy(pp, forcing, system.p)
