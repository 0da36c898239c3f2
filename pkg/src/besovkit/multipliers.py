"""Operator-valued Fourier multipliers on periodic grids.

A :class:`Symbol` tabulates ``m(xi)`` as a ``d_out x d_in`` matrix at every
grid frequency and, when built from a callable, can be re-sampled at
arbitrary frequencies (needed for derivatives and dilations).  The
multiplier ``T_m f = F^-1 m F f`` acts mode by mode.

Three sufficient-condition surrogates are provided:

* :func:`mikhlin_constant` -- ``max_{|a| <= l} sup_xi (1 + |xi|)^|a| ||D^a m(xi)||``;
* :func:`besov_functional` -- smallest Besov ``B^{n/p}_{p,1}`` norm of
  ``xi -> m(a xi)`` over a dilation grid, the symbol being viewed as a
  function on the torus formed by the frequency lattice;
* :func:`empirical_operator_norm` -- a lower bound from probe functions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HypothesisViolation, PartitionTooCoarse, ValidationError
from .grid import Grid, GridFunction, fiber_norm, multi_indices, random_band_limited
from .littlewood_paley import (
    PROFILES,
    BesovParams,
    Partition,
    besov_norm,
    build_partition,
)
from .operators import operator_norm
from .weights import Weight, lq_norm_of

__all__ = [
    "Symbol",
    "LqSpace",
    "MikhlinReport",
    "MultiplierReport",
    "random_mikhlin_symbol",
    "apply_multiplier",
    "mikhlin_constant",
    "mikhlin_sweep",
    "besov_functional",
    "localized_besov_functional",
    "empirical_operator_norm",
    "fourier_type_constant",
    "space_norm",
    "multiplier_report",
    "default_dilations",
]


def _as_matrix_valued(vals: np.ndarray, lead: tuple) -> np.ndarray:
    vals = np.asarray(vals, dtype=np.complex128)
    if vals.shape == lead:
        return vals[..., None, None]
    if vals.ndim != len(lead) + 2:
        raise ValidationError(f"symbol values must have shape {lead} or {lead} + (d_out, d_in)")
    return vals


@dataclass(frozen=True, eq=False)
class Symbol:
    """Tabulated multiplier symbol, shape ``(*sizes, d_out, d_in)``.

    ``fn`` maps an array of frequencies ``(..., n)`` to values ``(...)`` or
    ``(..., d_out, d_in)``.  ``derivatives`` optionally maps multi-indices
    to callables of the same form returning ``D^alpha m``.
    """

    grid: Grid
    table: np.ndarray
    fn: Callable | None = None
    derivatives: dict | None = None
    p_in: float = 2.0
    p_out: float = 2.0

    def __post_init__(self):
        t = _as_matrix_valued(self.table, self.grid.sizes)
        if not np.all(np.isfinite(t)):
            raise ValidationError("symbol table must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable, p_in: float = 2.0, p_out: float | None = None,
                      derivatives: dict | None = None) -> "Symbol":
        xi = grid.frequency_mesh()
        return cls(grid, fn(xi), fn, derivatives, p_in, p_in if p_out is None else p_out)

    @property
    def d_out(self) -> int:
        return self.table.shape[-2]

    @property
    def d_in(self) -> int:
        return self.table.shape[-1]

    def sample(self, xi: np.ndarray) -> np.ndarray:
        if self.fn is None:
            raise ValidationError("symbol has no callable; cannot resample")
        xi = np.asarray(xi, dtype=float)
        return _as_matrix_valued(self.fn(xi), xi.shape[:-1])

    def on_grid(self, grid: Grid) -> "Symbol":
        if self.fn is None:
            raise ValidationError("symbol has no callable; cannot move to another grid")
        return Symbol.from_callable(grid, self.fn, self.p_in, self.p_out, self.derivatives)

    def dilated(self, a: float) -> "Symbol":
        fn = self.fn
        if fn is None:
            raise ValidationError("symbol has no callable; cannot dilate")
        return Symbol.from_callable(self.grid, lambda xi: fn(a * xi), self.p_in, self.p_out)

    def times_scalar(self, table: np.ndarray, fn: Callable | None = None) -> "Symbol":
        """Pointwise product with a scalar symbol."""
        new_fn = None
        if self.fn is not None and fn is not None:
            base = self.fn
            new_fn = lambda xi: _as_matrix_valued(base(xi), xi.shape[:-1]) * np.asarray(fn(xi))[..., None, None]  # noqa: E731
        return Symbol(self.grid, self.table * table[..., None, None], new_fn, None, self.p_in, self.p_out)

    def compose(self, other: "Symbol") -> "Symbol":
        """Symbol of ``T_self o T_other``."""
        if other.grid != self.grid:
            raise ValidationError("symbols live on different grids")
        fn = None
        if self.fn is not None and other.fn is not None:
            a, b = self.fn, other.fn
            fn = lambda xi: _as_matrix_valued(a(xi), xi.shape[:-1]) @ _as_matrix_valued(b(xi), xi.shape[:-1])  # noqa: E731
        return Symbol(self.grid, self.table @ other.table, fn, None, other.p_in, self.p_out)


def apply_multiplier(m: Symbol, f: GridFunction) -> GridFunction:
    """``F^-1 (m F f)``; the result carries the symbol's output fiber exponent."""
    if f.grid != m.grid:
        raise ValidationError("symbol and function live on different grids")
    if f.fiber_dim != m.d_in:
        raise ValidationError(f"symbol expects fiber dimension {m.d_in}, got {f.fiber_dim}")
    axes = tuple(range(f.grid.n))
    coef = np.fft.fftn(f.values, axes=axes)
    out = np.einsum("...ij,...j->...i", m.table, coef)
    return GridFunction(f.grid, np.fft.ifftn(out, axes=axes), m.p_out)


# -- Mikhlin constant --------------------------------------------------------


@dataclass(frozen=True)
class MikhlinReport:
    value: float
    per_order: tuple
    method: str
    argmax: tuple


def _fd_weights(order: int) -> list:
    """Central stencil ``(offset, weight)`` for the ``order``-th derivative."""
    return [((order / 2.0 - j), (-1) ** j * math.comb(order, j)) for j in range(order + 1)]


def _fd_derivative(m: Symbol, xi: np.ndarray, alpha: tuple) -> np.ndarray:
    total = sum(alpha)
    scale = 1.0 + np.sqrt(np.sum(xi**2, axis=-1))
    step = (np.finfo(float).eps ** (1.0 / (total + 2))) * scale
    out = 0.0
    stencils = [_fd_weights(a) for a in alpha]
    for combo in np.ndindex(*[len(s) for s in stencils]):
        shift = np.zeros_like(xi)
        w = 1.0
        for k, idx in enumerate(combo):
            off, wk = stencils[k][idx]
            shift[..., k] = off
            w *= wk
        out = out + w * m.sample(xi + shift * step[..., None])
    return out / (step**total)[..., None, None]


def _grid_fd_derivative(m: Symbol, alpha: tuple) -> tuple:
    """Finite differences of the table along the frequency lattice.

    Returns values and a mask of points whose stencil does not wrap.
    """
    g = m.grid
    vals = m.table
    mask = np.ones(g.sizes, dtype=bool)
    for k, a in enumerate(alpha):
        h = g.frequency_spacing[k]
        N = g.sizes[k]
        j = np.fft.fftfreq(N, 1.0 / N)
        shape = [1] * g.n
        shape[k] = -1
        for _ in range(a):
            vals = (np.roll(vals, -1, axis=k) - np.roll(vals, 1, axis=k)) / (2 * h)
        reach = a
        ok = (j - reach >= -N // 2) & (j + reach <= N // 2 - 1)
        mask &= ok.reshape(shape)
    return vals, mask


def mikhlin_constant(m: Symbol, l: int, method: str | None = None) -> MikhlinReport:
    """``max_{|alpha| <= l} sup_xi (1 + |xi|)^|alpha| ||D^alpha m(xi)||``.

    ``method`` is ``"analytic"`` (requires ``m.derivatives``), ``"callable"``
    (central differences of ``m.fn`` with steps well below the lattice
    spacing) or ``"grid"`` (central differences on the lattice).  The
    default picks the first available in that order.
    """
    g = m.grid
    if l < 0:
        raise ValidationError("order l must be >= 0")
    alphas = multi_indices(g.n, l)
    if method is None:
        if m.derivatives and all(a in m.derivatives for a in alphas if sum(a) > 0):
            method = "analytic"
        elif m.fn is not None:
            method = "callable"
        else:
            method = "grid"
    xi = g.frequency_mesh()
    rad = np.sqrt(np.sum(xi**2, axis=-1))
    best, arg = -1.0, None
    per_order = {}
    for alpha in alphas:
        order = sum(alpha)
        mask = None
        if order == 0:
            vals = m.table
        elif method == "analytic":
            vals = _as_matrix_valued(m.derivatives[alpha](xi), g.sizes)
        elif method == "callable":
            vals = _fd_derivative(m, xi, alpha)
        elif method == "grid":
            vals, mask = _grid_fd_derivative(m, alpha)
        else:
            raise ValidationError(f"unknown derivative method {method!r}")
        weighted = (1 + rad) ** order * operator_norm(vals, m.p_in, m.p_out)
        if mask is not None:
            weighted = np.where(mask, weighted, 0.0)
        i = np.unravel_index(int(np.argmax(weighted)), g.sizes)
        v = float(weighted[i])
        per_order[order] = max(per_order.get(order, 0.0), v)
        if v > best:
            best, arg = v, tuple(float(x) for x in xi[i])
    return MikhlinReport(best, tuple(sorted(per_order.items())), method, arg)


@dataclass(frozen=True)
class MikhlinSweep:
    values: tuple
    compliant: bool


def mikhlin_sweep(fn: Callable, grids, l: int, growth_limit: float = 1.25, **kw) -> MikhlinSweep:
    """Mikhlin constants on a sequence of refined grids.

    A symbol is flagged non-compliant when the constant still grows by
    more than ``growth_limit`` between the last two grids.
    """
    vals = tuple(mikhlin_constant(Symbol.from_callable(g, fn, **kw), l).value for g in grids)
    compliant = len(vals) < 2 or vals[-1] <= growth_limit * vals[-2]
    return MikhlinSweep(vals, compliant)


# -- Besov functional of a symbol ---------------------------------------------


def default_dilations() -> tuple:
    return tuple(2.0**j for j in range(-4, 5))


def symbol_torus(grid: Grid) -> Grid:
    """Torus carried by the frequency lattice of ``grid``.

    Node ``j`` sits at ``j * dxi``; nodes past the midpoint stand for
    negative frequencies, matching FFT order.
    """
    return Grid(grid.sizes, tuple(N * h for N, h in zip(grid.sizes, grid.frequency_spacing)))


@dataclass(frozen=True)
class BesovFunctional:
    value: float
    dilation: float
    per_dilation: tuple = field(default=())


def _matrix_fiber(d_out, d_in, p_in, p_out):
    def fiber(v):
        return operator_norm(v.reshape(v.shape[:-1] + (d_out, d_in)), p_in, p_out)

    return fiber


def besov_functional(
    m: Symbol,
    p: float = 2.0,
    weight: Weight | None = None,
    dilations=None,
    localize: int | None = None,
    profile: str = "cos2",
) -> BesovFunctional:
    """``min_a ||xi -> m(a xi)||_{B^{n/p}_{p,1,gamma}}`` over sampled dilations.

    The symbol (optionally multiplied by the dyadic piece ``phi_k`` when
    ``localize = k``) is evaluated on the lattice torus of the grid, its
    matrix entries forming the fiber with the operator norm as pointwise
    norm.  The top Besov block absorbs the tail beyond the resolved band.
    Dilations whose localized support reaches the lattice boundary or
    covers fewer than four lattice cells in diameter are skipped.
    """
    if not 1 <= p <= 2:
        raise HypothesisViolation(f"Fourier type exponent must lie in [1, 2], got {p}")
    if m.fn is None:
        raise ValidationError("Besov functional needs a callable symbol")
    dilations = default_dilations() if dilations is None else tuple(dilations)
    g = m.grid
    torus = symbol_torus(g)
    part = build_partition(torus, profile)
    params = BesovParams(g.n / p, p, 1.0, weight, profile)
    xi = g.frequency_mesh()
    rad = np.sqrt(np.sum(xi**2, axis=-1))
    edge = min(N * h / 2 for N, h in zip(g.sizes, g.frequency_spacing)) - max(g.frequency_spacing)
    fiber = _matrix_fiber(m.d_out, m.d_in, m.p_in, m.p_out)
    psi = PROFILES[profile]
    results = []
    for a in dilations:
        vals = m.sample(a * xi)
        if localize is not None:
            k = int(localize)
            outer = 2.0 ** (k + 1) / a
            if outer >= edge or outer < 4 * max(g.frequency_spacing):
                continue
            loc = psi(a * rad * 2.0**-k) - (psi(a * rad * 2.0 ** (1 - k)) if k > 0 else 0.0)
            vals = vals * loc[..., None, None]
        if not np.all(np.isfinite(vals)):
            continue
        F = GridFunction(torus, vals.reshape(g.sizes + (-1,)), 2.0)
        results.append((float(a), besov_norm(F, params, part, fiber=fiber, strict=False)))
    if not results:
        raise ValidationError("no sampled dilation keeps the symbol inside the representable band")
    a_best, v_best = min(results, key=lambda t: t[1])
    return BesovFunctional(v_best, a_best, tuple(results))


def localized_besov_functional(m: Symbol, p: float = 2.0, weight: Weight | None = None, dilations=None,
                               partition: Partition | None = None) -> BesovFunctional:
    """``sup_k`` of :func:`besov_functional` applied to ``phi_k m``."""
    partition = partition or build_partition(m.grid)
    best = None
    for k in range(partition.k_max + 1):
        try:
            r = besov_functional(m, p, weight, dilations, localize=k, profile=partition.profile)
        except ValidationError:
            continue
        if best is None or r.value > best.value:
            best = r
    if best is None:
        raise ValidationError("no dyadic piece admits a representable dilation")
    return best


# -- empirical norms ---------------------------------------------------------


@dataclass(frozen=True)
class LqSpace:
    """Weighted ``L_q`` space used as a probe target."""

    q: float = 2.0
    weight: Weight | None = None


def space_norm(f: GridFunction, space, partition: Partition | None = None) -> float:
    if isinstance(space, LqSpace):
        return lq_norm_of(f.pointwise_norm(), f.grid, space.q, space.weight)
    if isinstance(space, BesovParams):
        return besov_norm(f, space, partition)
    raise ValidationError(f"unsupported space {space!r}")


@dataclass(frozen=True)
class EmpiricalNorm:
    value: float
    probe_count: int
    argmax: str


def _probe_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _single_mode_ratios(m: Symbol, mask: np.ndarray | None) -> tuple:
    """Exact ratios ``||m(xi) v|| / ||v||`` for channel and top-singular probes."""
    T = m.table
    d_in = m.d_in
    col_norms = np.stack([fiber_norm(T[..., :, i], m.p_out) for i in range(d_in)], axis=-1)
    best = col_norms.max(axis=-1)
    if d_in > 1 and m.p_in == 2 and m.p_out == 2:
        best = np.maximum(best, np.linalg.norm(T, ord=2, axis=(-2, -1)))
    if mask is not None:
        best = np.where(mask, best, 0.0)
    i = np.unravel_index(int(np.argmax(best)), best.shape)
    return float(best[i]), i, int(np.count_nonzero(mask) if mask is not None else best.size) * (d_in + (d_in > 1))


def empirical_operator_norm(
    m: Symbol,
    space,
    probes: int = 32,
    seed: int = 0,
    threads: int = 1,
    partition: Partition | None = None,
) -> EmpiricalNorm:
    """Largest ``||T_m f|| / ||f||`` over a deterministic probe family.

    The family consists of every single-mode probe ``exp(i xi x) v`` with
    ``v`` a coordinate vector (and, for Hilbert fibers, the top right
    singular vector of ``m(xi)``), whose ratio is ``||m(xi) v|| / ||v||``,
    followed by ``probes`` random band-limited functions drawn from
    ``SeedSequence(seed, spawn_key=(i,))``.  Enlarging ``probes`` never
    lowers the result.
    """
    g = m.grid
    if isinstance(space, BesovParams):
        partition = partition or build_partition(g, space.profile)
        mask = partition.band_mask()
        cutoff = 2.0**partition.k_max
    else:
        mask = None
        cutoff = g.nyquist_radius * (1 - 1e-9)
    best, idx, nmode = _single_mode_ratios(m, mask)
    arg = f"mode{tuple(int(j) for j in idx)}"

    def ratio(i):
        rng = _probe_rng(seed, i)
        f = random_band_limited(g, m.d_in, cutoff, rng, m.p_in, decay=float(i % 3))
        den = space_norm(f, space, partition)
        return space_norm(apply_multiplier(m, f), space, partition) / den if den > 0 else 0.0

    for i, r in enumerate(_map(ratio, range(probes), threads)):
        if r > best:
            best, arg = r, f"random{i}"
    return EmpiricalNorm(float(best), nmode + probes, arg)


def fourier_type_constant(grid: Grid, p: float, d: int = 1, weight: Weight | None = None,
                          probes: int = 32, seed: int = 0, fiber_p: float = 2.0) -> EmpiricalNorm:
    """Sampled ``sup ||F f||_{l_p'} / ||f||_{L_p,gamma}`` (unit mass per mode).

    Probes are single modes, point masses at every node and random
    band-limited functions.
    """
    p = float(p)
    if not 1 <= p <= 2:
        raise HypothesisViolation(f"Fourier type exponent must lie in [1, 2], got {p}")
    pd = math.inf if p == 1 else p / (p - 1)
    cells = (weight or Weight.unit()).cell_values(grid)
    axes = tuple(range(grid.n))

    def coef_norm(vals):
        c = fiber_norm(np.fft.fftn(vals, axes=axes) / grid.npoints, fiber_p)
        return float(c.max()) if math.isinf(pd) else float(np.sum(c**pd) ** (1 / pd))

    v = np.zeros(d)
    v[0] = 1.0
    # single mode: coefficient norm 1, physical norm ||1||_{L_p,gamma}
    best = 1.0 / lq_norm_of(np.ones(grid.sizes), grid, p, cells=cells)
    arg = "mode"
    # point mass at node x: coefficients all 1/N, norm N^(1/p' - 1)
    Np = grid.npoints
    mass = (Np ** (1 / pd) if not math.isinf(pd) else 1.0) / Np
    live = cells > 0
    pm = mass / (cells[live] * grid.cell_volume) ** (1 / p)
    if pm.max() > best:
        best, arg = float(pm.max()), "point"
    for i in range(probes):
        f = random_band_limited(grid, d, grid.nyquist_radius * (1 - 1e-9), _probe_rng(seed, i), fiber_p,
                                decay=float(i % 3))
        r = coef_norm(f.values) / lq_norm_of(fiber_norm(f.values, fiber_p), grid, p, cells=cells)
        if r > best:
            best, arg = r, f"random{i}"
    return EmpiricalNorm(float(best), 1 + int(live.sum()) + probes, arg)


def random_mikhlin_symbol(n: int, d: int, rng: np.random.Generator, scale: float = 1.0) -> Callable:
    """Random ``d x d`` symbol built from smooth zero-order profiles.

    ``m(xi) = B0 + B1 xi_1 / <xi> + B2 / <xi>^2 + B3 cos(log <xi>^2)``
    with ``<xi> = (1 + |xi|^2)^(1/2)`` and Gaussian matrices ``B_j``; every
    term satisfies the Mikhlin condition at every order.
    """
    B = rng.standard_normal((4, d, d)) + 1j * rng.standard_normal((4, d, d))
    B *= scale / np.sqrt(2 * d)

    def fn(xi):
        xi = np.asarray(xi, dtype=float)
        r2 = 1.0 + np.sum(xi**2, axis=-1)
        prof = np.stack([np.ones_like(r2), xi[..., 0] / np.sqrt(r2), 1 / r2, np.cos(np.log(r2))], axis=-1)
        return np.einsum("...j,jab->...ab", prof, B)

    fn.__name__ = f"random_mikhlin_{n}d_{d}"
    return fn


@dataclass(frozen=True)
class MultiplierReport:
    mikhlin: float
    besov: float
    empirical: float
    derivative_method: str
    flags: tuple = ()

    @property
    def surrogate(self) -> float:
        return min(self.mikhlin, self.besov)

    @property
    def ratio(self) -> float:
        return self.empirical / self.surrogate


def multiplier_report(m: Symbol, space, l: int | None = None, p: float = 2.0, probes: int = 32,
                      seed: int = 0, threads: int = 1, dilations=None) -> MultiplierReport:
    """Empirical norm together with the Mikhlin and localized Besov surrogates."""
    l = m.grid.n + 1 if l is None else l
    mk = mikhlin_constant(m, l)
    flags = []
    try:
        bf = localized_besov_functional(m, p, None, dilations).value
    except (ValidationError, PartitionTooCoarse):
        bf = math.inf
        flags.append("besov-unrepresentable")
    emp = empirical_operator_norm(m, space, probes, seed, threads).value
    return MultiplierReport(mk.value, bf, emp, mk.method, tuple(flags))
