"""Operator-coefficient elliptic problems on periodic grids.

The equation is

    sum_{|a| = 2l} a_a D^a u + A u + lambda u + sum_{|b| < 2l} A_b(x) D^b u = f

with ``D^a`` the spectral derivative (symbol ``(i xi)^a``), so the
principal part has the scalar symbol ``K(xi) = sum a_a (i xi)^a`` and the
constant-coefficient part is inverted mode by mode:

    uhat(xi) = (A + omega(xi))^-1 fhat(xi),   omega = lambda + K(xi).

Lower-order terms are handled by the Neumann iteration
``u <- R (f - L1 u)`` with ``R`` the principal resolvent.  Products with
``x``-dependent coefficients are projected back onto the resolved band
``|xi| <= 2^k_max`` so that every iterate stays band-limited; the equation
is therefore solved in that finite-dimensional subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EllipticityViolation,
    NonContractiveError,
    SingularModeError,
    ValidationError,
)
from .grid import Grid, GridFunction, derivative_symbol, multi_indices, random_band_limited
from .littlewood_paley import BesovParams, Partition, besov_norm, build_partition
from .operators import PositiveOperator, fractional_power, operator_norm

__all__ = [
    "EllipticSymbol",
    "LowerTerm",
    "EllipticProblem",
    "EllipticityReport",
    "SolveReport",
    "ResolventTable",
    "check_ellipticity",
    "solve_principal",
    "solve_full",
    "resolvent_sweep",
    "contraction_estimate",
    "SINGULAR_COND_LIMIT",
]

#: Per-mode condition number above which a solve is refused.
SINGULAR_COND_LIMIT = 1e12


@dataclass(frozen=True)
class EllipticSymbol:
    """Principal part ``sum_{|a| = 2l} a_a D^a`` with scalar coefficients."""

    half_order: int
    coefficients: dict

    def __post_init__(self):
        if self.half_order < 1:
            raise ValidationError("half order l must be >= 1")
        coeffs = {tuple(int(x) for x in a): complex(c) for a, c in dict(self.coefficients).items()}
        if not coeffs:
            raise ValidationError("principal symbol has no coefficients")
        dims = {len(a) for a in coeffs}
        if len(dims) != 1:
            raise ValidationError("multi-indices of the principal symbol differ in length")
        for a in coeffs:
            if sum(a) != 2 * self.half_order or min(a) < 0:
                raise ValidationError(f"multi-index {a} is not of order {2 * self.half_order}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n(self) -> int:
        return len(next(iter(self.coefficients)))

    @property
    def order(self) -> int:
        return 2 * self.half_order

    @classmethod
    def polyharmonic(cls, n: int, l: int, sign: float = 1.0) -> "EllipticSymbol":
        """``sign * sum_k D_k^(2l)``, symbol ``sign (-1)^l sum_k xi_k^(2l)``."""
        return cls(l, {tuple(2 * l if j == k else 0 for j in range(n)): sign for k in range(n)})

    @classmethod
    def positive_laplacian_power(cls, n: int, l: int) -> "EllipticSymbol":
        """``(-1)^l sum_k D_k^(2l)`` whose symbol ``sum_k xi_k^(2l)`` is nonnegative."""
        return cls.polyharmonic(n, l, (-1.0) ** l)

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """``K(xi)`` for frequencies ``xi`` of shape ``(..., n)``."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for a, c in self.coefficients.items():
            term = np.full(xi.shape[:-1], c, dtype=complex)
            for k, ak in enumerate(a):
                if ak:
                    term = term * (1j * xi[..., k]) ** ak
            out += term
        return out

    def on_grid(self, grid: Grid) -> np.ndarray:
        if grid.n != self.n:
            raise ValidationError(f"symbol dimension {self.n} does not match grid dimension {grid.n}")
        return self.evaluate(grid.frequency_mesh())


@dataclass(frozen=True)
class EllipticityReport:
    m0: float
    sector_angle: float
    argmin: tuple


def check_ellipticity(symbol: EllipticSymbol, grid: Grid, tol: float = 1e-10) -> EllipticityReport:
    """``M0 = min |K(xi)| / sum_k xi_k^(2l)`` over nonzero grid frequencies.

    Also reports the half-angle of the smallest sector about the positive
    axis containing every sampled ``K(xi)``.  Raises
    :class:`EllipticityViolation` when ``M0 <= tol``.
    """
    xi = grid.frequency_mesh().reshape(-1, grid.n)
    xi = xi[np.any(xi != 0, axis=1)]
    K = symbol.evaluate(xi)
    den = np.sum(xi ** (2 * symbol.half_order), axis=1)
    ratio = np.abs(K) / den
    i = int(np.argmin(ratio))
    m0 = float(ratio[i])
    if not m0 > tol:
        raise EllipticityViolation(
            f"principal symbol degenerates at xi = {tuple(xi[i])} (ratio {m0:.3g})", tuple(xi[i])
        )
    angle = float(np.max(np.abs(np.angle(K))))
    return EllipticityReport(m0, angle, tuple(float(x) for x in xi[i]))


@dataclass(frozen=True, eq=False)
class LowerTerm:
    """Lower-order coefficient ``A_b(x)`` acting on ``D^b u``.

    ``matrix`` is either a ``d x d`` constant or a field of shape
    ``(*sizes, d, d)``.  With ``diagonal=True`` only the diagonal is stored,
    as ``(d,)`` or ``(*sizes, d)``.  ``mu`` is the regularity exponent used
    when the relative bound ``sup_x ||A_b(x) A^-(1 - |b|/(2l) - mu)||`` is
    recorded.
    """

    alpha: tuple
    matrix: np.ndarray
    mu: float = 0.0
    diagonal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        m = np.array(self.matrix, dtype=complex)
        if self.diagonal:
            if m.ndim < 1:
                raise ValidationError("diagonal lower-order coefficient needs a trailing channel axis")
        elif m.ndim < 2 or m.shape[-1] != m.shape[-2]:
            raise ValidationError("lower-order coefficient must be square in its last two axes")
        if not np.all(np.isfinite(m)):
            raise ValidationError("lower-order coefficient must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def is_constant(self) -> bool:
        return self.matrix.ndim == (1 if self.diagonal else 2)

    @property
    def dim(self) -> int:
        return self.matrix.shape[-1]

    @property
    def field_shape(self) -> tuple:
        return self.matrix.shape[:-1] if self.diagonal else self.matrix.shape[:-2]

    def dense(self) -> np.ndarray:
        """Full matrix (or matrix field) form of the coefficient."""
        if not self.diagonal:
            return self.matrix
        return self.matrix[..., :, None] * np.eye(self.dim)

    def act(self, values: np.ndarray) -> np.ndarray:
        """Apply the coefficient to the trailing fiber axis of ``values``."""
        if self.diagonal:
            return values * self.matrix
        if self.is_constant:
            return values @ self.matrix.T
        return np.einsum("...ij,...j->...i", self.matrix, values)


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    grid: Grid
    symbol: EllipticSymbol
    operator: PositiveOperator
    lam: complex = 1.0
    lower: tuple = ()
    params: BesovParams = field(default_factory=lambda: BesovParams(0.0))

    def __post_init__(self):
        g, d = self.grid, self.operator.dim
        if self.symbol.n != g.n:
            raise ValidationError("symbol dimension does not match the grid")
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "lower", tuple(self.lower))
        for term in self.lower:
            if len(term.alpha) != g.n:
                raise ValidationError(f"lower-order multi-index {term.alpha} has wrong length")
            if sum(term.alpha) >= self.symbol.order:
                raise ValidationError(f"lower-order multi-index {term.alpha} is not of lower order")
            if term.dim != d:
                raise ValidationError("lower-order coefficient size differs from the operator")
            if not term.is_constant and term.field_shape != g.sizes:
                raise ValidationError("lower-order coefficient field does not match the grid")

    def with_lambda(self, lam) -> "EllipticProblem":
        return replace(self, lam=complex(lam))

    def with_lower(self, lower) -> "EllipticProblem":
        return replace(self, lower=tuple(lower))

    @property
    def has_variable_coefficients(self) -> bool:
        return any(not t.is_constant for t in self.lower)

    def relative_bounds(self) -> tuple:
        """``sup_x ||A_b(x) A^-(1 - |b|/(2l) - mu_b)||`` for each lower term."""
        out = []
        for t in self.lower:
            theta = 1.0 - sum(t.alpha) / self.symbol.order - t.mu
            P = fractional_power(self.operator, -min(max(theta, -1.0), 1.0))
            if t.diagonal and self.operator.is_diagonal:
                out.append(float(np.max(np.abs(t.matrix * np.diag(P)))))
            else:
                out.append(float(np.max(operator_norm(t.dense() @ P, self.operator.fiber_p))))
        return tuple(out)


# -- per-mode machinery --------------------------------------------------------


class _Context:
    """Cached tables for repeated solves of one problem."""

    def __init__(self, problem: EllipticProblem, partition: Partition | None = None):
        self.problem = problem
        g = problem.grid
        self.grid = g
        self.axes = tuple(range(g.n))
        self.partition = partition or build_partition(g, problem.params.profile)
        self.band = self.partition.band_mask()
        A = problem.operator
        omega = problem.lam + problem.symbol.on_grid(g)
        den = A.eigenvalues[None, :] + omega.reshape(-1, 1)
        den = den.reshape(g.sizes + (A.dim,))
        mag = np.abs(den)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = A.eigvec_cond * mag.max(axis=-1) / mag.min(axis=-1)
        worst = np.unravel_index(int(np.argmax(np.where(np.isfinite(cond), cond, np.inf))), g.sizes)
        if not cond[worst] <= SINGULAR_COND_LIMIT:
            xi = tuple(float(f[j]) for f, j in zip(g.frequencies(), worst))
            raise SingularModeError(
                f"A + omega is singular at xi = {xi} (condition {cond[worst]:.3g})", xi, float(cond[worst])
            )
        self.inv_den = 1.0 / den
        self.V = A.eigenvectors
        self.Vi = A.eigenvectors_inv
        self.diagonal = A.is_diagonal
        self.symbols = {}

    def dsym(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if alpha not in self.symbols:
            self.symbols[alpha] = derivative_symbol(self.grid, alpha)
        return self.symbols[alpha]

    def fft(self, vals):
        return np.fft.fftn(vals, axes=self.axes)

    def ifft(self, coef):
        return np.fft.ifftn(coef, axes=self.axes)

    def resolve_coef(self, coef: np.ndarray) -> np.ndarray:
        """Apply ``(A + omega)^-1`` to FFT coefficients."""
        if self.diagonal:
            return coef * self.inv_den
        c = coef @ self.Vi.T
        return (c * self.inv_den) @ self.V.T

    def lower_coef(self, coef: np.ndarray) -> np.ndarray:
        """FFT coefficients of the band-projected lower-order part."""
        out = np.zeros_like(coef)
        phys = None
        for t in self.problem.lower:
            dc = coef * self.dsym(t.alpha)[..., None]
            if t.is_constant:
                out += t.act(dc)
            else:
                prod = t.act(self.ifft(dc))
                phys = prod if phys is None else phys + prod
        if phys is not None:
            out += self.fft(phys)
        return out * self.band[..., None]

    def besov(self, vals: np.ndarray, p: float) -> float:
        return besov_norm(GridFunction(self.grid, vals, p), self.problem.params, self.partition)


@dataclass(frozen=True)
class SolveReport:
    residual: float
    norms: dict
    coercive_ratio: float
    iterations: int = 0
    contraction: float = 0.0
    iterate_ratios: tuple = ()

    @property
    def convergence_rate(self) -> float:
        """Geometric mean of the last successive-distance ratios."""
        r = [x for x in self.iterate_ratios if x > 0]
        if not r:
            return 0.0
        tail = r[-min(5, len(r)):]
        return float(np.exp(np.mean(np.log(tail))))


def _apply_operator(problem: EllipticProblem, u: GridFunction, ctx: _Context) -> np.ndarray:
    """Left-hand side evaluated through spectral derivatives, band-projected."""
    coef = ctx.fft(u.values)
    acc = np.zeros_like(coef)
    for a, c in problem.symbol.coefficients.items():
        acc += c * coef * ctx.dsym(a)[..., None]
    acc += coef @ problem.operator.matrix.T + problem.lam * coef
    acc += ctx.lower_coef(coef)
    if problem.lower and problem.has_variable_coefficients:
        acc = acc * ctx.band[..., None]
    return ctx.ifft(acc)


def _report(problem: EllipticProblem, f: GridFunction, u: GridFunction, ctx: _Context, **extra) -> SolveReport:
    lhs = _apply_operator(problem, u, ctx)
    rf = f.values
    if problem.has_variable_coefficients:
        rf = ctx.ifft(ctx.fft(f.values) * ctx.band[..., None])
    fn = np.sqrt(np.sum(np.abs(f.values) ** 2))
    residual = float(np.sqrt(np.sum(np.abs(lhs - rf) ** 2)) / fn) if fn > 0 else 0.0
    p = f.fiber_norm_p
    coef = ctx.fft(u.values)
    norms = {}
    top = 0.0
    for a in multi_indices(problem.grid.n, problem.symbol.order, exact=True):
        v = ctx.besov(ctx.ifft(coef * ctx.dsym(a)[..., None]), p)
        norms[f"D{a}"] = v
        top += v
    norms["A"] = ctx.besov(problem.operator.apply(u.values), p)
    norms["u"] = ctx.besov(u.values, p)
    norms["f"] = ctx.besov(f.values, p)
    ratio = (top + norms["A"]) / norms["f"] if norms["f"] > 0 else 0.0
    return SolveReport(residual, norms, float(ratio), **extra)


def _check_rhs(problem: EllipticProblem, f: GridFunction):
    if f.grid != problem.grid:
        raise ValidationError("right-hand side lives on a different grid")
    if f.fiber_dim != problem.operator.dim:
        raise ValidationError(
            f"right-hand side has fiber dimension {f.fiber_dim}, operator acts on C^{problem.operator.dim}"
        )


def solve_principal(problem: EllipticProblem, f: GridFunction, partition: Partition | None = None,
                    report: bool = True):
    """Solve the constant-coefficient equation (lower-order terms ignored).

    Returns ``(u, SolveReport)``; with ``report=False`` the report is None.
    """
    _check_rhs(problem, f)
    bare = problem.with_lower(()) if problem.lower else problem
    ctx = _Context(bare, partition)
    u = f.replace(ctx.ifft(ctx.resolve_coef(ctx.fft(f.values))))
    return u, (_report(bare, f, u, ctx) if report else None)


def contraction_estimate(problem: EllipticProblem, iterations: int = 20, seed: int = 0,
                         ctx: _Context | None = None, p: float = 2.0) -> float:
    """Power-iteration estimate of the growth factor of ``L1 R`` in the Besov norm."""
    if not problem.lower:
        return 0.0
    ctx = ctx or _Context(problem)
    g = problem.grid
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x51,)))
    x = random_band_limited(g, problem.operator.dim, 2.0**ctx.partition.k_max, rng, p).values
    nx = ctx.besov(x, p)
    q = 0.0
    for _ in range(iterations):
        y = ctx.ifft(ctx.lower_coef(ctx.resolve_coef(ctx.fft(x))))
        ny = ctx.besov(y, p)
        q = ny / nx if nx > 0 else 0.0
        if ny == 0:
            break
        x, nx = y / ny, 1.0
    return float(q)


def solve_full(problem: EllipticProblem, f: GridFunction, tol: float = 1e-12, max_iter: int = 500,
               seed: int = 0, partition: Partition | None = None, report: bool = True):
    """Solve with lower-order terms by Neumann iteration.

    The contraction factor ``q`` of ``L1 (G0 + lambda)^-1`` is measured
    first (20 power iterations); ``q >= 1`` raises
    :class:`NonContractiveError`.  Iteration stops when the Besov distance
    between successive iterates falls below ``tol`` times the iterate norm.
    """
    _check_rhs(problem, f)
    if not problem.lower:
        return solve_principal(problem, f, partition, report)
    ctx = _Context(problem, partition)
    p = f.fiber_norm_p
    q = contraction_estimate(problem, 20, seed, ctx, p)
    if not q < 1:
        raise NonContractiveError(f"lower-order part is not contractive (measured factor {q:.3g})", q)
    fc = ctx.fft(f.values)
    if problem.has_variable_coefficients:
        fc = fc * ctx.band[..., None]
    uc = ctx.resolve_coef(fc)
    dists = []
    it = 0
    for it in range(1, max_iter + 1):
        nc = ctx.resolve_coef(fc - ctx.lower_coef(uc))
        dist = ctx.besov(ctx.ifft(nc - uc), p)
        size = ctx.besov(ctx.ifft(nc), p)
        dists.append(dist)
        uc = nc
        if dist <= tol * max(size, 1e-300):
            break
    else:
        raise NonContractiveError(f"Neumann iteration did not converge in {max_iter} steps", q)
    ratios = tuple(b / a for a, b in zip(dists[:-1], dists[1:]) if a > 0)
    u = f.replace(ctx.ifft(uc))
    rep = _report(problem, f, u, ctx, iterations=it, contraction=q, iterate_ratios=ratios) if report else None
    return u, rep


# -- resolvent sweep ------------------------------------------------------------


@dataclass(frozen=True)
class ResolventTable:
    lams: tuple
    columns: tuple
    values: np.ndarray

    def column_variation(self) -> dict:
        """``max / min`` of each column over the sampled lambdas."""
        out = {}
        for j, c in enumerate(self.columns):
            col = self.values[:, j]
            out[c] = float(col.max() / col.min()) if col.min() > 0 else math.inf
        return out


def _column_labels(problem):
    al = multi_indices(problem.grid.n, problem.symbol.order)
    return al, tuple(f"D{a}" for a in al) + ("A",)


def _single_mode_table(problem: EllipticProblem, ctx: _Context) -> np.ndarray:
    """Exact per-column maxima over single-mode, single-channel probes.

    For a constant-coefficient problem the solution of ``exp(i xi x) v`` is
    ``exp(i xi x) R(xi) v`` and every Besov norm scales by the same
    amplitude factor, so ratios reduce to fiber norms of ``R(xi) v``.
    """
    A = problem.operator
    d = A.dim
    p = A.fiber_p
    lam = abs(problem.lam)
    order = problem.symbol.order
    alphas, _ = _column_labels(problem)
    band = ctx.band
    if ctx.diagonal:
        R = ctx.inv_den  # (*sizes, d): R(xi) e_i = e_i / den_i
        resp = np.abs(R)
        Aresp = np.abs(A.eigenvalues) * resp
    else:
        Rm = np.einsum("ij,...j,jk->...ik", ctx.V, ctx.inv_den, ctx.Vi)
        resp = np.stack([np.linalg.norm(Rm[..., :, i], ord=p, axis=-1) for i in range(d)], axis=-1)
        ARm = A.matrix @ Rm
        Aresp = np.stack([np.linalg.norm(ARm[..., :, i], ord=p, axis=-1) for i in range(d)], axis=-1)
    best = resp.max(axis=-1)
    bestA = Aresp.max(axis=-1)
    row = []
    for a in alphas:
        s = np.abs(ctx.dsym(a))
        row.append(float(np.max(np.where(band, s * best, 0.0))) * lam ** (1 - sum(a) / order))
    row.append(float(np.max(np.where(band, bestA, 0.0))))
    return np.array(row)


def resolvent_sweep(problem: EllipticProblem, lams, probes: int = 8, seed: int = 0,
                    partition: Partition | None = None, fiber_p: float = 2.0) -> ResolventTable:
    """Table of ``|lambda|^(1-|a|/(2l)) ||D^a (G + lambda)^-1||`` and ``||A (G + lambda)^-1||``.

    Each entry is the largest ratio ``||D^a u||_B / ||f||_B`` over the probe
    family: all single-mode, single-channel probes in the resolved band
    (evaluated in closed form when the problem has constant coefficients)
    plus ``probes`` random band-limited right-hand sides run through
    :func:`solve_full`.
    """
    g = problem.grid
    alphas, labels = _column_labels(problem)
    rows = []
    for lam in lams:
        prob = problem.with_lambda(lam)
        ctx = _Context(prob, partition)
        partition = ctx.partition
        order = prob.symbol.order
        lamabs = abs(complex(lam))
        if prob.lower:
            row = np.zeros(len(labels))
            for idx in _mode_ladder(g, partition.k_max):
                for ch in range(prob.operator.dim):
                    v = np.zeros(prob.operator.dim)
                    v[ch] = 1
                    f = GridFunction.mode(g, idx, v, fiber_p)
                    row = np.maximum(row, _probe_row(prob, f, alphas, lamabs, order, ctx, seed))
        else:
            row = _single_mode_table(prob, ctx)
        for i in range(probes):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            f = random_band_limited(g, prob.operator.dim, 2.0**partition.k_max, rng, fiber_p, decay=float(i % 3))
            row = np.maximum(row, _probe_row(prob, f, alphas, lamabs, order, ctx, seed))
        rows.append(row)
    return ResolventTable(tuple(complex(l) for l in lams), labels, np.array(rows))


def _mode_ladder(g: Grid, k_max: int) -> list:
    """Mode indices along the first axis at half-octave radii inside the band."""
    out = {(0,) * g.n}
    for j in range(0, 2 * k_max + 1):
        rad = 2.0 ** (j / 2)
        idx = int(round(rad * g.periods[0] / (2 * np.pi)))
        if 0 < idx * 2 * np.pi / g.periods[0] <= 2.0**k_max:
            out.add((idx,) + (0,) * (g.n - 1))
    return sorted(out)


def _probe_row(prob, f, alphas, lamabs, order, ctx, seed):
    u, _ = solve_full(prob, f, seed=seed, partition=ctx.partition, report=False)
    p = f.fiber_norm_p
    fb = ctx.besov(f.values, p)
    coef = ctx.fft(u.values)
    row = []
    for a in alphas:
        v = ctx.besov(ctx.ifft(coef * ctx.dsym(a)[..., None]), p)
        row.append(lamabs ** (1 - sum(a) / order) * v / fb)
    row.append(ctx.besov(prob.operator.apply(u.values), p) / fb)
    return np.array(row)
