"""Dyadic Littlewood-Paley partitions and weighted Besov norms.

A radial profile ``psi`` equals 1 on ``[0, 1]`` and 0 on ``[2, inf)``.  The
partition is

    phi_0(xi) = psi(|xi|)
    phi_k(xi) = psi(2^-k |xi|) - psi(2^(1-k) |xi|),   k >= 1

so ``phi_k`` is supported in ``2^(k-1) <= |xi| <= 2^(k+1)`` and
``sum_{k <= K} phi_k = psi(2^-K |xi|)``.  On a grid with Nyquist radius
``R`` the top resolved block is ``k_max = floor(log2 R) - 1``; functions
whose spectrum reaches past ``2^k_max`` are rejected by the norm routines
unless ``strict=False``, in which case block ``k_max`` absorbs the tail.

The Besov norm is

    ||f||_{B^s_{q,r,gamma}} = ( sum_k (2^(k s) ||F^-1 phi_k F f||_{L_q,gamma})^r )^(1/r)

with the usual supremum for ``r = inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import HypothesisViolation, OutOfBandError, PartitionTooCoarse, ValidationError
from .grid import Grid, GridFunction, derivative_symbol, fiber_norm, multi_indices
from .weights import Weight, lq_norm_of

__all__ = [
    "PROFILES",
    "Partition",
    "BesovParams",
    "build_partition",
    "block",
    "block_norms",
    "besov_norm",
    "besov_lions_norm",
    "hausdorff_young_check",
    "interpolation_inequality_check",
    "BAND_TOLERANCE",
]

#: Relative spectral mass above ``2^k_max`` tolerated by the strict norms.
BAND_TOLERANCE = 1e-8


def _transition(t):
    return np.clip(np.abs(t) - 1.0, 0.0, 1.0)


def _psi_cos2(t):
    u = _transition(t)
    out = np.cos(0.5 * np.pi * u) ** 2
    out[u <= 0] = 1.0
    out[u >= 1] = 0.0
    return out


def _psi_polynomial(t):
    u = _transition(t)
    out = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    out[u <= 0] = 1.0
    out[u >= 1] = 0.0
    return out


PROFILES = {"cos2": _psi_cos2, "polynomial": _psi_polynomial}


def top_block(grid: Grid) -> int:
    return int(math.floor(math.log2(grid.nyquist_radius) + 1e-12)) - 1


@dataclass(frozen=True, eq=False)
class Partition:
    """Tabulated dyadic partition on a frequency grid.

    ``tables[k]`` holds ``phi_k`` for ``k = 0 .. k_max + 1``; the last
    entry is a guard used only by the overlap identities.
    """

    grid: Grid
    profile: str
    k_max: int
    tables: np.ndarray

    def table(self, k: int, strict: bool = True) -> np.ndarray:
        if not 0 <= k <= self.k_max:
            raise ValidationError(f"block index {k} outside 0..{self.k_max}")
        if not strict and k == self.k_max:
            return 1.0 - np.sum(self.tables[: self.k_max], axis=0)
        return self.tables[k]

    def psi(self, t):
        return PROFILES[self.profile](np.asarray(t, dtype=float))

    def band_mask(self) -> np.ndarray:
        """Modes lying inside the resolved band ``|xi| <= 2^k_max``."""
        return self.grid.frequency_radius() <= 2.0**self.k_max * (1 + 1e-12)


def build_partition(grid: Grid, profile: str = "cos2") -> Partition:
    """Tabulate ``phi_0 .. phi_{k_max+1}`` on ``grid``'s frequencies."""
    if profile not in PROFILES:
        raise ValidationError(f"unknown partition profile {profile!r}; choose from {sorted(PROFILES)}")
    k_max = top_block(grid)
    if k_max < 2:
        raise PartitionTooCoarse(
            f"grid resolves only up to block {k_max}; at least blocks 0..2 are needed"
        )
    psi = PROFILES[profile]
    rad = grid.frequency_radius()
    tabs = np.empty((k_max + 2,) + grid.sizes)
    prev = psi(rad)
    tabs[0] = prev
    for k in range(1, k_max + 2):
        cur = psi(rad * 2.0**-k)
        tabs[k] = cur - prev
        prev = cur
    tabs.setflags(write=False)
    return Partition(grid, profile, k_max, tabs)


@dataclass(frozen=True)
class BesovParams:
    """Smoothness ``s``, integrability ``q``, summability ``r`` and weight."""

    s: float
    q: float = 2.0
    r: float = 2.0
    weight: Weight | None = None
    profile: str = "cos2"

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValidationError("smoothness s must be finite")
        for name in ("q", "r"):
            v = float(getattr(self, name))
            if not (v >= 1 or math.isinf(v)):
                raise ValidationError(f"{name} must satisfy {name} >= 1, got {v}")
            object.__setattr__(self, name, v)
        if self.profile not in PROFILES:
            raise ValidationError(f"unknown partition profile {self.profile!r}")


def _axes(grid):
    return tuple(range(grid.n))


def _coefficients(values, grid):
    return np.fft.fftn(values, axes=_axes(grid))


def band_excess(coef: np.ndarray, partition: Partition) -> float:
    """Relative l2 mass of coefficients outside the resolved band."""
    tot = np.sqrt(np.sum(np.abs(coef) ** 2))
    if tot == 0:
        return 0.0
    outside = ~partition.band_mask()
    return float(np.sqrt(np.sum(np.abs(coef[outside]) ** 2)) / tot)


def _check_band(coef, partition):
    rel = band_excess(coef, partition)
    if rel >= BAND_TOLERANCE:
        raise OutOfBandError(
            f"relative spectral mass {rel:.3e} above 2^{partition.k_max} exceeds {BAND_TOLERANCE:g}",
            rel,
        )


def _partition_for(f_grid, partition, profile="cos2"):
    if partition is None:
        return build_partition(f_grid, profile)
    if partition.grid != f_grid:
        raise ValidationError("partition was built for a different grid")
    return partition


def block(f: GridFunction, k: int, partition: Partition | None = None, strict: bool = True) -> GridFunction:
    """Dyadic block ``F^-1 phi_k F f``."""
    partition = _partition_for(f.grid, partition)
    tab = partition.table(k, strict)
    coef = _coefficients(f.values, f.grid) * tab[..., None]
    return f.replace(np.fft.ifftn(coef, axes=_axes(f.grid)))


def block_norms(
    f: GridFunction,
    q: float,
    weight: Weight | None = None,
    partition: Partition | None = None,
    fiber: Callable | None = None,
    strict: bool = True,
) -> np.ndarray:
    """``||block_k f||_{L_q,gamma}`` for ``k = 0 .. k_max``.

    ``fiber`` maps an array ``(*sizes, d)`` to pointwise norms; the default
    is the l_p norm carried by ``f``.
    """
    partition = _partition_for(f.grid, partition)
    g = f.grid
    coef = _coefficients(f.values, g)
    if strict:
        _check_band(coef, partition)
    if fiber is None:
        p = f.fiber_norm_p
        fiber = lambda v: fiber_norm(v, p)  # noqa: E731
    cells = (weight or Weight.unit()).cell_values(g)
    out = np.empty(partition.k_max + 1)
    for k in range(partition.k_max + 1):
        tab = partition.table(k, strict)
        vals = np.fft.ifftn(coef * tab[..., None], axes=_axes(g))
        out[k] = lq_norm_of(fiber(vals), g, q, cells=cells)
    return out


def combine_blocks(norms: np.ndarray, s: float, r: float) -> float:
    scaled = norms * 2.0 ** (s * np.arange(len(norms)))
    if math.isinf(r):
        return float(np.max(scaled))
    if r == 1:
        return float(np.sum(scaled))
    return float(np.sum(scaled**r) ** (1.0 / r))


def besov_norm(
    f: GridFunction,
    params: BesovParams,
    partition: Partition | None = None,
    fiber: Callable | None = None,
    strict: bool = True,
) -> float:
    """Weighted Besov norm ``||f||_{B^s_{q,r,gamma}}`` of a grid function."""
    partition = _partition_for(f.grid, partition, params.profile)
    norms = block_norms(f, params.q, params.weight, partition, fiber, strict)
    return combine_blocks(norms, params.s, params.r)


def _matrix_of(A):
    return np.asarray(getattr(A, "matrix", A), dtype=np.complex128)


def besov_lions_norm(
    f: GridFunction,
    params: BesovParams,
    orders,
    A=None,
    t=None,
    partition: Partition | None = None,
    strict: bool = True,
) -> float:
    """``||A f||_B + sum_k t_k ||D_k^(l_k) f||_B``.

    ``A`` acts pointwise on the fiber (identity if omitted); ``orders``
    holds one derivative order per axis and ``t`` optional positive
    per-axis scalings.
    """
    g = f.grid
    orders = tuple(int(o) for o in np.atleast_1d(orders))
    if len(orders) != g.n:
        raise ValidationError("one derivative order per axis is required")
    t = (1.0,) * g.n if t is None else tuple(float(x) for x in np.atleast_1d(t))
    partition = _partition_for(g, partition, params.profile)
    Af = f if A is None else f.replace(f.values @ _matrix_of(A).T)
    total = besov_norm(Af, params, partition, strict=strict)
    coef = _coefficients(f.values, g)
    for k, (lk, tk) in enumerate(zip(orders, t)):
        alpha = tuple(lk if j == k else 0 for j in range(g.n))
        dk = f.replace(np.fft.ifftn(coef * derivative_symbol(g, alpha)[..., None], axes=_axes(g)))
        total += tk * besov_norm(dk, params, partition, strict=strict)
    return float(total)


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def frequency_shells(grid: Grid) -> list:
    """Boolean masks ``J_0 = {|xi| < 1}``, ``J_m = {2^(m-1) <= |xi| < 2^m}``."""
    rad = grid.frequency_radius()
    top = int(math.ceil(math.log2(max(rad.max(), 1.0)))) + 1
    shells = [rad < 1.0]
    for m in range(1, top + 1):
        shells.append((rad >= 2.0 ** (m - 1)) & (rad < 2.0**m))
    return shells


def _lr(values, r):
    values = np.asarray(values)
    if math.isinf(r):
        return float(values.max())
    return float(np.sum(values**r) ** (1.0 / r))


def hausdorff_young_check(f: GridFunction, params: BesovParams, fourier_type: float = 2.0,
                          partition: Partition | None = None) -> InequalityReport:
    """Compare dyadic-shell coefficient norms with the Besov norm.

    Returns ``lhs = || {||fhat 1_{J_m}||_{l_q}}_m ||_{l_r}`` (coefficients
    counted with unit mass per mode) and ``rhs = ||f||_{B^s_{q,r,gamma}}``.
    Requires ``1 <= q <= p'`` and ``s >= n (1/q - 1/p')`` where ``p`` is the
    Fourier type of the fiber.
    """
    p = float(fourier_type)
    if not 1 <= p <= 2:
        raise HypothesisViolation(f"Fourier type must lie in [1, 2], got {p}")
    pd = math.inf if p == 1 else p / (p - 1)
    n = f.grid.n
    q = params.q
    if q > pd:
        raise HypothesisViolation(f"q = {q} exceeds the dual exponent {pd}")
    need = n * (1.0 / q - (0.0 if math.isinf(pd) else 1.0 / pd))
    if params.s < need - 1e-12:
        raise HypothesisViolation(f"s = {params.s} is below the admissible threshold {need}")
    coef = _coefficients(f.values, f.grid) / f.grid.npoints
    pw = fiber_norm(coef, f.fiber_norm_p)
    if not np.any(pw > 0):
        raise ValidationError("Hausdorff-Young check needs a nonzero function")
    per_shell = []
    for mask in frequency_shells(f.grid):
        vals = pw[mask]
        if vals.size == 0:
            per_shell.append(0.0)
        elif math.isinf(q):
            per_shell.append(float(vals.max()))
        else:
            per_shell.append(float(np.sum(vals**q) ** (1.0 / q)))
    lhs = _lr(per_shell, params.r)
    rhs = besov_norm(f, params, partition)
    return InequalityReport(lhs, rhs)


def interpolation_inequality_check(f: GridFunction, p: float, j: int, weight: Weight | None = None) -> InequalityReport:
    """Compare ``sum_xi |fhat(xi)|`` with ``||f||^(1-n/(jp)) (sum_{|a|=j} ||D^a f||)^(n/(jp))``.

    Norms on the right are weighted L_p norms; the exponent split requires
    ``j > n / p``.
    """
    g = f.grid
    n = g.n
    p = float(p)
    if not j > n / p:
        raise HypothesisViolation(f"derivative order j = {j} must exceed n/p = {n / p}")
    coef = _coefficients(f.values, g)
    lhs = float(np.sum(fiber_norm(coef / g.npoints, f.fiber_norm_p)))
    cells = (weight or Weight.unit()).cell_values(g)
    base = lq_norm_of(f.pointwise_norm(), g, p, cells=cells)
    top = 0.0
    for alpha in multi_indices(n, j, exact=True):
        d = np.fft.ifftn(coef * derivative_symbol(g, alpha)[..., None], axes=_axes(g))
        top += lq_norm_of(fiber_norm(d, f.fiber_norm_p), g, p, cells=cells)
    theta = n / (j * p)
    return InequalityReport(lhs, base ** (1 - theta) * top**theta)
