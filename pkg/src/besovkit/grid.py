"""Periodic grids, vector-valued grid functions and spectral transforms.

A :class:`Grid` discretizes the torus ``prod_k [0, L_k)`` with ``N_k``
equispaced points per axis.  A :class:`GridFunction` stores ``d`` complex
components per point together with the exponent ``p`` of the pointwise
fiber norm on ``C^d``.

Transforms are normalized so that a pure mode ``exp(i xi0 . x) v`` has the
single coefficient ``v`` at ``xi0``::

    fhat(xi) = (1 / N_total) * sum_x f(x) exp(-i xi . x)

With this convention the discrete Parseval identity reads
``sum_x |f|^2 dx = vol * sum_xi |fhat|^2`` where ``vol = prod_k L_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GridBudgetError, GridShapeError, ValidationError

__all__ = [
    "Grid",
    "GridFunction",
    "MultiIndex",
    "MAX_GRID_POINTS",
    "forward_transform",
    "inverse_transform",
    "spectral_derivative",
    "fiber_norm",
    "random_band_limited",
    "multi_indices",
]

#: Largest number of grid points accepted when building a grid.
MAX_GRID_POINTS = 2**22

MultiIndex = tuple


def _is_pow2(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``prod_k [0, L_k)``.

    Parameters
    ----------
    sizes : sequence of int
        Points per axis; each a power of two and at least 8.
    periods : sequence of float
        Period ``L_k > 0`` of each axis.
    """

    sizes: tuple
    periods: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in np.atleast_1d(self.sizes))
        periods = tuple(float(p) for p in np.atleast_1d(self.periods))
        if len(periods) == 1 and len(sizes) > 1:
            periods = periods * len(sizes)
        if not 1 <= len(sizes) <= 3:
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {len(sizes)}")
        if len(periods) != len(sizes):
            raise ValidationError("sizes and periods must have the same length")
        for k, (n, L) in enumerate(zip(sizes, periods)):
            if n < 8 or not _is_pow2(n):
                raise GridShapeError(f"axis {k}: size {n} is not a power of two >= 8", axis=k)
            if not (L > 0 and math.isfinite(L)):
                raise GridShapeError(f"axis {k}: period {L} must be positive and finite", axis=k)
        if math.prod(sizes) > MAX_GRID_POINTS:
            raise GridBudgetError(
                f"grid with {math.prod(sizes)} points exceeds budget of {MAX_GRID_POINTS}"
            )
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "periods", periods)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple:
        return self.sizes

    @property
    def npoints(self) -> int:
        return math.prod(self.sizes)

    @property
    def spacing(self) -> tuple:
        return tuple(L / N for L, N in zip(self.periods, self.sizes))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.periods)

    def coordinates(self) -> list:
        """One array of node coordinates ``x_j = j L / N`` per axis."""
        return [np.arange(N) * (L / N) for N, L in zip(self.sizes, self.periods)]

    def mesh(self) -> np.ndarray:
        """Node coordinates stacked on a trailing axis, shape ``(*sizes, n)``."""
        return np.stack(np.meshgrid(*self.coordinates(), indexing="ij"), axis=-1)

    def frequencies(self) -> list:
        """Angular frequencies ``2 pi j / L`` per axis in FFT order."""
        return [2 * np.pi * np.fft.fftfreq(N, d=L / N) for N, L in zip(self.sizes, self.periods)]

    def frequency_mesh(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.frequencies(), indexing="ij"), axis=-1)

    def frequency_radius(self) -> np.ndarray:
        return np.sqrt(sum(x**2 for x in np.meshgrid(*self.frequencies(), indexing="ij")))

    @property
    def frequency_spacing(self) -> tuple:
        return tuple(2 * np.pi / L for L in self.periods)

    @property
    def nyquist_radius(self) -> float:
        """Radius of the largest centered ball inside the frequency box."""
        return min(np.pi * N / L for N, L in zip(self.sizes, self.periods))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(tuple(N * factor for N in self.sizes), self.periods)


def fiber_norm(values: np.ndarray, p: float) -> np.ndarray:
    """Pointwise l_p norm over the trailing axis."""
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 2:
        return np.sqrt(np.sum(a * a, axis=-1))
    if p == 1:
        return a.sum(axis=-1)
    return np.sum(a**p, axis=-1) ** (1.0 / p)


def _check_p(p: float) -> float:
    p = float(p)
    if not (p >= 1 or math.isinf(p)):
        raise ValidationError(f"fiber norm exponent must satisfy p >= 1, got {p}")
    return p


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a ``C^d``-valued function on a grid.

    ``values`` has shape ``(*grid.sizes, d)``.  ``spectral`` marks arrays
    holding transform coefficients in FFT order rather than point values.
    """

    grid: Grid
    values: np.ndarray
    fiber_norm_p: float = 2.0
    spectral: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        g = self.grid
        if v.ndim == g.n:
            v = v[..., None]
        if v.ndim != g.n + 1:
            raise GridShapeError(
                f"expected {g.n + 1} array axes (grid axes plus fiber), got {v.ndim}"
            )
        for k, (have, want) in enumerate(zip(v.shape, g.sizes)):
            if have != want:
                raise GridShapeError(f"axis {k}: array has {have} points, grid has {want}", axis=k)
        if v.shape[-1] < 1:
            raise GridShapeError("fiber dimension must be at least 1", axis=g.n)
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "fiber_norm_p", _check_p(self.fiber_norm_p))

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-1]

    def pointwise_norm(self) -> np.ndarray:
        return fiber_norm(self.values, self.fiber_norm_p)

    def replace(self, values, spectral: bool | None = None) -> "GridFunction":
        return GridFunction(
            self.grid, values, self.fiber_norm_p, self.spectral if spectral is None else spectral
        )

    def _compatible(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise ValidationError("grid functions live on different grids")
        if other.fiber_norm_p != self.fiber_norm_p:
            raise ValidationError("grid functions carry different fiber norms")
        if other.spectral != self.spectral:
            raise ValidationError("cannot combine spectral and physical arrays")

    def __add__(self, other):
        self._compatible(other)
        return self.replace(self.values + other.values)

    def __sub__(self, other):
        self._compatible(other)
        return self.replace(self.values - other.values)

    def __mul__(self, c):
        return self.replace(self.values * complex(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.values)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable, p: float = 2.0) -> "GridFunction":
        """Sample ``fn(x)`` where ``x`` has shape ``(*sizes, n)``."""
        return cls(grid, fn(grid.mesh()), p)

    @classmethod
    def zeros(cls, grid: Grid, d: int = 1, p: float = 2.0) -> "GridFunction":
        return cls(grid, np.zeros(grid.sizes + (d,)), p)

    @classmethod
    def mode(cls, grid: Grid, index: Sequence[int], v, p: float = 2.0) -> "GridFunction":
        """Pure mode ``exp(i xi . x) v`` with ``xi_k = 2 pi index_k / L_k``."""
        index = tuple(int(j) for j in index)
        if len(index) != grid.n:
            raise ValidationError("mode index length must equal grid dimension")
        x = grid.mesh()
        xi = np.array([2 * np.pi * j / L for j, L in zip(index, grid.periods)])
        phase = np.exp(1j * (x @ xi))
        v = np.atleast_1d(np.asarray(v, dtype=np.complex128))
        return cls(grid, phase[..., None] * v, p)


def _axes(grid: Grid) -> tuple:
    return tuple(range(grid.n))


def forward_transform(f: GridFunction) -> GridFunction:
    """Unit-coefficient discrete Fourier transform of a grid function."""
    if f.spectral:
        raise ValidationError("input is already spectral")
    coef = np.fft.fftn(f.values, axes=_axes(f.grid)) / f.grid.npoints
    return f.replace(coef, spectral=True)


def inverse_transform(fhat: GridFunction) -> GridFunction:
    """Inverse of :func:`forward_transform`."""
    if not fhat.spectral:
        raise ValidationError("input is not spectral")
    vals = np.fft.ifftn(fhat.values, axes=_axes(fhat.grid)) * fhat.grid.npoints
    return fhat.replace(vals, spectral=False)


def apply_fourier_symbol(f: GridFunction, symbol: np.ndarray) -> GridFunction:
    """Multiply coefficients by a scalar table of shape ``grid.sizes``."""
    coef = np.fft.fftn(f.values, axes=_axes(f.grid))
    coef *= symbol[..., None]
    return f.replace(np.fft.ifftn(coef, axes=_axes(f.grid)))


def derivative_symbol(grid: Grid, alpha: Sequence[int]) -> np.ndarray:
    """Table of ``prod_k (i xi_k)^alpha_k`` over the frequency grid."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != grid.n:
        raise ValidationError(f"multi-index {alpha} does not match grid dimension {grid.n}")
    if any(a < 0 for a in alpha):
        raise ValidationError(f"multi-index {alpha} has negative entries")
    out = np.ones(grid.sizes, dtype=np.complex128)
    for k, (a, xi) in enumerate(zip(alpha, grid.frequencies())):
        if a:
            shape = [1] * grid.n
            shape[k] = -1
            out = out * ((1j * xi) ** a).reshape(shape)
    return out


def spectral_derivative(f: GridFunction, alpha: Sequence[int]) -> GridFunction:
    """Apply ``D^alpha`` with symbol ``(i xi)^alpha``.

    The Nyquist mode ``j = -N/2`` uses ``xi = -pi N / L`` as is; no
    zeroing is performed, so ``D^a D^b = D^(a+b)`` holds exactly.
    """
    return apply_fourier_symbol(f, derivative_symbol(f.grid, alpha))


def multi_indices(n: int, order: int, exact: bool = False) -> list:
    """All multi-indices of length ``n`` with ``|alpha| <= order``.

    With ``exact=True`` only those of total order ``order`` are returned.
    Ordering is by total order, then lexicographic descending.
    """
    out = []
    lo = order if exact else 0
    for total in range(lo, order + 1):
        out.extend(_compositions(n, total))
    return out


def _compositions(n: int, total: int) -> list:
    if n == 1:
        return [(total,)]
    res = []
    for first in range(total, -1, -1):
        for rest in _compositions(n - 1, total - first):
            res.append((first,) + rest)
    return res


def random_band_limited(
    grid: Grid,
    d: int,
    cutoff: float,
    rng: np.random.Generator,
    p: float = 2.0,
    decay: float = 0.0,
) -> GridFunction:
    """Random trigonometric polynomial with ``|xi| <= cutoff``.

    Coefficients are drawn on an integer index box determined by ``cutoff``
    and the periods only, so the same generator state yields the same
    function on every grid that resolves it.  ``decay`` scales the
    coefficient at ``xi`` by ``(1 + |xi|)^-decay``.
    """
    J = [int(math.floor(cutoff * L / (2 * np.pi))) for L in grid.periods]
    for k, (j, N) in enumerate(zip(J, grid.sizes)):
        if j >= N // 2:
            raise GridShapeError(f"axis {k}: cutoff {cutoff} is not resolved by {N} points", axis=k)
    box = tuple(2 * j + 1 for j in J) + (d,)
    c = rng.standard_normal(box) + 1j * rng.standard_normal(box)
    idx = [np.arange(-j, j + 1) for j in J]
    xi = np.meshgrid(*[2 * np.pi * i / L for i, L in zip(idx, grid.periods)], indexing="ij")
    rad = np.sqrt(sum(x**2 for x in xi))
    c[rad > cutoff * (1 + 1e-12)] = 0
    if decay:
        c *= ((1 + rad) ** (-decay))[..., None]
    coef = np.zeros(grid.sizes + (d,), dtype=np.complex128)
    pos = np.ix_(*[i % N for i, N in zip(idx, grid.sizes)])
    coef[pos] = c
    vals = np.fft.ifftn(coef, axes=_axes(grid)) * grid.npoints
    return GridFunction(grid, vals, p)
