"""Weight functions, weighted L_q norms and an A_p constant estimator.

Weights are positive functions on the torus.  Three kinds are supported:

``constant``
    ``gamma(x) = c``.
``power``
    ``gamma(x) = prod_k (eps + |x_k - c_k|)^beta_k`` with ``|.|`` the
    distance to the nearest periodic image of the center ``c``.
``table``
    Values tabulated on a specific grid.

Quadrature is the periodic midpoint rule.  For a power weight with
``eps = 0`` the cell containing the singular point carries the exact cell
average of ``|t|^beta`` (from the antiderivative) when that average is
finite, and is dropped from the stencil when it is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bsgf import read_grid_function
from .errors import ConfigError, HypothesisViolation, ValidationError
from .grid import Grid, GridFunction

__all__ = ["Weight", "ApReport", "weighted_lq_norm", "lq_norm_of", "ap_constant", "ap_refinement_sweep"]


def _periodic_distance(x: np.ndarray, c: float, L: float) -> np.ndarray:
    return np.abs(np.mod(x - c + L / 2, L) - L / 2)


def _singular_cell_average(lo: float, hi: float, e: float) -> float:
    """Average of ``|t|^e`` over ``[lo, hi]`` with ``lo <= 0 <= hi``.

    Returns 0 when the integral diverges, which drops the cell.
    """
    if e <= -1:
        return 0.0
    if e == 0:
        return 1.0
    return (abs(lo) ** (e + 1) + hi ** (e + 1)) / ((e + 1) * (hi - lo))


@dataclass(frozen=True, eq=False)
class Weight:
    """Positive weight on the torus; see the module docstring for kinds."""

    kind: str = "constant"
    constant: float = 1.0
    beta: tuple = ()
    eps: float = 0.0
    center: tuple = ()
    table: np.ndarray | None = None
    table_grid: Grid | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "power", "table"):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and not (self.constant > 0 and math.isfinite(self.constant)):
            raise ValidationError("constant weight must be positive and finite")
        if self.kind == "power":
            if not all(math.isfinite(b) for b in self.beta):
                raise ValidationError("power weight exponents must be finite")
            if not (self.eps >= 0 and math.isfinite(self.eps)):
                raise ValidationError("power weight regularizer must be >= 0")
        if self.kind == "table":
            t = np.asarray(self.table, dtype=float)
            if self.table_grid is None or t.shape != self.table_grid.sizes:
                raise ValidationError("tabulated weight must match its grid shape")
            if not np.all(np.isfinite(t)) or np.any(t <= 0):
                raise ValidationError("tabulated weight must be positive and finite")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)

    # -- constructors -------------------------------------------------------

    @classmethod
    def unit(cls) -> "Weight":
        return cls("constant", 1.0)

    @classmethod
    def power_law(cls, beta, eps: float = 0.0, center=0.0) -> "Weight":
        return cls("power", beta=tuple(np.atleast_1d(beta).astype(float)), eps=float(eps),
                   center=tuple(np.atleast_1d(center).astype(float)))

    @classmethod
    def tabulated(cls, grid: Grid, values) -> "Weight":
        return cls("table", table=np.asarray(values, dtype=float), table_grid=grid)

    @classmethod
    def from_spec(cls, text: str, base_dir=None) -> "Weight":
        """Parse ``constant:<c>``, ``power:beta=..,eps=..[,center=..]`` or ``table:<path>``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip()
        try:
            if kind == "constant":
                return cls("constant", float(rest) if rest.strip() else 1.0)
            if kind == "power":
                opts = dict(item.split("=", 1) for item in rest.split(",") if item.strip())
                opts = {k.strip(): v.strip() for k, v in opts.items()}
                unknown = set(opts) - {"beta", "eps", "center"}
                if unknown:
                    raise ConfigError(f"unknown power weight option(s) {sorted(unknown)}")
                beta = [float(b) for b in opts.get("beta", "0").split(";")]
                center = [float(c) for c in opts.get("center", "0").split(";")]
                return cls.power_law(beta, float(opts.get("eps", 0.0)), center)
            if kind == "table":
                path = Path(rest.strip())
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                g = read_grid_function(path)
                return cls.tabulated(g.grid, g.values[..., 0].real)
        except (ValueError, ValidationError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad weight spec {text!r}: {exc}") from exc
        raise ConfigError(f"unknown weight kind in {text!r}")

    # -- evaluation ---------------------------------------------------------

    def _axis_params(self, n: int):
        beta = self.beta if len(self.beta) == n else (self.beta[0],) * n
        center = self.center if len(self.center) == n else (self.center[0] if self.center else 0.0,) * n
        return beta, center

    def singular_point(self, grid: Grid):
        """Grid index of the cell containing the singular point, if any."""
        if self.kind != "power":
            return None
        _, center = self._axis_params(grid.n)
        return tuple(int(round(c / h)) % N for c, h, N in zip(center, grid.spacing, grid.sizes))

    def cell_values(self, grid: Grid, power: float = 1.0) -> np.ndarray:
        """Quadrature values of ``gamma**power``, shape ``grid.sizes``.

        Cells dropped from the stencil hold 0.
        """
        if self.kind == "constant":
            return np.full(grid.sizes, self.constant**power)
        if self.kind == "table":
            if self.table_grid != grid:
                raise ValidationError("tabulated weight used on a different grid")
            return self.table**power
        beta, center = self._axis_params(grid.n)
        out = np.ones(grid.sizes)
        for k, (x, L, h, b, c) in enumerate(zip(grid.coordinates(), grid.periods, grid.spacing, beta, center)):
            e = b * power
            dist = _periodic_distance(x, c, L)
            if self.eps > 0:
                vals = (self.eps + dist) ** e
            else:
                with np.errstate(divide="ignore"):
                    vals = dist**e
                j0 = int(round(c / h)) % len(x)
                off = (x[j0] - c + L / 2) % L - L / 2
                vals[j0] = _singular_cell_average(off - h / 2, off + h / 2, e)
            shape = [1] * grid.n
            shape[k] = -1
            out = out * vals.reshape(shape)
        return out

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.constant!r}"
        if self.kind == "power":
            b = ";".join(repr(x) for x in self.beta)
            return f"power:beta={b},eps={self.eps!r}"
        return "table"


def lq_norm_of(pointwise: np.ndarray, grid: Grid, q: float, weight: Weight | None = None,
               cells: np.ndarray | None = None) -> float:
    """Weighted L_q norm of a nonnegative pointwise array."""
    q = float(q)
    if not (q >= 1 or math.isinf(q)):
        raise ValidationError(f"q must satisfy q >= 1, got {q}")
    if cells is None:
        cells = (weight or Weight.unit()).cell_values(grid)
    if math.isinf(q):
        mask = cells > 0
        return float(np.max(pointwise[mask] * cells[mask])) if mask.any() else 0.0
    if q == 2:
        return float(np.sqrt(np.sum(pointwise * pointwise * cells) * grid.cell_volume))
    return float((np.sum(pointwise**q * cells) * grid.cell_volume) ** (1.0 / q))


def weighted_lq_norm(f: GridFunction, q: float, weight: Weight | None = None) -> float:
    """``(sum_x |f(x)|^q gamma(x) dx)^(1/q)``; ``q = inf`` gives ``max |f| gamma``."""
    return lq_norm_of(f.pointwise_norm(), f.grid, q, weight)


# -- Muckenhoupt A_p estimator ----------------------------------------------


@dataclass(frozen=True)
class ApReport:
    p: float
    estimate: float
    cube_count: int
    min_scale: float
    max_scale: float
    per_scale: tuple = field(default=())


def _window_sums(a: np.ndarray, m: tuple) -> np.ndarray:
    """Periodic box sums of side ``m_k`` cells for every starting index."""
    out = a
    for axis, mk in enumerate(m):
        N = out.shape[axis]
        head = np.take(out, np.arange(mk), axis=axis)
        ext = np.concatenate([out, head], axis=axis)
        c = np.cumsum(ext, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        out = np.take(c, np.arange(mk, mk + N), axis=axis) - np.take(c, np.arange(N), axis=axis)
    return out


def ap_constant(weight: Weight, p: float, grid: Grid, scales=None, positions: int = 8) -> ApReport:
    """Estimate ``sup_Q avg_Q(gamma) * avg_Q(gamma^(-1/(p-1)))^(p-1)``.

    Cubes are unions of grid cells.  For each side length in ``scales``
    (default: dyadic fractions of the smallest period down to one cell)
    a lattice of ``positions`` starts per axis is sampled, plus cubes
    centered at the singular point of a power weight or at the extrema of
    a tabulated weight.
    """
    p = float(p)
    if not (p > 1) or math.isinf(p):
        raise HypothesisViolation(f"A_p estimator requires 1 < p < inf, got {p}")
    gam = weight.cell_values(grid, 1.0)
    sig = weight.cell_values(grid, -1.0 / (p - 1))
    if scales is None:
        top = min(grid.periods)
        hmax = max(grid.spacing)
        scales = [top * 2.0**-j for j in range(0, 64) if top * 2.0**-j >= hmax * (1 - 1e-12)]
    centers = []
    sp = weight.singular_point(grid)
    if sp is not None:
        centers.append(sp)
    elif weight.kind == "table":
        centers.append(np.unravel_index(np.argmax(gam), grid.sizes))
        centers.append(np.unravel_index(np.argmin(gam), grid.sizes))
    best = 0.0
    count = 0
    per_scale = []
    used = []
    for w in scales:
        m = tuple(int(round(w / h)) for h in grid.spacing)
        if any(mk < 1 or mk > N for mk, N in zip(m, grid.sizes)):
            raise ValidationError(f"cube side {w} is not resolved by the grid")
        vol = math.prod(m)
        sg = _window_sums(gam, m) / vol
        ss = _window_sums(sig, m) / vol
        with np.errstate(divide="ignore", invalid="ignore"):
            val = sg * ss ** (p - 1)
        starts = [np.unique((np.arange(positions) * N) // positions) for N in grid.sizes]
        idx = [s.ravel() for s in np.meshgrid(*starts, indexing="ij")]
        picks = list(zip(*idx))
        for c in centers:
            picks.append(tuple((ck - mk // 2) % N for ck, mk, N in zip(c, m, grid.sizes)))
        picks = sorted(set(tuple(int(i) for i in pk) for pk in picks))
        vals = np.array([val[pk] for pk in picks])
        level = float(np.max(vals))
        per_scale.append((float(w), level))
        best = max(best, level)
        count += len(picks)
        used.append(w)
    return ApReport(p, best, count, float(min(used)), float(max(used)), tuple(per_scale))


def ap_refinement_sweep(weight: Weight, p: float, period: float, base_size: int, levels: int,
                        n: int = 1, positions: int = 8) -> list:
    """A_p estimates on a sequence of grids refined together with the cube scales.

    Level ``j`` uses ``base_size * 2^j`` points per axis and dyadic cubes
    from the full period down to ``period / 2^j``; the coarse cubes keep
    their absolute size while quadrature refines.
    """
    reports = []
    for j in range(levels):
        g = Grid((base_size * 2**j,) * n, (period,) * n)
        scales = [period * 2.0**-i for i in range(j + 1)]
        reports.append(ap_constant(weight, p, g, scales, positions))
    return reports
