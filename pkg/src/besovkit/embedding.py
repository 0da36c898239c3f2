"""Mixed-derivative embedding estimates for anisotropic Besov-Lions spaces.

For per-axis orders ``l``, a derivative ``alpha``, extra powers ``r`` and
per-axis scalings ``t`` define

    kappa   = sum_k (alpha_k + r_k) / l_k
    nu(l)   = max_{k,j} (1/l_k - 1/l_j)
    eta(t)  = prod_k t_k^(alpha_k / l_k)

and the operator-valued symbol

    Psi(xi) = prod_k t_k^((alpha_k+r_k)/l_k) |xi^r| (i xi)^alpha
              A^(1-kappa-mu) h^-mu [A + sum_k t_k |xi_k|^l_k + 1/h]^-1 .

Its supremum over ``xi`` is bounded uniformly in ``t`` and ``h`` as long as
``kappa + nu(l) <= 1`` and ``0 <= mu <= 1 - kappa - nu(l)``.  The grid
functions checks compare

    eta(t) ||D^alpha u||_{B(E(A^(1-kappa-mu)))}
        against  h^mu ||u||_Y + h^-(1-mu) ||u||_B,

where ``||u||_Y = ||A u||_B + sum_k t_k ||D_k^l_k u||_B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation, ValidationError
from .grid import GridFunction, derivative_symbol
from .littlewood_paley import BesovParams, Partition, besov_lions_norm, besov_norm, build_partition
from .operators import PositiveOperator, graph_norm

__all__ = [
    "EmbeddingSpec",
    "SymbolSupReport",
    "EmbeddingReport",
    "symbol_sup",
    "embedding_estimate_check",
    "multiplicative_estimate_check",
    "optimal_h",
    "xi_samples",
]


@dataclass(frozen=True)
class EmbeddingSpec:
    """Orders, derivative, scalings and exponent of one embedding estimate."""

    l: tuple
    alpha: tuple
    t: tuple = ()
    h: float = 1.0
    mu: float = 0.0
    r: tuple = ()

    def __post_init__(self):
        l = tuple(int(x) for x in np.atleast_1d(self.l))
        n = len(l)
        alpha = tuple(int(x) for x in np.atleast_1d(self.alpha))
        t = tuple(float(x) for x in np.atleast_1d(self.t)) if len(np.atleast_1d(self.t)) else (1.0,) * n
        r = tuple(float(x) for x in np.atleast_1d(self.r)) if len(np.atleast_1d(self.r)) else (0.0,) * n
        if len(t) == 1 and n > 1:
            t = t * n
        if not (len(alpha) == len(t) == len(r) == n):
            raise ValidationError("l, alpha, t and r need one entry per axis")
        if any(x < 1 for x in l):
            raise ValidationError("orders l_k must be >= 1")
        if any(x < 0 for x in alpha) or any(x < 0 for x in r):
            raise ValidationError("alpha and r must be nonnegative")
        if any(not x > 0 for x in t):
            raise ValidationError("scalings t_k must be positive")
        if not self.h > 0:
            raise ValidationError("h must be positive")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return len(self.l)

    @property
    def kappa(self) -> float:
        return float(sum((a + r) / l for a, r, l in zip(self.alpha, self.r, self.l)))

    @property
    def nu(self) -> float:
        inv = [1.0 / l for l in self.l]
        return float(max(a - b for a in inv for b in inv))

    @property
    def eta(self) -> float:
        return float(math.prod(t ** (a / l) for t, a, l in zip(self.t, self.alpha, self.l)))

    @property
    def theta(self) -> float:
        """Exponent ``1 - kappa - mu`` of the operator factor."""
        return 1.0 - self.kappa - self.mu

    def admissible(self) -> bool:
        return self.kappa + self.nu <= 1 + 1e-12 and -1e-12 <= self.mu <= 1 - self.kappa - self.nu + 1e-12

    def check(self, diagnostic: bool = False):
        if not diagnostic and not self.admissible():
            raise HypothesisViolation(
                f"need kappa + nu <= 1 and 0 <= mu <= 1 - kappa - nu; got kappa={self.kappa:.4g}, "
                f"nu={self.nu:.4g}, mu={self.mu:.4g}"
            )
        if not -1 <= self.theta <= 1:
            raise HypothesisViolation(f"operator exponent {self.theta:.4g} outside [-1, 1]")


def xi_samples(radius: float, count: int, n: int = 1) -> np.ndarray:
    """Uniform samples of ``[-radius, radius]^n`` including the origin."""
    if count % 2 == 0:
        count += 1
    axis = np.linspace(-radius, radius, count)
    return np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)


@dataclass(frozen=True)
class SymbolSupReport:
    value: float
    table: np.ndarray = field(repr=False)
    t_values: tuple = ()
    h_values: tuple = ()
    argmax: tuple = ()


def symbol_sup(A: PositiveOperator, spec: EmbeddingSpec, xi: np.ndarray, t_values=None,
                     h_values=None, diagnostic: bool = False) -> SymbolSupReport:
    """Sampled ``sup ||Psi(xi)||`` over ``xi`` and a ``(t, h)`` lattice.

    ``t_values`` are applied isotropically (``t_k = t``).  Defaults use
    ``spec.t`` and ``spec.h``.  With ``diagnostic=True`` inadmissible
    exponents are evaluated instead of rejected.
    """
    spec.check(diagnostic)
    xi = np.asarray(xi, dtype=float).reshape(-1, spec.n)
    t_values = (spec.t[0],) if t_values is None else tuple(float(x) for x in t_values)
    h_values = (spec.h,) if h_values is None else tuple(float(x) for x in h_values)
    theta = spec.theta
    lam = A.eigenvalues
    lam_theta = np.exp(theta * np.log(lam.astype(complex)))
    l = np.array(spec.l, dtype=float)
    a = np.array(spec.alpha, dtype=float)
    r = np.array(spec.r, dtype=float)
    axi = np.abs(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        mono = np.prod(np.where(a + r > 0, axi ** (a + r), 1.0), axis=1)
    table = np.zeros((len(t_values), len(h_values)))
    best, arg = -1.0, ()
    for i, t in enumerate(t_values):
        tfac = t ** float(np.sum((a + r) / l))
        stretch = t * np.sum(axi**l, axis=1)
        for j, h in enumerate(h_values):
            eta = stretch + 1.0 / h
            diag = lam_theta[None, :] / (lam[None, :] + eta[:, None])
            if A.is_diagonal:
                nrm = np.abs(diag).max(axis=1)
            else:
                mats = (A.eigenvectors[None] * diag[:, None, :]) @ A.eigenvectors_inv[None]
                nrm = np.linalg.norm(mats, ord=2, axis=(-2, -1))
            vals = tfac * mono * h ** (-spec.mu) * nrm
            k = int(np.argmax(vals))
            table[i, j] = vals[k]
            if vals[k] > best:
                best, arg = float(vals[k]), (t, h, tuple(xi[k]))
    return SymbolSupReport(best, table, t_values, h_values, arg)


def optimal_h(y_norm: float, b_norm: float, mu: float) -> tuple:
    """Minimizer and minimum of ``h^mu Y + h^(mu-1) B`` over ``h > 0``.

    For ``mu = 0`` the infimum ``Y`` is approached as ``h -> inf``.
    """
    if mu <= 0:
        return math.inf, y_norm
    if mu >= 1:
        return 0.0, b_norm
    h = (1 - mu) * b_norm / (mu * y_norm)
    c = mu**-mu * (1 - mu) ** (mu - 1)
    return h, c * y_norm ** (1 - mu) * b_norm**mu


@dataclass(frozen=True)
class EmbeddingReport:
    lhs: float
    y_norm: float
    b_norm: float
    rhs_by_h: tuple
    h_star: float
    rhs_min: float
    mu: float = 0.0

    @property
    def ratio(self) -> float:
        """``lhs`` over the smallest right-hand side (lattice or optimum)."""
        lattice = min(v for _, v in self.rhs_by_h) if self.rhs_by_h else math.inf
        return self.lhs / min(lattice, self.rhs_min)

    @property
    def multiplicative_ratio(self) -> float:
        """``lhs / (Y^(1-mu) B^mu)``; equals twice the ratio at ``h = B/Y``."""
        mu = self.mu
        return self.lhs / (self.y_norm ** (1 - mu) * self.b_norm**mu)


def _derivative_lhs(u: GridFunction, A: PositiveOperator, spec: EmbeddingSpec, params: BesovParams,
                    partition: Partition) -> float:
    g = u.grid
    axes = tuple(range(g.n))
    coef = np.fft.fftn(u.values, axes=axes) * derivative_symbol(g, spec.alpha)[..., None]
    du = u.replace(np.fft.ifftn(coef, axes=axes))
    p = u.fiber_norm_p
    theta = spec.theta
    fiber = lambda v: graph_norm(v, A, theta, p)  # noqa: E731
    return spec.eta * besov_norm(du, params, partition, fiber=fiber)


def embedding_estimate_check(u: GridFunction, A: PositiveOperator, spec: EmbeddingSpec, params: BesovParams,
                             h_values=None, partition: Partition | None = None,
                             diagnostic: bool = False) -> EmbeddingReport:
    """Evaluate both sides of the embedding estimate for one function.

    ``h_values`` defaults to ``2^-6 .. 2^0``.
    """
    spec.check(diagnostic)
    if u.fiber_dim != A.dim:
        raise ValidationError(f"operator acts on C^{A.dim}, function has fiber dimension {u.fiber_dim}")
    partition = partition or build_partition(u.grid, params.profile)
    h_values = tuple(2.0**-j for j in range(6, -1, -1)) if h_values is None else tuple(h_values)
    lhs = _derivative_lhs(u, A, spec, params, partition)
    y = besov_lions_norm(u, params, spec.l, A, spec.t, partition)
    b = besov_norm(u, params, partition)
    mu = spec.mu
    rhs = tuple((h, h**mu * y + h ** (mu - 1) * b) for h in h_values)
    h_star, rmin = optimal_h(y, b, mu)
    return EmbeddingReport(lhs, y, b, rhs, h_star, rmin, mu)


def multiplicative_estimate_check(u: GridFunction, A: PositiveOperator, spec: EmbeddingSpec,
                                  params: BesovParams, partition: Partition | None = None) -> float:
    """``eta(t) ||D^alpha u||_{B(E(A^theta))} / (||u||_Y^(1-mu) ||u||_B^mu)``."""
    rep = embedding_estimate_check(u, A, spec, params, (), partition)
    return rep.multiplicative_ratio
