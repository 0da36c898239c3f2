"""Reference computations used to cross-check the fast paths.

Nothing here imports the rest of the package: transforms are explicit
sums over exponentials, dyadic blocks are direct circular convolutions
with tabulated kernels, and per-mode solves use dense linear algebra.
All routines are O(N^2) or worse and meant for small grids.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "dft_matrix",
    "direct_dft",
    "direct_idft",
    "profile_value",
    "dyadic_symbol",
    "convolution_block",
    "direct_besov_norm",
    "dense_mode_solve",
    "closed_form_duhamel",
    "angular_resolvent_sweep",
]


def _freqs(N: int, L: float) -> np.ndarray:
    j = np.arange(N)
    j = np.where(j < N - j, j, j - N)  # Nyquist index kept at -N/2
    return 2 * np.pi * j / L


def dft_matrix(N: int) -> np.ndarray:
    j = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(j, j) / N)


def direct_dft(values: np.ndarray, n: int) -> np.ndarray:
    """Unnormalized forward DFT over the first ``n`` axes by explicit sums."""
    out = np.asarray(values, dtype=complex)
    for ax in range(n):
        F = dft_matrix(out.shape[ax])
        out = np.moveaxis(np.tensordot(F, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def direct_idft(coef: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`direct_dft` (includes the ``1/N`` factors)."""
    out = np.asarray(coef, dtype=complex)
    for ax in range(n):
        N = out.shape[ax]
        F = dft_matrix(N).conj() / N
        out = np.moveaxis(np.tensordot(F, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def profile_value(t, profile: str) -> np.ndarray:
    """Radial cutoff: 1 on [0, 1], 0 on [2, inf), smooth in between."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    out[t <= 1] = 1.0
    mid = (t > 1) & (t < 2)
    u = t[mid] - 1
    if profile == "cos2":
        out[mid] = np.cos(np.pi * u / 2) ** 2
    elif profile == "polynomial":
        out[mid] = 1 - (10 * u**3 - 15 * u**4 + 6 * u**5)
    else:
        raise ValueError(profile)
    return out


def dyadic_symbol(sizes, periods, k: int, profile: str, top: int | None = None) -> np.ndarray:
    """``phi_k`` on the frequency grid; ``top`` makes block ``top`` absorb the tail."""
    axes = [_freqs(N, L) for N, L in zip(sizes, periods)]
    rad = np.sqrt(sum(x**2 for x in np.meshgrid(*axes, indexing="ij")))
    if top is not None and k == top:
        return 1.0 - profile_value(rad * 2.0 ** (1 - k), profile)
    hi = profile_value(rad * 2.0**-k, profile)
    lo = profile_value(rad * 2.0 ** (1 - k), profile) if k > 0 else 0.0
    return hi - lo


def convolution_block(values: np.ndarray, sizes, periods, k: int, profile: str) -> np.ndarray:
    """``phi_k(D) f`` as a circular convolution with the block kernel."""
    n = len(sizes)
    kernel = direct_idft(dyadic_symbol(sizes, periods, k, profile), n)
    f = np.asarray(values, dtype=complex)
    out = np.zeros_like(f)
    for idx in np.ndindex(*sizes):
        # (K * f)(x) = sum_y K(x - y) f(y)
        shifted = kernel
        for ax, i in enumerate(idx):
            shifted = np.roll(np.flip(shifted, axis=ax), i + 1, axis=ax)
        out[idx] = np.tensordot(shifted, f, axes=(tuple(range(n)), tuple(range(n))))
    return out


def direct_besov_norm(values, sizes, periods, k_max: int, s: float, q: float, r: float, cell_weights=None,
                      fiber_p: float = 2.0, profile: str = "cos2") -> float:
    """Weighted Besov norm with every block formed by direct convolution."""
    f = np.asarray(values, dtype=complex)
    if f.ndim == len(sizes):
        f = f[..., None]
    cellvol = math.prod(L / N for N, L in zip(sizes, periods))
    w = np.ones(tuple(sizes)) if cell_weights is None else np.asarray(cell_weights, float)
    terms = []
    for k in range(k_max + 1):
        b = convolution_block(f, sizes, periods, k, profile)
        a = np.abs(b)
        pw = a.max(axis=-1) if math.isinf(fiber_p) else np.sum(a**fiber_p, axis=-1) ** (1 / fiber_p)
        if math.isinf(q):
            nq = float(np.max(np.where(w > 0, pw * w, 0.0)))
        else:
            nq = float(np.sum(pw**q * w) * cellvol) ** (1 / q)
        terms.append(2.0 ** (k * s) * nq)
    t = np.array(terms)
    return float(t.max()) if math.isinf(r) else float(np.sum(t**r) ** (1 / r))


def dense_mode_solve(A: np.ndarray, lam: complex, principal: dict, lower: dict, fhat: np.ndarray,
                     sizes, periods) -> np.ndarray:
    """Solve ``(A + lam + K(xi) + sum C_b (i xi)^b) uhat = fhat`` mode by mode.

    ``principal`` maps multi-indices to scalars, ``lower`` to ``d x d``
    matrices; ``fhat`` has shape ``(*sizes, d)``.
    """
    axes = [_freqs(N, L) for N, L in zip(sizes, periods)]
    d = A.shape[0]
    out = np.empty_like(fhat, dtype=complex)
    for idx in np.ndindex(*sizes):
        xi = [ax[i] for ax, i in zip(axes, idx)]
        mono = lambda a: np.prod([(1j * x) ** int(e) for x, e in zip(xi, a)])  # noqa: E731
        M = A + (lam + sum(c * mono(a) for a, c in principal.items())) * np.eye(d)
        for a, C in lower.items():
            M = M + mono(a) * np.asarray(C)
        out[idx] = np.linalg.solve(M, fhat[idx])
    return out


def closed_form_duhamel(mu: complex, times: np.ndarray) -> np.ndarray:
    """``int_0^t exp(-mu (t - s)) ds`` for constant unit forcing."""
    times = np.asarray(times, dtype=float)
    if mu == 0:
        return times.astype(complex)
    return (1 - np.exp(-mu * times)) / mu


def angular_resolvent_sweep(A: np.ndarray, phi: float, angles: int = 181, moduli: int = 200) -> float:
    """``max (1 + |xi|) ||(A + xi)^-1||_2`` over a dense polar grid of the closed sector."""
    d = A.shape[0]
    best = 0.0
    for th in np.linspace(-phi, phi, angles):
        for r in np.concatenate([[0.0], np.logspace(-4, 7, moduli)]):
            xi = r * np.exp(1j * th)
            s = np.linalg.svd(A + xi * np.eye(d), compute_uv=False)[-1]
            best = max(best, (1 + r) / s if s > 0 else math.inf)
    return best
