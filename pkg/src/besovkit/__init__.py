"""Weighted Besov norms, operator-valued Fourier multipliers and
elliptic/parabolic solvers on periodic grids."""

__version__ = "0.1.0"
