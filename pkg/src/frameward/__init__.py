"""Frame approximations with regularized Gram solves.

Four frame families on intervals (Fourier extension, augmented Fourier,
weighted Legendre, augmented orthonormal basis), Gram assembly by
quadrature at any working precision, Jacobi-based spectral solvers with
threshold truncation, and sweep drivers for the standard experiments.
"""

from __future__ import annotations

__version__ = "0.1.0"
