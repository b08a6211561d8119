"""Spectral factorizations, threshold truncation and regularized solves.

Square Gram matrices are factored by two-sided cyclic Jacobi, rectangular
ones by one-sided Jacobi on columns. Values are returned in descending
order with ties kept in their original order. Truncation keeps exactly the
values strictly above the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import gmpy2
import numpy as np

from frameward import _mp, kernels
from frameward._mp import is_double, working

MAX_SWEEPS = 40


class ConvergenceError(ArithmeticError):
    """Jacobi sweep cap exceeded."""

    def __init__(self, sweeps, residual):
        super().__init__(f"Jacobi iteration did not converge in {sweeps} sweeps "
                         f"(largest off-diagonal entry {residual:.3e})")
        self.sweeps = sweeps
        self.residual = residual


class PrecisionError(ArithmeticError):
    """Working precision too low for an unregularized solve."""

    def __init__(self, have, need):
        super().__init__(f"exact solve needs at least {need} bits of precision, got {have}")
        self.have = have
        self.need = need


@dataclass(frozen=True)
class SpectralFactorization:
    """``G = V diag(values) V*`` (square) or ``G = U diag(values) V*`` (rectangular).

    ``mask`` marks the retained values after :func:`truncate`; it is all
    true for an untruncated factorization.
    """

    values: np.ndarray
    vectors: np.ndarray | None
    left: np.ndarray | None
    shape: tuple
    bits: int
    mask: np.ndarray
    eps: object = None
    sweeps: int = 0

    @property
    def square(self) -> bool:
        return self.left is None

    @property
    def rank_kept(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def sigma_max(self):
        return self.values[0] if len(self.values) else 0

    @property
    def sigma_min_kept(self):
        kept = self.values[self.mask]
        return kept[-1] if len(kept) else None

    @property
    def kappa(self):
        """``values[0] / values[-1]`` of the untruncated spectrum."""
        with working(self.bits):
            return self.values[0] / self.values[-1]

    def values_float(self) -> np.ndarray:
        return _mp.to_float(self.values).astype(float)


@dataclass(frozen=True)
class RegularizedSolution:
    coefficients: np.ndarray
    eps: object
    rank_kept: int
    sigma_min_kept: object
    sigma_max: object


def _order_desc(values) -> np.ndarray:
    # stable: equal values keep their original order
    return np.array(sorted(range(len(values)), key=lambda i: -values[i]), dtype=int)


def hermitian_eig(G: np.ndarray, bits: int = _mp.DOUBLE, *, vectors: bool = True) -> SpectralFactorization:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi.

    Parameters
    ----------
    G : ndarray
        Hermitian ``N x N`` matrix (float/complex, or gmpy2 object array).
    bits : int
        Working precision; 53 or less runs in double.
    vectors : bool
        Skip accumulating eigenvectors when False (faster).

    Returns
    -------
    SpectralFactorization
        Values sorted descending.

    Raises
    ------
    ConvergenceError
        When the 40-sweep cap is exceeded.
    """
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    n = G.shape[0]
    if n == 0:
        empty = _mp.zeros((0,), bits)
        return SpectralFactorization(empty, _mp.zeros((0, 0), bits), None, (0, 0), bits,
                                     np.zeros(0, dtype=bool))
    d, V, sweeps, off = kernels.eigh_jacobi(_mp.asarray(G, bits), bits, vectors, MAX_SWEEPS)
    if sweeps > MAX_SWEEPS:
        raise ConvergenceError(MAX_SWEEPS, off)
    order = _order_desc(d)
    d = d[order]
    if V is not None:
        V = V[:, order]
    return SpectralFactorization(d, V, None, (n, n), bits, np.ones(n, dtype=bool), None, sweeps)


def rect_svd(G: np.ndarray, bits: int = _mp.DOUBLE) -> SpectralFactorization:
    """Thin SVD of an ``M x N`` matrix (``M >= N``) by one-sided Jacobi."""
    G = np.asarray(G)
    m, n = G.shape
    if m < n:
        raise ValueError(f"rect_svd needs M >= N, got {m} x {n}")
    s, U, V, sweeps, off = kernels.svd_jacobi(_mp.asarray(G, bits), bits, MAX_SWEEPS)
    if sweeps > MAX_SWEEPS:
        raise ConvergenceError(MAX_SWEEPS, off)
    order = _order_desc(s)
    return SpectralFactorization(s[order], V[:, order], U[:, order], (m, n), bits,
                                 np.ones(n, dtype=bool), None, sweeps)


def truncate(fact: SpectralFactorization, eps) -> SpectralFactorization:
    """Keep values strictly greater than ``eps``."""
    if eps < 0:
        raise ValueError(f"threshold must be nonnegative, got {eps}")
    with working(fact.bits):
        e = _mp.real(eps, fact.bits) if not isinstance(eps, type(gmpy2.mpfr(0))) else eps
        mask = np.array([v > e for v in fact.values], dtype=bool)
    return replace(fact, mask=mask, eps=eps)


def solve_regularized(fact: SpectralFactorization, y, eps=None) -> RegularizedSolution:
    """Truncated-SVD solution ``sum_{sigma_n > eps} <y, u_n> / sigma_n v_n``.

    ``u_n = v_n`` for a square factorization. With ``eps=None`` the
    factorization's own mask is used.
    """
    if eps is not None:
        fact = truncate(fact, eps)
    bits = fact.bits
    y = _mp.asarray(np.asarray(y), bits)
    m, n = fact.shape
    if y.shape != (m,):
        raise ValueError(f"right-hand side has shape {y.shape}, expected ({m},)")
    keep = np.flatnonzero(fact.mask)
    V = fact.vectors[:, keep]
    U = V if fact.square else fact.left[:, keep]
    with working(bits):
        c = _mp.matmul(_mp.hermitian_transpose(U), y, bits)
        c = c / fact.values[keep]
        x = _mp.matmul(V, c, bits) if len(keep) else _mp.zeros((n,), bits)
    return RegularizedSolution(x, fact.eps, len(keep), fact.sigma_min_kept, fact.sigma_max)


def solve_exact(sys, fact: SpectralFactorization | None = None) -> np.ndarray:
    """Unregularized solve ``G_N x = y`` of a square system with a bound target.

    Raises
    ------
    PrecisionError
        When ``sys.bits`` is below the precision rule for its frame and N.
    """
    from frameward.gram import required_bits

    if not sys.square:
        raise ValueError("exact solve needs a square system")
    if sys.rhs is None:
        raise ValueError("no target bound to the system")
    need = required_bits(sys.spec, sys.N)
    if sys.bits < need:
        raise PrecisionError(sys.bits, need)
    if fact is None:
        fact = hermitian_eig(sys.matrix, sys.bits)
    return solve_regularized(fact, sys.rhs, 0).coefficients


def tsvd_condition_bound(fact: SpectralFactorization, eps) -> float:
    """``1 / sqrt(min kept sigma)``; 0 when nothing is kept."""
    if not fact.square:
        raise ValueError("condition bound is defined for square factorizations")
    smin = truncate(fact, eps).sigma_min_kept
    if smin is None:
        return 0.0
    if is_double(fact.bits):
        return float(1.0 / np.sqrt(smin))
    with working(fact.bits):
        return 1 / gmpy2.sqrt(smin)
