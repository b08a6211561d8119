"""Frame approximants: exact, truncated-SVD, oversampled and dual expansions.

An approximant is the synthesis ``sum_n z_n phi_n`` of a coefficient
vector over the first ``N`` frame indices. Augmented-orthonormal
approximants live in coefficient space and are measured there.

The canonical dual is reached by Richardson iteration on the frame
operator. Every family here has ``S = I + sum_j <., chi_j> chi_j`` for a
small set of extra elements ``chi_j`` (nothing for Fourier extension, the
Legendre block for augmented Fourier, the weighted block for weighted
Legendre and ``g`` for the augmented-orthonormal frame). The iterates
therefore stay of the form ``gamma f - sum_j beta_j chi_j`` and the
iteration runs on ``(gamma, beta)`` with exact Gram blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from frameward import _mp
from frameward._mp import is_double, working
from frameward.frames import EXTRA, Family, FrameIndex, FrameSpec, element_values, index_set, law_inner
from frameward.gram import (GramSystem, analysis, assemble_rect, assemble_square, auto_bits, bind_target,
                            gram_block, target_norm_sq)
from frameward.quadrature import Interval, gauss_legendre, l2_norm
from frameward.regsolve import (SpectralFactorization, hermitian_eig, rect_svd, solve_exact,
                                solve_regularized, truncate)
from frameward.targets import TargetFunction

MAX_ITER = 500


class FrameAlgorithmError(ArithmeticError):
    """Richardson iteration for the inverse frame operator hit its cap."""

    def __init__(self, iterations, residual):
        super().__init__(f"frame algorithm did not converge in {iterations} iterations "
                         f"(last update norm {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class FrameApproximant:
    """``sum_n z_n phi_n`` over ``indices``.

    ``method`` is one of ``exact``, ``tsvd``, ``oversampled``, ``dual`` or
    ``synthesis``. ``system`` and ``factorization`` are kept for reuse and
    error evaluation; they take no part in equality.
    """

    spec: FrameSpec
    indices: tuple
    coefficients: np.ndarray
    method: str = "synthesis"
    bits: int = _mp.DOUBLE
    eps: object = None
    M: int | None = None
    rank_kept: int | None = None
    system: GramSystem | None = field(default=None, compare=False, repr=False)
    factorization: SpectralFactorization | None = field(default=None, compare=False, repr=False)

    @property
    def N(self) -> int:
        return len(self.indices)

    def __call__(self, t, bits: int | None = None):
        """Point values; ``bits`` defaults to the approximant's precision."""
        if self.spec.family == Family.AUGON:
            raise TypeError("augmented-orthonormal approximants live in coefficient space")
        bits = self.bits if bits is None else bits
        scalar = np.ndim(t) == 0
        E = element_values(self.spec, list(self.indices), np.atleast_1d(t), bits)
        z = _mp.asarray(self.coefficients, bits)
        v = _mp.matmul(E, z, bits)
        return v[0] if scalar else v

    def coeff_norm(self) -> float:
        return float(_mp.norm(self.coefficients, self.bits))


def synthesize(spec: FrameSpec, N: int, z, bits: int = _mp.DOUBLE) -> FrameApproximant:
    """Approximant with prescribed coefficients ``z`` over ``index_set(spec, N)``."""
    idx = tuple(index_set(spec, N))
    z = _mp.asarray(np.asarray(z), bits)
    if z.shape != (N,):
        raise ValueError(f"coefficient vector has shape {z.shape}, expected ({N},)")
    return FrameApproximant(spec, idx, z, "synthesis", bits, rank_kept=N)


def project_exact(spec: FrameSpec, N: int, f: TargetFunction, bits: int | None = None,
                  tol: float | None = None) -> FrameApproximant:
    """Orthogonal projection onto the span of the first ``N`` elements.

    ``bits=None`` picks :func:`frameward.gram.auto_bits`. Raises
    :class:`frameward.regsolve.PrecisionError` below the precision rule.
    """
    bits = auto_bits(spec, N) if bits is None else bits
    sys = bind_target(assemble_square(spec, N, bits), f, tol)
    fact = hermitian_eig(sys.matrix, bits)
    x = solve_exact(sys, fact)
    return FrameApproximant(spec, sys.cols, x, "exact", bits, rank_kept=N, system=sys, factorization=fact)


def project_tsvd(spec: FrameSpec, N: int, f: TargetFunction, eps, bits: int = _mp.DOUBLE, *,
                 system: GramSystem | None = None,
                 factorization: SpectralFactorization | None = None) -> FrameApproximant:
    """Truncated-SVD projection keeping eigenvalues strictly above ``eps``.

    A bound ``system`` and its ``factorization`` may be passed in to share
    one factorization across several thresholds.
    """
    if not eps > 0:
        raise ValueError(f"threshold must be positive, got {eps}")
    sys = system if system is not None else bind_target(assemble_square(spec, N, bits), f)
    fact = factorization if factorization is not None else hermitian_eig(sys.matrix, sys.bits)
    sol = solve_regularized(fact, sys.rhs, eps)
    return FrameApproximant(spec, sys.cols, sol.coefficients, "tsvd", sys.bits, eps, None, sol.rank_kept,
                            system=sys, factorization=truncate(fact, eps))


def project_oversampled(spec: FrameSpec, M: int, N: int, f: TargetFunction, eps, bits: int = _mp.DOUBLE, *,
                        system: GramSystem | None = None,
                        factorization: SpectralFactorization | None = None) -> FrameApproximant:
    """Regularized least-squares solution of the ``M x N`` Gram system."""
    if M < N:
        raise ValueError(f"oversampling needs M >= N, got M={M}, N={N}")
    if not eps > 0:
        raise ValueError(f"threshold must be positive, got {eps}")
    sys = system if system is not None else bind_target(assemble_rect(spec, M, N, bits), f)
    if factorization is None:
        factorization = rect_svd(sys.matrix, sys.bits) if M > N else hermitian_eig(sys.matrix, sys.bits)
    sol = solve_regularized(factorization, sys.rhs, eps)
    return FrameApproximant(spec, sys.cols, sol.coefficients, "oversampled", sys.bits, eps, M, sol.rank_kept,
                            system=sys, factorization=truncate(factorization, eps))


# ---------------------------------------------------------------- frame algorithm

def extra_elements(spec: FrameSpec, reference: int) -> list[FrameIndex]:
    """Elements ``chi_j`` with ``S = I + sum_j <., chi_j> chi_j``.

    Only the weighted-Legendre family needs a truncation: its extra block
    is infinite and ``reference`` weighted elements are kept.
    """
    if spec.family == Family.FE:
        return []
    if spec.family == Family.AUGF:
        return [FrameIndex("legendre", k) for k in range(1, spec.K + 1)]
    if spec.family == Family.WLEG:
        return [FrameIndex("weighted", j) for j in range(1, reference + 1)]
    return [EXTRA]


@dataclass(frozen=True)
class InverseFrameOperator:
    """``S^{-1} f`` as ``gamma f - sum_j beta_j chi_j``.

    ``updates`` holds the L2 norms of successive iterate differences.
    """

    spec: FrameSpec
    target: TargetFunction
    gamma: float
    extras: tuple
    beta: np.ndarray
    updates: tuple
    relax: float

    @property
    def iterations(self) -> int:
        return len(self.updates)

    def contraction(self, floor: float = 1e-13) -> float:
        """Largest ratio of successive update norms above ``floor * updates[0]``."""
        u = [v for v in self.updates if v > floor * self.updates[0]] if self.updates else []
        ratios = [b / a for a, b in zip(u[:-1], u[1:]) if a > 0]
        return max(ratios, default=0.0)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.gamma * self.target(t)
        if self.extras:
            out = out - element_values(self.spec, list(self.extras), t) @ self.beta
        return out

    def inner(self, indices, rhs=None) -> np.ndarray:
        """``<S^{-1} f, phi_i>`` for each index (``rhs`` = precomputed ``<f, phi_i>``)."""
        y = analysis(self.spec, self.target, list(indices)) if rhs is None else np.asarray(rhs)
        a = self.gamma * y
        if self.extras:
            a = a - gram_block(self.spec, list(indices), list(self.extras)) @ self.beta
        return a


def frame_algorithm_inverse(spec: FrameSpec, f: TargetFunction, relax: float | None = None, tol: float = 1e-12,
                            *, reference: int = 256, max_iter: int = MAX_ITER) -> InverseFrameOperator:
    """Richardson iteration ``h <- h + relax (f - S h)`` from ``h = 0`` (double precision).

    ``relax`` defaults to ``2 / (A + B)`` with the family's frame bounds;
    the iteration stops once an update has L2 norm at most ``tol``.
    """
    relax = 2.0 / (spec.lower_bound + spec.upper_bound) if relax is None else float(relax)
    extras = extra_elements(spec, reference)
    if extras:
        F = np.asarray(analysis(spec, f, extras), dtype=complex)
        C = np.asarray(gram_block(spec, extras, extras), dtype=complex)
        C = (C + C.conj().T) / 2
    else:
        F = np.zeros(0, dtype=complex)
        C = np.zeros((0, 0), dtype=complex)
    fnorm2 = float(_norm_sq(spec, f))
    gamma, beta = 0.0, np.zeros(len(extras), dtype=complex)
    updates = []
    for _ in range(max_iter):
        a = gamma * F - C @ beta
        g_new = gamma + relax * (1.0 - gamma)
        b_new = (1.0 - relax) * beta + relax * a
        dg, db = g_new - gamma, b_new - beta
        sq = dg * dg * fnorm2 - 2 * dg * np.real(np.vdot(db, F)) + np.real(np.vdot(db, C @ db))
        step = math.sqrt(max(sq, 0.0))
        gamma, beta = g_new, b_new
        updates.append(step)
        if step <= tol:
            break
    else:
        raise FrameAlgorithmError(max_iter, updates[-1])
    if spec.real_elements and f.real:
        beta = beta.real
    return InverseFrameOperator(spec, f, gamma, tuple(extras), beta, tuple(updates), relax)


def dual_coefficients(spec: FrameSpec, N: int, f: TargetFunction, tol: float = 1e-12, *,
                      reference: int | None = None) -> np.ndarray:
    """Canonical dual frame coefficients ``<S^{-1} f, phi_n>`` for the first ``N`` indices.

    For the tight Fourier-extension frame these are the analysis
    coefficients themselves. ``reference`` defaults to ``8 N``.
    """
    idx = index_set(spec, N)
    y = analysis(spec, f, idx)
    if spec.family == Family.FE:
        return np.asarray(y)
    inv = frame_algorithm_inverse(spec, f, tol=tol, reference=8 * N if reference is None else reference)
    a = inv.inner(idx, rhs=y)
    return a.real if spec.real_elements and f.real else a


def project_dual(spec: FrameSpec, N: int, f: TargetFunction, tol: float = 1e-12) -> FrameApproximant:
    a = dual_coefficients(spec, N, f, tol)
    return FrameApproximant(spec, tuple(index_set(spec, N)), a, "dual", _mp.DOUBLE, rank_kept=N)


# ---------------------------------------------------------------- xi functions

@dataclass(frozen=True)
class XiBasis:
    """``xi_n = T_N v_n`` for the eigenvectors ``v_n`` of a square Gram factorization."""

    spec: FrameSpec
    indices: tuple
    factorization: SpectralFactorization

    def __call__(self, t) -> np.ndarray:
        """Matrix of values, one column per ``xi_n`` (double precision)."""
        E = element_values(self.spec, list(self.indices), np.atleast_1d(np.asarray(t, dtype=float)))
        return E @ _mp.to_float(self.factorization.vectors)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.factorization.values_float(), 0.0))

    def gram(self, nodes: int = 400) -> np.ndarray:
        """``<xi_j, xi_i>`` by a single Gauss-Legendre rule on the domain."""
        rule = gauss_legendre(nodes)
        a, b = self.spec.domain.a, self.spec.domain.b
        t = (a + b) / 2 + (b - a) / 2 * rule.nodes
        X = self(t)
        return (b - a) / 2 * (X.conj().T * rule.weights) @ X


def xi_basis(spec: FrameSpec, N: int, fact: SpectralFactorization | None = None) -> XiBasis:
    if spec.family == Family.AUGON:
        raise TypeError("xi functions need point values")
    if fact is None:
        fact = hermitian_eig(assemble_square(spec, N).matrix)
    if not fact.square or fact.vectors is None:
        raise ValueError("xi functions need a square factorization with eigenvectors")
    if fact.shape[0] != N:
        raise ValueError(f"factorization is {fact.shape[0]} x {fact.shape[0]}, expected N={N}")
    return XiBasis(spec, tuple(index_set(spec, N)), fact)


# ---------------------------------------------------------------- errors

_norm_cache: dict = {}


def _norm_sq(spec: FrameSpec, f: TargetFunction, bits: int = _mp.DOUBLE):
    """``||f||^2`` on the frame's domain (coefficient space for the augmented-orthonormal frame)."""
    if spec.family == Family.AUGON:
        return target_norm_sq(spec, f, bits)
    key = (spec.domain, f.id, bits)
    if key not in _norm_cache:
        tol = 2.0 ** (-bits + 8) if not is_double(bits) else 1e-15
        v = l2_norm(f.evaluator(bits), spec.domain, tol, bits, graded_left=f.graded_left)
        with working(bits):
            _norm_cache[key] = v * v
    return _norm_cache[key]


def _coefficient_error(spec: FrameSpec, f: TargetFunction, z, bits: int):
    """Exact ``||f - T_N z||`` for the augmented-orthonormal frame."""
    N = len(z)
    b = f.law.coefficients(1, N, bits)
    c = spec.law.coefficients(1, N, bits)
    with working(bits):
        z = _mp.asarray(np.asarray(z), bits)
        z0 = z[0]
        head = b - z0 * c - z[1:]
        s = _mp.norm(head, bits) ** 2
        zr = z0.real if hasattr(z0, "real") else z0
        zsq = abs(z0) ** 2
        tail = (law_inner(f.law, f.law, N, bits) - 2 * zr * law_inner(f.law, spec.law, N, bits)
                + zsq * law_inner(spec.law, spec.law, N, bits))
        total = s + tail
        return math.sqrt(max(float(total), 0.0))


def error_l2(spec: FrameSpec, f: TargetFunction, approximant: FrameApproximant, tol: float | None = None,
             rtol: float = 1e-3) -> float:
    """``||f - approximant||`` in L2 of the frame domain.

    Extended-precision approximants carrying their bound Gram system use
    ``||f||^2 - 2 Re x* y + x* G x`` at working precision; everything else
    integrates the pointwise residual adaptively to ``max(tol, rtol * error)``,
    never below the rounding level ``16 * 2**-bits * (1 + ||z||_1)`` of the
    synthesized values.
    """
    bits = approximant.bits
    if spec.family == Family.AUGON:
        return _coefficient_error(spec, f, approximant.coefficients, max(bits, 128))
    sys = approximant.system
    if not is_double(bits) and sys is not None and sys.rhs is not None:
        N = approximant.N
        with working(bits):
            G = sys.matrix[:N, :N]
            y = sys.rhs[:N]
            x = approximant.coefficients
            xy = _mp.vdot(x, y, bits)
            xGx = _mp.vdot(x, _mp.matmul(G, x, bits), bits)
            e2 = _norm_sq(spec, f, bits) - 2 * (xy.real if hasattr(xy, "imag") else xy) + (
                xGx.real if hasattr(xGx, "imag") else xGx)
        return math.sqrt(max(float(e2), 0.0))
    z1 = float(np.sum(np.abs(_mp.to_float(approximant.coefficients))))
    floor = 16 * 2.0 ** -bits * (1 + z1) * math.sqrt(spec.domain.length)
    tol = max(floor, 0.0 if tol is None else tol)

    def residual(t):
        return f(t, bits) - approximant(t, bits)

    return float(l2_norm(residual, spec.domain, tol, bits, graded_left=f.graded_left, rtol=rtol))


def composite_grid(interval: Interval, panels: int = 64, order: int = 32, *, graded_left: bool = False):
    """Nodes and weights of a composite Gauss-Legendre rule (double precision).

    With ``graded_left`` the first panel is split geometrically toward the
    left endpoint.
    """
    a, b = float(interval.a), float(interval.b)
    edges = list(np.linspace(a, b, panels + 1))
    if graded_left:
        h = edges[1] - a
        edges = [a] + [a + h * 2.0 ** -k for k in range(40, 0, -1)] + edges[2:]
    rule = gauss_legendre(order)
    nodes, weights = [], []
    for x0, x1 in zip(edges[:-1], edges[1:]):
        half = (x1 - x0) / 2
        nodes.append((x0 + x1) / 2 + half * rule.nodes)
        weights.append(half * rule.weights)
    return np.concatenate(nodes), np.concatenate(weights)


class ResidualOracle:
    """Batch evaluation of ``||f - T_N z||`` for many coefficient vectors (double precision).

    Pointwise families use a fixed composite Gauss grid; the
    augmented-orthonormal frame uses its exact coefficient-space formula.
    """

    def __init__(self, spec: FrameSpec, N: int, f: TargetFunction, panels: int = 64, order: int = 32):
        self.spec, self.N, self.f = spec, N, f
        self.indices = index_set(spec, N)
        if spec.family == Family.AUGON:
            self._b = f.law.coefficients(1, N, _mp.DOUBLE)
            self._c = spec.law.coefficients(1, N, _mp.DOUBLE)
            self._tails = (law_inner(f.law, f.law, N, 128), law_inner(f.law, spec.law, N, 128),
                           law_inner(spec.law, spec.law, N, 128))
            return
        t, w = composite_grid(spec.domain, panels, order, graded_left=f.graded_left)
        sw = np.sqrt(w)
        self._E = element_values(spec, self.indices, t) * sw[:, None]
        self._f = f(t) * sw

    def norms(self, Z) -> np.ndarray:
        """Residual norms for the columns of ``Z`` (shape ``N x k``) or a single vector."""
        Z = np.asarray(Z)
        single = Z.ndim == 1
        Z = Z[:, None] if single else Z
        if self.spec.family == Family.AUGON:
            z0 = Z[0]
            head = self._b[:, None] - z0[None, :] * self._c[:, None] - Z[1:]
            bb, bc, cc = (float(v) for v in self._tails)
            tail = bb - 2 * np.real(z0) * bc + np.abs(z0) ** 2 * cc
            out = np.sqrt(np.maximum(np.sum(np.abs(head) ** 2, axis=0) + tail, 0.0))
        else:
            R = self._f[:, None] - self._E @ Z
            out = np.sqrt(np.sum(np.abs(R) ** 2, axis=0))
        return out[0] if single else out
