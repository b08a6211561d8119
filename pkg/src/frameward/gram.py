"""Truncated Gram systems, frame bounds and the precision rule.

Entry ``(m, n)`` of a Gram matrix is ``<phi_n, phi_m>``; the right-hand
side is ``y_m = <f, phi_m>``. Square systems are exactly Hermitian: the
lower triangle is the conjugate of the upper one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import gmpy2
import numpy as np
from gmpy2 import mpfr

from frameward import _mp
from frameward._mp import is_double, working
from frameward.frames import (GUARD_BITS, Family, FrameIndex, FrameSpec, cross_rule_size, element_values,
                              index_set, law_inner, pair_inner_product, power_sum)
from frameward.quadrature import gauss_jacobi, gauss_legendre, integrate_against
from frameward.regsolve import hermitian_eig
from frameward.targets import TargetFunction


@dataclass(frozen=True)
class GramSystem:
    """``M x N`` Gram matrix over nested index sets, with optional right-hand side."""

    spec: FrameSpec
    rows: tuple
    cols: tuple
    matrix: np.ndarray
    bits: int
    rhs: np.ndarray | None = None
    target: TargetFunction | None = None

    @property
    def M(self) -> int:
        return len(self.rows)

    @property
    def N(self) -> int:
        return len(self.cols)

    @property
    def square(self) -> bool:
        return self.M == self.N


@dataclass(frozen=True)
class FrameBounds:
    lower: object
    upper: object

    @property
    def kappa(self):
        return self.upper / self.lower


def _hermitian_fill(G, bits):
    # mirror the upper triangle; the diagonal is real
    n = G.shape[0]
    if G.dtype != object:
        U = np.triu(G, 1)
        return np.real(np.diag(np.diag(G))).astype(G.dtype) + U + U.conj().T
    with working(bits):
        for i in range(n):
            d = G[i, i]
            G[i, i] = d.real if hasattr(d, "imag") else d
            for j in range(i + 1, n):
                G[j, i] = G[i, j].conjugate() if hasattr(G[i, j], "conjugate") else G[i, j]
    return G


def _fe_block(spec, rows, cols, bits):
    rn = np.array([i.n for i in rows])
    cn = np.array([j.n for j in cols])
    diff = cn[None, :] - rn[:, None]
    if is_double(bits):
        with np.errstate(invalid="ignore", divide="ignore"):
            G = np.sin(np.pi * diff / spec.T) / (np.pi * diff)
        G[diff == 0] = 1.0 / spec.T
        return G
    cache = {}
    G = np.empty(diff.shape, dtype=object)
    with working(bits):
        for k in np.unique(diff):
            cache[int(k)] = pair_inner_product(spec, FrameIndex("fourier", 0), FrameIndex("fourier", int(k)), bits)
        for idx, k in np.ndenumerate(diff):
            G[idx] = cache[int(k)]
    return G


def _augf_block(spec, rows, cols, bits):
    G = _mp.zeros((len(rows), len(cols)), bits, complex_=True)
    leg_k = [i.n for i in rows if i.tag == "legendre"]
    four = sorted({i.n for i in list(rows) + list(cols) if i.tag == "fourier"})
    cross = {}
    if leg_k and four:
        kmax = max(leg_k)
        # one rule sized for the largest |n| serves every (k, n) pair
        rule = gauss_legendre(cross_rule_size(kmax, max(abs(n) for n in four), bits), bits)
        idx = [FrameIndex("legendre", k) for k in range(1, kmax + 1)] + [FrameIndex("fourier", n) for n in four]
        vals = element_values(spec, idx, rule.nodes, bits)
        with working(bits):
            L = _mp.hermitian_transpose(rule.weights[:, None] * vals[:, :kmax])
            C = _mp.matmul(L, _mp.conj(vals[:, kmax:]), bits)
        for a in range(kmax):
            for b, n in enumerate(four):
                cross[(a + 1, n)] = C[a, b]  # <psi_k, phi_n>
    one = _mp.real(1, bits)
    with working(bits):
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if i.tag == j.tag:
                    if i.n == j.n:
                        G[a, b] = one
                elif i.tag == "legendre":
                    G[a, b] = cross[(i.n, j.n)].conjugate()
                else:
                    G[a, b] = cross[(j.n, i.n)]
    return G


def _wleg_block(spec, rows, cols, bits):
    G = _mp.zeros((len(rows), len(cols)), bits)
    dmax = max(i.n for i in list(rows) + list(cols))
    npts = dmax + 1  # exact for every product of degree <= 2 dmax - 2
    tables = {}
    for beta in (spec.alpha, 2 * spec.alpha):
        rule = gauss_jacobi(npts, 0, beta, bits)
        with working(bits):
            P = np.array(_legendre_rows(dmax, rule.nodes, bits), dtype=object if not is_double(bits) else float)
            tables[beta] = _mp.matmul(P * rule.weights[None, :], P.T, bits)
    one = _mp.real(1, bits)
    with working(bits):
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if i.tag == j.tag == "legendre":
                    if i.n == j.n:
                        G[a, b] = one
                    continue
                beta = 2 * spec.alpha if i.tag == j.tag == "weighted" else spec.alpha
                G[a, b] = tables[beta][i.n - 1, j.n - 1]
    return G


def _legendre_rows(dmax, t, bits):
    """Orthonormal ``p_n = sqrt(n - 1/2) P_{n-1}`` for n = 1..dmax at nodes ``t``."""
    P = [t * 0 + 1, t * 1]
    for k in range(1, dmax - 1):
        P.append(((2 * k + 1) * t * P[k] - k * P[k - 1]) / (k + 1))
    out = []
    for n in range(1, dmax + 1):
        c = math.sqrt(n - 0.5) if is_double(bits) else gmpy2.sqrt(mpfr(2 * n - 1) / 2)
        out.append(c * P[n - 1])
    return out


def _augon_block(spec, rows, cols, bits):
    G = _mp.zeros((len(rows), len(cols)), bits)
    one = _mp.real(1, bits)
    with working(bits):
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if i.tag == "ortho" and j.tag == "ortho":
                    if i.n == j.n:
                        G[a, b] = one
                else:
                    G[a, b] = pair_inner_product(spec, i, j, bits)
    return G


def _guarded(block):
    # quadrature-based entries are formed with guard bits and rounded once
    def run(spec, rows, cols, bits):
        if not is_double(bits):
            return block(spec, rows, cols, bits)
        return _mp.to_float(block(spec, rows, cols, _mp.DOUBLE + GUARD_BITS))
    return run


_BLOCKS = {Family.FE: _fe_block, Family.AUGF: _guarded(_augf_block), Family.WLEG: _guarded(_wleg_block),
           Family.AUGON: _augon_block}


def gram_block(spec: FrameSpec, rows, cols, bits: int = _mp.DOUBLE) -> np.ndarray:
    """Matrix ``B[a, b] = <phi_cols[b], phi_rows[a]>`` for arbitrary index lists."""
    return _BLOCKS[spec.family](spec, tuple(rows), tuple(cols), bits)


def analysis(spec: FrameSpec, f: TargetFunction, indices, bits: int = _mp.DOUBLE, tol: float | None = None):
    """Analysis coefficients ``<f, phi_i>`` for an arbitrary index list."""
    empty = _mp.zeros((len(indices), 0), bits)
    return bind_target(GramSystem(spec, tuple(indices), (), empty, bits), f, tol).rhs


def assemble_square(spec: FrameSpec, N: int, bits: int = _mp.DOUBLE) -> GramSystem:
    """Hermitian ``N x N`` Gram matrix of ``index_set(spec, N)``."""
    idx = tuple(index_set(spec, N))
    G = _BLOCKS[spec.family](spec, idx, idx, bits)
    return GramSystem(spec, idx, idx, _hermitian_fill(G, bits), bits)


def assemble_rect(spec: FrameSpec, M: int, N: int, bits: int = _mp.DOUBLE) -> GramSystem:
    """``M x N`` Gram matrix: rows ``index_set(M)``, columns ``index_set(N)``."""
    if M < N:
        raise ValueError(f"rectangular Gram system needs M >= N, got M={M}, N={N}")
    if M == N:
        return assemble_square(spec, N, bits)
    rows = tuple(index_set(spec, M))
    cols = tuple(index_set(spec, N))
    G = _BLOCKS[spec.family](spec, rows, rows, bits)
    G = _hermitian_fill(G, bits)[:, :N].copy()
    return GramSystem(spec, rows, cols, G, bits)


def default_tol(bits: int) -> float:
    """Absolute quadrature tolerance for right-hand sides at ``bits``."""
    return max(2.0 ** (-bits + 6), 1e-300) if not is_double(bits) else 1e-14


def bind_target(sys: GramSystem, f: TargetFunction, tol: float | None = None) -> GramSystem:
    """Attach ``y_m = <f, phi_m>`` for every row index.

    Pointwise targets are integrated by adaptive quadrature against all
    row elements at once; coefficient-space targets (augmented-orthonormal
    family) use exact series with zeta-function tails.
    """
    bits = sys.bits
    tol = default_tol(bits) if tol is None else tol
    spec = sys.spec
    if spec.family == Family.AUGON:
        if f.pointwise:
            raise TypeError("the augmented-orthonormal frame needs a coefficient-space target")
        y = _mp.zeros((sys.M,), bits)
        with working(bits):
            for m, i in enumerate(sys.rows):
                y[m] = law_inner(f.law, spec.law, 1, bits) if i.tag == "extra" else f.law.coefficient(i.n, bits)
        return replace(sys, rhs=y, target=f)
    if not f.pointwise:
        raise TypeError(f"target {f.id!r} only applies to the augmented-orthonormal frame")
    rows = list(sys.rows)
    y = integrate_against(f.evaluator(bits), lambda t: element_values(spec, rows, t, bits),
                          spec.domain, tol, bits, graded_left=f.graded_left)
    y = np.asarray(y)
    if spec.real_elements and f.real:
        y = np.real(y) if y.dtype != object else np.array([v.real if hasattr(v, "imag") else v for v in y],
                                                            dtype=object)
    return replace(sys, rhs=y, target=f)


def target_norm_sq(spec: FrameSpec, f: TargetFunction, bits: int = _mp.DOUBLE):
    """``||f||^2`` for coefficient-space targets."""
    return f.law.scale_value(bits) ** 2 * power_sum(2 * f.law.power, 1, bits)


def frame_bounds(sys: GramSystem) -> FrameBounds:
    """``(A_N, B_N)``: extreme eigenvalues of a square Gram matrix."""
    if not sys.square:
        raise ValueError("frame bounds need a square system")
    fact = hermitian_eig(sys.matrix, sys.bits, vectors=False)
    return FrameBounds(fact.values[-1], fact.values[0])


# ---------------------------------------------------------------- precision

def growth_E(T: float) -> float:
    """``E(T) = cot(pi / (4T))**2``, the per-element growth of the Fourier-extension condition number."""
    return 1.0 / math.tan(math.pi / (4 * T)) ** 2


def log2_kappa_forecast(spec: FrameSpec, N: int) -> float:
    """log2 of the theoretical condition-number growth law at ``N``.

    Fourier extension ``E(T)^N``; augmented Fourier ``N^(2K-1)``; weighted
    Legendre ``4^N`` times ``N^2`` (the observed growth exceeds the bare
    exponential); augmented orthonormal uses its exact closed form.
    """
    if spec.family == Family.FE:
        return N * math.log2(growth_E(spec.T))
    if spec.family == Family.AUGF:
        return (2 * spec.K - 1) * math.log2(max(N, 2))
    if spec.family == Family.WLEG:
        return 5 * N + 2 * math.log2(max(N, 2))
    # augon: kappa = (1 + r) / (1 - r), r^2 = sum_{n<N} c_n^2
    with working(128):
        total = law_inner(spec.law, spec.law, 1, 128)
        tail = law_inner(spec.law, spec.law, N, 128)
        r = gmpy2.sqrt(total - tail)
        return float(gmpy2.log2((1 + r) / (1 - r)))


def required_bits(spec: FrameSpec, N: int) -> int:
    """Minimum precision for an exact solve: ``64 + ceil(log2 kappa_hat)``."""
    return 64 + max(0, math.ceil(log2_kappa_forecast(spec, N)))


def auto_bits(spec: FrameSpec, N: int) -> int:
    """Precision chosen by ``--precision auto``.

    Twice the forecast exponent plus 64 guard bits, rounded up to a
    multiple of 64: eigenvector errors enter the coefficients squared in the
    condition number, so the minimum of :func:`required_bits` is not enough
    for accurate coefficient norms.
    """
    raw = 64 + 2 * max(0, math.ceil(log2_kappa_forecast(spec, N)))
    return max(64 * math.ceil(raw / 64), 128)


# ---------------------------------------------------------------- dump

def _fmt(x, bits) -> str:
    digits = math.ceil(bits * math.log10(2)) + 1
    return format(x, f".{digits}g")


def dump_matrix(sys: GramSystem, path) -> None:
    """Write ``row col re im`` lines (0-based indices)."""
    bits = sys.bits
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (i, j), v in np.ndenumerate(sys.matrix):
            if is_double(bits):
                re, im = complex(v).real, complex(v).imag
                fh.write(f"{i} {j} {re:.17g} {im:.17g}\n")
            else:
                re = v.real if type(v) is type(gmpy2.mpc(0)) else v
                im = v.imag if type(v) is type(gmpy2.mpc(0)) else mpfr(0)
                fh.write(f"{i} {j} {_fmt(re, bits)} {_fmt(im, bits)}\n")
