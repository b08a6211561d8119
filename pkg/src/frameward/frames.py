"""Frame families on one-dimensional domains.

Four families are supported:

``fe``
    Fourier extension: ``phi_n(t) = exp(i*pi*n*t) / sqrt(2)`` restricted to
    ``(-1/T, 1/T)``. Tight with bounds A = B = 1.
``augf``
    Fourier basis on (-1, 1) augmented with ``K`` normalized Legendre
    polynomials ``psi_k = sqrt(k + 1/2) P_k``, k = 1..K. Bounds A = 1, B = 2.
``wleg``
    Orthonormal Legendre polynomials ``p_n = sqrt(n - 1/2) P_{n-1}`` on (-1, 1)
    together with the weighted copies ``w * p_n``, ``w(t) = (1 + t)**alpha``.
    Bounds A = 1, B = 1 + 2**(2*alpha).
``augon``
    An abstract orthonormal basis ``{e_n}`` augmented by one unit vector
    ``g = sum c_n e_n``, with ``c_n = scale * n**-power``. Everything lives in
    coefficient space; there is no pointwise evaluation.

Index sets are ordered so that ``index_set(spec, N)`` is a prefix of
``index_set(spec, N')`` whenever ``N <= N'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import gmpy2
import numpy as np
from gmpy2 import mpfr

from frameward import _mp
from frameward._mp import is_double, working
from frameward.quadrature import Interval, gauss_jacobi, gauss_legendre


class Family(str, Enum):
    FE = "fe"
    AUGF = "augf"
    WLEG = "wleg"
    AUGON = "augon"


class AdmissibilityError(ValueError):
    pass


class DomainError(ValueError):
    pass


class FrameIndex(NamedTuple):
    """Tag plus integer: ``fourier``, ``legendre``, ``weighted``, ``extra``, ``ortho``."""

    tag: str
    n: int = 0

    def __str__(self):
        return self.tag if self.tag == "extra" else f"{self.tag}({self.n})"


EXTRA = FrameIndex("extra", 0)
GUARD_BITS = 60


@dataclass(frozen=True)
class CoefficientLaw:
    """Power-law sequence ``c_n = scale * n**(-power)``, n >= 1.

    ``scale`` is a decimal string or symbolic name resolved at the working
    precision, so the law is exact at any number of bits.
    """

    name: str
    scale: str
    power: int

    def scale_value(self, bits):
        with working(bits):
            if self.scale == "sqrt90/pi2":
                v = gmpy2.sqrt(mpfr(90)) / gmpy2.const_pi() ** 2
            elif self.scale == "sqrt6/pi":
                v = gmpy2.sqrt(mpfr(6)) / gmpy2.const_pi()
            else:
                v = mpfr(self.scale)
        return float(v) if is_double(bits) else v

    def coefficient(self, n: int, bits):
        s = self.scale_value(bits)
        if is_double(bits):
            return s * float(n) ** (-self.power)
        with working(bits):
            return s / mpfr(n) ** self.power

    def coefficients(self, n_from: int, n_to: int, bits) -> np.ndarray:
        """``c_n`` for ``n_from <= n < n_to``."""
        if is_double(bits):
            n = np.arange(n_from, n_to, dtype=float)
            return self.scale_value(bits) * n ** (-self.power)
        out = np.empty(max(n_to - n_from, 0), dtype=object)
        s = self.scale_value(bits)
        with working(bits):
            for i, n in enumerate(range(n_from, n_to)):
                out[i] = s / mpfr(n) ** self.power
        return out


GRAM_LAW = CoefficientLaw("p2", "sqrt90/pi2", 2)
P51_LAW = CoefficientLaw("p51", "sqrt6/pi", 1)


def power_sum(power: int, start: int, bits):
    """``sum_{n >= start} n**(-power)`` via the Hurwitz zeta function."""
    if power <= 1:
        raise ValueError("series diverges")
    with working(bits):
        v = gmpy2.zeta(mpfr(power)) - sum((mpfr(n) ** -power for n in range(1, start)), mpfr(0))
    return float(v) if is_double(bits) else v


def law_inner(a: CoefficientLaw, b: CoefficientLaw, start: int, bits):
    """``sum_{n >= start} a_n * b_n`` (real laws)."""
    with working(bits):
        sa, sb = a.scale_value(max(bits, 64)), b.scale_value(max(bits, 64))
        v = sa * sb * power_sum(a.power + b.power, start, max(bits, 64))
    return float(v) if is_double(bits) else v


@dataclass(frozen=True)
class FrameSpec:
    """Immutable frame description.

    Use the constructors :meth:`fe`, :meth:`augmented_fourier`,
    :meth:`weighted_legendre`, :meth:`augmented_orthonormal`.
    """

    family: Family
    T: float = 2.0
    K: int = 0
    alpha: float = 0.5
    law: CoefficientLaw = field(default=GRAM_LAW)

    def __post_init__(self):
        if self.family == Family.FE and not self.T > 1:
            raise ValueError(f"Fourier extension needs T > 1, got {self.T}")
        if self.family == Family.AUGF and self.K < 1:
            raise ValueError(f"augmented Fourier needs K >= 1, got {self.K}")
        if self.family == Family.WLEG and not 0 < self.alpha < 1:
            raise ValueError(f"weighted Legendre needs 0 < alpha < 1, got {self.alpha}")

    @classmethod
    def fe(cls, T=2.0):
        return cls(Family.FE, T=T)

    @classmethod
    def augmented_fourier(cls, K):
        return cls(Family.AUGF, K=int(K))

    @classmethod
    def weighted_legendre(cls, alpha=0.5):
        return cls(Family.WLEG, alpha=alpha)

    @classmethod
    def augmented_orthonormal(cls, law=GRAM_LAW):
        return cls(Family.AUGON, law=law)

    @property
    def domain(self) -> Interval:
        if self.family == Family.FE:
            return Interval(-1.0 / self.T, 1.0 / self.T)
        return Interval(-1.0, 1.0)

    def domain_at(self, bits) -> tuple:
        """Domain endpoints at working precision."""
        if self.family != Family.FE:
            return _mp.real(-1, bits), _mp.real(1, bits)
        if is_double(bits):
            return -1.0 / self.T, 1.0 / self.T
        with working(bits):
            h = mpfr(1) / mpfr(self.T)
        return -h, h

    @property
    def lower_bound(self) -> float:
        """Lower frame bound A of the full frame."""
        return 1.0

    @property
    def upper_bound(self) -> float:
        """Upper frame bound B of the full frame."""
        if self.family == Family.FE:
            return 1.0
        if self.family == Family.WLEG:
            return 1.0 + 2.0 ** (2 * self.alpha)
        return 2.0

    @property
    def is_real(self) -> bool:
        """Whether every Gram entry is real."""
        return self.family != Family.AUGF

    @property
    def real_elements(self) -> bool:
        """Whether the elements themselves are real, so real targets have real coefficients."""
        return self.family in (Family.WLEG, Family.AUGON)

    @property
    def params(self) -> str:
        if self.family == Family.FE:
            return f"T={self.T:g}"
        if self.family == Family.AUGF:
            return f"K={self.K}"
        if self.family == Family.WLEG:
            return f"alpha={self.alpha:g}"
        return f"law={self.law.name}"

    def weight(self, t):
        """Weight ``(1 + t)**alpha`` (weighted Legendre only)."""
        if isinstance(t, np.ndarray) and t.dtype == object:
            a = mpfr(self.alpha)
            return np.array([(1 + x) ** a for x in t.flat], dtype=object).reshape(t.shape)
        return (1.0 + np.asarray(t, dtype=float)) ** self.alpha

    def check_admissible(self, N: int) -> None:
        if N < 1:
            raise AdmissibilityError(f"N must be positive, got {N}")
        if self.family in (Family.FE, Family.WLEG) and N % 2:
            raise AdmissibilityError(f"{self.family.value}: N must be even, got {N}")
        if self.family == Family.AUGF and (N < self.K or (N - self.K) % 2):
            raise AdmissibilityError(
                f"augf: N must satisfy N >= K and N - K even (K={self.K}), got {N}")

    def is_admissible(self, N: int) -> bool:
        try:
            self.check_admissible(N)
        except AdmissibilityError:
            return False
        return True


def _fourier_order(count: int):
    # -1, 0, -2, 1, -3, 2, ...: the first 2m entries are exactly -m..m-1
    out = []
    k = 1
    while len(out) < count:
        out.append(-k)
        if len(out) < count:
            out.append(k - 1)
        k += 1
    return out


def index_set(spec: FrameSpec, N: int) -> list[FrameIndex]:
    """The first ``N`` frame indices in nested order."""
    spec.check_admissible(N)
    if spec.family == Family.FE:
        return [FrameIndex("fourier", n) for n in _fourier_order(N)]
    if spec.family == Family.AUGF:
        return ([FrameIndex("legendre", k) for k in range(1, spec.K + 1)]
                + [FrameIndex("fourier", n) for n in _fourier_order(N - spec.K)])
    if spec.family == Family.WLEG:
        out = []
        for n in range(1, N // 2 + 1):
            out += [FrameIndex("legendre", n), FrameIndex("weighted", n)]
        return out
    return [EXTRA] + [FrameIndex("ortho", n) for n in range(1, N)]


def _check_index(spec: FrameSpec, idx: FrameIndex) -> None:
    legal = {
        Family.FE: ("fourier",),
        Family.AUGF: ("fourier", "legendre"),
        Family.WLEG: ("legendre", "weighted"),
        Family.AUGON: ("extra", "ortho"),
    }[spec.family]
    if idx.tag not in legal:
        raise ValueError(f"index {idx} is not part of the {spec.family.value} frame")
    if idx.tag in ("legendre", "weighted", "ortho") and idx.n < 1:
        raise ValueError(f"index {idx} must be positive")
    if spec.family == Family.AUGF and idx.tag == "legendre" and idx.n > spec.K:
        raise ValueError(f"index {idx} exceeds K={spec.K}")


def legendre_table(nmax: int, t):
    """Rows ``P_0(t) .. P_nmax(t)`` by the three-term recurrence."""
    t = np.asarray(t)
    rows = [t * 0 + 1]
    if nmax >= 1:
        rows.append(t * 1)
    for k in range(1, nmax):
        rows.append(((2 * k + 1) * t * rows[k] - k * rows[k - 1]) / (k + 1))
    return rows


def _sqrt(x, bits):
    if is_double(bits):
        return math.sqrt(x)
    with working(bits):
        return gmpy2.sqrt(mpfr(x))


def _is_mp(t) -> bool:
    return isinstance(t, np.ndarray) and t.dtype == object or type(t) is type(mpfr(0))


def evaluate(spec: FrameSpec, idx: FrameIndex, t, bits: int | None = None):
    """Value of frame element ``idx`` at ``t`` (scalar or array)."""
    _check_index(spec, idx)
    if spec.family == Family.AUGON:
        raise TypeError("augmented-orthonormal elements live in coefficient space only")
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=object if _is_mp(t) else float))
    if bits is None:
        bits = max((x.precision for x in tt.flat), default=53) if tt.dtype == object else _mp.DOUBLE
    a, b = spec.domain_at(bits)
    with working(bits):
        bad = [x for x in tt.flat if x < a or x > b]
    if bad:
        raise DomainError(f"t={float(bad[0])} outside the closed domain [{float(a)}, {float(b)}]")
    out = element_values(spec, [idx], tt, bits)[:, 0]
    return out[0] if scalar else out


def _exp_i(theta, bits):
    if is_double(bits):
        return np.exp(1j * theta)
    mpc_t = gmpy2.mpc
    with working(bits):
        return np.array([mpc_t(gmpy2.cos(x), gmpy2.sin(x)) for x in theta.flat],
                        dtype=object).reshape(theta.shape)


def element_values(spec: FrameSpec, indices, t, bits: int = _mp.DOUBLE) -> np.ndarray:
    """Matrix ``E[i, j] = phi_{indices[j]}(t[i])`` (no domain check)."""
    t = _mp.asarray(np.atleast_1d(t), bits)
    out = _mp.zeros((t.shape[0], len(indices)), bits, complex_=spec.family in (Family.FE, Family.AUGF))
    with working(bits):
        fourier = [(j, i.n) for j, i in enumerate(indices) if i.tag == "fourier"]
        if fourier:
            pi = _mp.pi(bits)
            s = 1 / _sqrt(2, bits)
            nmin = min(n for _, n in fourier)
            nmax = max(n for _, n in fourier)
            # powers of exp(i*pi*t) keep the mp path cheap
            base = _exp_i(pi * t, bits)
            start = _exp_i(pi * nmin * t, bits)
            cache = {nmin: start}
            cur = start
            for n in range(nmin + 1, nmax + 1):
                cur = cur * base
                cache[n] = cur
            for j, n in fourier:
                out[:, j] = s * cache[n]
        poly = [(j, i) for j, i in enumerate(indices) if i.tag in ("legendre", "weighted")]
        if poly:
            if spec.family == Family.AUGF:
                degs = {j: i.n for j, i in poly}
            else:
                degs = {j: i.n - 1 for j, i in poly}
            P = legendre_table(max(degs.values()), t)
            w = spec.weight(t) if spec.family == Family.WLEG else None
            for j, i in poly:
                d = degs[j]
                v = _sqrt(d + 0.5 if is_double(bits) else mpfr(2 * d + 1) / 2, bits) * P[d]
                if i.tag == "weighted":
                    v = v * w
                out[:, j] = v
    return out


def pair_inner_product(spec: FrameSpec, i: FrameIndex, j: FrameIndex, bits: int = _mp.DOUBLE):
    """``<phi_j, phi_i>`` in L2 of the frame domain (conjugate-linear in ``phi_i``)."""
    _check_index(spec, i)
    _check_index(spec, j)
    if is_double(bits) and spec.family in (Family.AUGF, Family.WLEG) and (i.tag, j.tag) != ("fourier", "fourier"):
        # quadrature-based entries: work with guard bits, round once
        with working(_mp.DOUBLE + GUARD_BITS):
            v = _pair(spec, i, j, _mp.DOUBLE + GUARD_BITS)
        return complex(v) if spec.family == Family.AUGF else float(v)
    with working(bits):
        v = _pair(spec, i, j, bits)
    return v


def _zero(bits):
    return 0.0 if is_double(bits) else mpfr(0)


def _one(bits):
    return 1.0 if is_double(bits) else mpfr(1)


def _pair(spec, i, j, bits):
    fam = spec.family
    if fam == Family.FE:
        k = j.n - i.n
        if is_double(bits):
            return 1.0 / spec.T if k == 0 else math.sin(math.pi * k / spec.T) / (math.pi * k)
        T = mpfr(spec.T)
        if k == 0:
            return 1 / T
        pi = gmpy2.const_pi()
        return gmpy2.sin(pi * k / T) / (pi * k)
    if fam == Family.AUGF:
        if i.tag == j.tag:
            return _one(bits) if i.n == j.n else _zero(bits)
        if j.tag == "legendre":
            return _legendre_fourier(j.n, i.n, bits)
        v = _legendre_fourier(i.n, j.n, bits)
        return v.conjugate()
    if fam == Family.WLEG:
        if i.tag == "legendre" and j.tag == "legendre":
            return _one(bits) if i.n == j.n else _zero(bits)
        beta = spec.alpha * (2 if i.tag == j.tag == "weighted" else 1)
        return _weighted_moment(i.n, j.n, beta, bits)
    # augon
    if i.tag == "extra" and j.tag == "extra":
        return law_inner(spec.law, spec.law, 1, bits)
    if i.tag == "ortho" and j.tag == "ortho":
        return _one(bits) if i.n == j.n else _zero(bits)
    n = j.n if j.tag == "ortho" else i.n
    return spec.law.coefficient(n, bits)


def cross_rule_size(k: int, n: int, bits: int) -> int:
    """Gauss-Legendre points for ``<psi_k, phi_n>``: exact on the polynomial, resolving the
    oscillation to ``2**-bits`` (the ``bits // 8`` margin matters above double precision)."""
    return max(2 * k, 4 * abs(n)) + 16 + bits // 8


def _legendre_fourier(k, n, bits):
    """``<psi_k, phi_n> = int psi_k(t) exp(-i*pi*n*t) / sqrt(2) dt`` on (-1, 1)."""
    rule = gauss_legendre(cross_rule_size(k, n, bits), bits)
    vals = element_values(FrameSpec(Family.AUGF, K=k),
                          [FrameIndex("legendre", k), FrameIndex("fourier", n)], rule.nodes, bits)
    with working(bits):
        return np.sum(rule.weights * vals[:, 0] * _mp.conj(vals[:, 1]))


def _weighted_moment(m, n, beta, bits):
    """``int (1+t)**beta p_m p_n dt`` with a Gauss-Jacobi rule exact for the polynomial part."""
    m, n = min(m, n), max(m, n)  # symmetric to the last bit
    rule = gauss_jacobi(math.ceil((m + n) / 2) + 1, 0, beta, bits)
    with working(bits):
        P = legendre_table(max(m, n) - 1, rule.nodes)
        cm = _sqrt(m - 0.5 if is_double(bits) else mpfr(2 * m - 1) / 2, bits)
        cn = _sqrt(n - 0.5 if is_double(bits) else mpfr(2 * n - 1) / 2, bits)
        return cm * cn * np.sum(rule.weights * P[m - 1] * P[n - 1])
