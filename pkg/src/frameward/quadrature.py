"""Gauss rules and adaptive composite integration.

Rules are computed by Newton iteration on the three-term recurrence, at
double precision with numpy or at extended precision with gmpy2, and are
cached per ``(kind, n, bits)``.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from typing import Callable

import gmpy2
import numpy as np
from gmpy2 import mpfr

from frameward import _mp
from frameward._mp import is_double, working

PANEL_ORDER = 24
MAX_PANELS = 2 ** 16
GRADE_LEVELS = 40
_NEWTON_CAP = 100


class QuadratureError(ArithmeticError):
    """Adaptive integration ran out of panels before meeting its tolerance."""

    def __init__(self, estimate, bound, tol, panels):
        self.estimate = estimate
        self.bound = bound
        self.tol = tol
        self.panels = panels
        super().__init__(
            f"adaptive quadrature did not converge: error bound {float(bound):.3e} "
            f"> tol {float(tol):.3e} after {panels} panels"
        )


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadRule:
    """Nodes in (-1, 1) (increasing) with positive weights."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: tuple
    count: int
    bits: int

    def integrate(self, values):
        return np.dot(self.weights, values)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    @property
    def length(self) -> float:
        return float(self.b) - float(self.a)


_cache: dict = {}
_cache_lock = threading.Lock()


def _cached(key, build):
    rule = _cache.get(key)
    if rule is None:
        rule = build()
        with _cache_lock:
            _cache.setdefault(key, rule)
            rule = _cache[key]
    return rule


def _legendre_and_derivative(n, x):
    # works elementwise for float arrays and mpfr object arrays
    p0 = x * 0 + 1
    p1 = x
    if n == 0:
        return p0, x * 0
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    dp = n * (x * p1 - p0) / (x * x - 1)
    return p1, dp


def gauss_legendre(n: int, bits: int = _mp.DOUBLE) -> QuadRule:
    """Gauss-Legendre rule with ``n`` nodes at ``bits`` of precision."""
    if n < 1:
        raise ValueError(f"rule size must be positive, got {n}")
    return _cached(("legendre", n, bits), lambda: _build_legendre(n, bits))


def _build_legendre(n, bits):
    half = (n + 1) // 2
    i = np.arange(1, half + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    x = _newton(lambda z: _legendre_and_derivative(n, z), x, n, _mp.DOUBLE, ("legendre",))
    if not is_double(bits):
        with working(bits):
            x = _newton(lambda z: _legendre_and_derivative(n, z),
                        _mp.asarray(x, bits), n, bits, ("legendre",))
    if n % 2 == 1:
        x[-1] = x[-1] * 0  # middle node is exactly zero
    with working(bits):
        _, dp = _legendre_and_derivative(n, x)
        w = 2 / ((1 - x * x) * dp * dp)
        nodes = np.concatenate([-x, x[::-1][n % 2:]])
        weights = np.concatenate([w, w[::-1][n % 2:]])
    return QuadRule(nodes, weights, ("legendre",), n, bits)


def _newton(pd, x, n, bits, kind):
    tol = 2.0 ** (-bits + 4)
    with working(bits):
        for _ in range(_NEWTON_CAP):
            p, dp = pd(x)
            dx = p / dp
            x = x - dx
            if max(abs(float(d)) for d in np.ravel(dx)) <= tol:
                return x
    raise ConvergenceError(f"Newton iteration for {kind} rule did not converge (n={n}, bits={bits})")


def _jacobi_and_derivative(n, a, b, x):
    p0 = x * 0 + 1
    if n == 0:
        return p0, x * 0
    p1 = ((a + b + 2) * x + (a - b)) / 2
    for k in range(1, n):
        s = 2 * k + a + b
        c1 = 2 * (k + 1) * (k + a + b + 1) * s
        c2 = (s + 1) * (a * a - b * b)
        c3 = (s + 1) * (s + 2) * s
        c4 = 2 * (k + a) * (k + b) * (s + 2)
        p0, p1 = p1, ((c2 + c3 * x) * p1 - c4 * p0) / c1
    s = 2 * n + a + b
    dp = (n * ((a - b) - s * x) * p1 + 2 * (n + a) * (n + b) * p0) / (s * (1 - x * x))
    return p1, dp


def gauss_jacobi(n: int, alpha, beta, bits: int = _mp.DOUBLE) -> QuadRule:
    """Gauss rule for the weight ``(1-t)**alpha * (1+t)**beta`` on (-1, 1)."""
    if n < 1:
        raise ValueError(f"rule size must be positive, got {n}")
    if alpha <= -1 or beta <= -1:
        raise ValueError("Jacobi parameters must exceed -1")
    key = ("jacobi", n, str(alpha), str(beta), bits)
    return _cached(key, lambda: _build_jacobi(n, alpha, beta, bits))


def _build_jacobi(n, alpha, beta, bits):
    # Golub-Welsch at double only seeds Newton; accuracy comes from the recurrence.
    fa, fb = float(alpha), float(beta)
    k = np.arange(n, dtype=float)
    s = 2 * k + fa + fb
    with np.errstate(invalid="ignore", divide="ignore"):
        diag = np.where(s * (s + 2) != 0, (fb ** 2 - fa ** 2) / (s * (s + 2)), (fb - fa) / (fa + fb + 2))
        kk = k[1:]
        ss = s[1:]
        off = np.sqrt(4 * kk * (kk + fa) * (kk + fb) * (kk + fa + fb) / (ss ** 2 * (ss + 1) * (ss - 1)))
    x0 = np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)) if n > 1 else diag
    x0 = np.sort(np.asarray(x0, dtype=float))

    def pd(z, a=alpha, b=beta):
        return _jacobi_and_derivative(n, a, b, z)

    if is_double(bits):
        x = _newton(lambda z: _jacobi_and_derivative(n, fa, fb, z), x0, n, bits, ("jacobi", fa, fb))
        logc = ((fa + fb + 1) * math.log(2) + math.lgamma(n + fa + 1) + math.lgamma(n + fb + 1)
                - math.lgamma(n + fa + fb + 1) - math.lgamma(n + 1))
        _, dp = _jacobi_and_derivative(n, fa, fb, x)
        w = math.exp(logc) / ((1 - x * x) * dp * dp)
        order = np.argsort(x)
        return QuadRule(x[order], w[order], ("jacobi", fa, fb), n, bits)
    x0 = _newton(lambda z: _jacobi_and_derivative(n, fa, fb, z), x0, n, _mp.DOUBLE, ("jacobi", fa, fb))
    with working(bits):
        a = mpfr(alpha) if not isinstance(alpha, str) else mpfr(alpha)
        b = mpfr(beta)
        x = _newton(lambda z: _jacobi_and_derivative(n, a, b, z), _mp.asarray(x0, bits), n, bits,
                    ("jacobi", fa, fb))
        logc = ((a + b + 1) * gmpy2.log(mpfr(2)) + gmpy2.lgamma(n + a + 1)[0]
                + gmpy2.lgamma(n + b + 1)[0] - gmpy2.lgamma(n + a + b + 1)[0]
                - gmpy2.lgamma(mpfr(n + 1))[0])
        _, dp = _jacobi_and_derivative(n, a, b, x)
        w = gmpy2.exp(logc) / ((1 - x * x) * dp * dp)
    order = np.argsort([float(v) for v in x])
    return QuadRule(x[order], w[order], ("jacobi", fa, fb), n, bits)


def panel_order(bits: int) -> int:
    """Per-panel Gauss order: 24 at double, growing with the mantissa length."""
    return PANEL_ORDER * max(1, math.ceil(bits / _mp.DOUBLE))


def _panel(fun, a, b, rule: QuadRule, bits):
    with working(bits):
        half = (b - a) / 2
        mid = (a + b) / 2
        t = mid + half * rule.nodes
        vals = fun(t)
        return half * np.tensordot(rule.weights, vals, axes=(0, 0)), half * np.tensordot(
            rule.weights, _mp.absval(np.asarray(vals)), axes=(0, 0))


def _size(v) -> float:
    a = np.asarray(v)
    if a.ndim == 0:
        return abs(complex(a.item())) if a.dtype == object else float(abs(a))
    return float(np.max(np.abs(_mp.to_float(a)))) if a.size else 0.0


def adaptive_quad(fun: Callable, a, b, tol, bits: int = _mp.DOUBLE, *,
                  rtol: float = 0.0, graded_left: bool = False, order: int | None = None,
                  max_panels: int = MAX_PANELS):
    """Globally adaptive composite Gauss-Legendre integration of ``fun`` on [a, b].

    ``fun`` maps an array of nodes to an array of values whose leading axis
    matches the nodes; trailing axes are integrated componentwise and the
    error is measured in the max norm. Each panel's error is estimated by
    comparing ``order`` and ``2*order`` point rules. Returns
    ``(value, error_bound)``.
    """
    n = order or panel_order(bits)
    lo = gauss_legendre(n, bits)
    hi = gauss_legendre(2 * n, bits)
    roundoff = 64 * _mp.eps(bits)
    with working(bits):
        a = _mp.real(a, bits)
        b = _mp.real(b, bits)
        edges = [a, b]
        if graded_left:
            # geometric grading toward the left endpoint, ratio 1/2
            edges = [a + (b - a) * _mp.real(2.0 ** -k, bits) for k in range(GRADE_LEVELS, 0, -1)]
            edges = [a] + edges + [b]
        heap = []
        total = None
        counter = 0
        for x0, x1 in zip(edges[:-1], edges[1:]):
            counter += 1
            item = _make_item(fun, x0, x1, lo, hi, bits, counter)
            heapq.heappush(heap, item)
            total = item[4] if total is None else total + item[4]
        while True:
            err = sum(it[5] for it in heap)
            scale = sum(it[6] for it in heap)
            target = max(float(tol), rtol * _size(total))
            if err <= target or err <= roundoff * scale:
                return total, err
            if len(heap) >= max_panels:
                raise QuadratureError(total, err, tol, len(heap))
            worst = heapq.heappop(heap)
            x0, x1 = worst[2], worst[3]
            xm = (x0 + x1) / 2
            total = total - worst[4]
            for y0, y1 in ((x0, xm), (xm, x1)):
                counter += 1
                item = _make_item(fun, y0, y1, lo, hi, bits, counter)
                heapq.heappush(heap, item)
                total = total + item[4]


def _make_item(fun, x0, x1, lo, hi, bits, counter):
    q_lo, _ = _panel(fun, x0, x1, lo, bits)
    q_hi, q_abs = _panel(fun, x0, x1, hi, bits)
    err = _size(q_hi - q_lo)
    return (-err, counter, x0, x1, q_hi, err, _size(q_abs))


def integrate_against(f, phi, interval: Interval, tol: float, bits: int = _mp.DOUBLE, *,
                      graded_left: bool = False):
    """Adaptive estimate of the integral of ``f(t) * conj(phi(t))`` over ``interval``.

    ``phi`` may return a 2-D array (nodes x elements) to integrate against
    several functions at once.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    def integrand(t):
        fv = np.asarray(f(t))
        pv = np.asarray(phi(t))
        if pv.ndim == 2 and fv.ndim == 1:
            fv = fv[:, None]
        return fv * _mp.conj(pv)

    value, _ = adaptive_quad(integrand, interval.a, interval.b, tol, bits, graded_left=graded_left)
    return value


def l2_norm(g, interval: Interval, tol: float, bits: int = _mp.DOUBLE, *, graded_left: bool = False,
            rtol: float = 0.0):
    """L2 norm of ``g`` over ``interval`` to accuracy ``max(tol, rtol * norm)``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    def sq(t):
        v = np.asarray(g(t))
        if v.dtype == object:
            return np.array([(x * x.conjugate()).real if hasattr(x, "imag") and not isinstance(x, type(mpfr(0))) else x * x
                             for x in v], dtype=object)
        return np.abs(v) ** 2

    rough, _ = adaptive_quad(sq, interval.a, interval.b, 0.0, bits, rtol=1e-3, graded_left=graded_left)
    r = max(_size(rough), 0.0)
    tol = max(tol, rtol * math.sqrt(r))
    itol = max(tol * tol, 2 * tol * math.sqrt(r))
    value, _ = adaptive_quad(sq, interval.a, interval.b, itol, bits, graded_left=graded_left)
    if is_double(bits):
        return math.sqrt(max(float(np.real(value)), 0.0))
    with working(bits):
        v = value.real if hasattr(value, "imag") and not isinstance(value, type(mpfr(0))) else value
        return gmpy2.sqrt(max(v, mpfr(0)))
