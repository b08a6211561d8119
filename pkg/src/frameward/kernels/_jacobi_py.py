"""Pure-Python Jacobi kernels (fallback for the compiled core).

Handles float64, complex128 and gmpy2 object arrays with the same code:
rotations are applied as whole row/column updates so numpy does the inner
loops, even for object arrays.
"""

from __future__ import annotations

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from frameward._mp import is_double, working

_MPC = type(mpc(0))


def _abs(x):
    return abs(x)


def _conj(x):
    return x.conjugate() if isinstance(x, (complex, np.complexfloating, _MPC)) else x


def _sqrt(x, bits):
    return np.sqrt(x) if is_double(bits) else gmpy2.sqrt(x)


def _copy(A, bits):
    if is_double(bits):
        return np.array(A, copy=True)
    with working(bits):
        out = np.empty(A.shape, dtype=object)
        for i, v in np.ndenumerate(A):
            out[i] = mpc(v) if type(v) is _MPC else mpfr(v)
    return out


def _identity(n, bits, like):
    if is_double(bits):
        return np.eye(n, dtype=like.dtype)
    with working(bits):
        out = np.empty((n, n), dtype=object)
        out.fill(mpfr(0))
        for i in range(n):
            out[i, i] = mpfr(1)
    return out


def _rotation(app, aqq, apq, bits):
    """(c, s*e, conj(s*e), t*|apq|) for the 2x2 Hermitian block."""
    r = _abs(apq)
    e = apq / r
    theta = (aqq - app) / (2 * r)
    if theta >= 0:
        t = 1 / (theta + _sqrt(1 + theta * theta, bits))
    else:
        t = -1 / (-theta + _sqrt(1 + theta * theta, bits))
    c = 1 / _sqrt(1 + t * t, bits)
    s = t * c
    se = s * e
    return c, se, _conj(se), t * r


def eigh_jacobi(A, bits, vectors=True, max_sweeps=40):
    """Hermitian eigen-decomposition ending in cyclic two-sided Jacobi sweeps.

    Real matrices above double precision are first reduced by Householder
    tridiagonalization and implicit QL; the Jacobi sweeps then run on
    ``Z^T A Z`` until every off-diagonal entry is below the threshold.
    Returns ``(diag, V, sweeps, off)`` where ``diag`` holds the (unsorted)
    eigenvalues and ``off`` is the largest remaining off-diagonal magnitude.
    """
    n = A.shape[0]
    with working(bits):
        A = _copy(A, bits)
        complex_ = any(type(x) is _MPC for x in A.flat) if A.dtype == object else np.iscomplexobj(A)
        if not is_double(bits) and not complex_ and n > 1:
            thresh = gmpy2.mul_2exp(max(abs(x) for x in A.flat), -bits + 8)
            d, Z = _tridiagonal_ql(A, bits, vectors, thresh)
            if not vectors:
                return d, None, 0, 0.0
            B = np.dot(Z.T, np.dot(A, Z))
            for i in range(n):
                for j in range(i + 1, n):
                    B[j, i] = B[i, j]
            return _sweeps(B, Z, bits, True, max_sweeps, False)
        V = _identity(n, bits, A) if vectors else None
        return _sweeps(A, V, bits, vectors, max_sweeps, complex_)


def _sweeps(A, V, bits, vectors, max_sweeps, complex_):
    n = A.shape[0]
    tol = 2.0 ** (-bits + 3)
    scale = max(float(_abs(x)) for x in A.flat) if n else 0.0
    floor = 2.0 ** (-bits + 2) * scale
    if not is_double(bits):
        # absolute stopping level 2^(8-bits) * sigma_1 (|a_ij| <= sigma_1)
        floor = gmpy2.mul_2exp(max((_abs(x) for x in A.flat), default=mpfr(0)), -bits + 8)
        tol = 0
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = _abs(apq)
                if mag <= floor or (tol and mag <= tol * _sqrt(_abs(A[p, p] * A[q, q]), bits)):
                    continue
                rotated = True
                app = A[p, p].real if complex_ else A[p, p]
                aqq = A[q, q].real if complex_ else A[q, q]
                c, se, sec, tr = _rotation(app, aqq, apq, bits)
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = c * colp - sec * colq
                A[:, q] = se * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = c * rowp - se * rowq
                A[q, :] = sec * rowp + c * rowq
                A[p, p] = app - tr
                A[q, q] = aqq + tr
                A[p, q] = A[q, p] = A[p, p] * 0
                if vectors:
                    vp = V[:, p].copy()
                    vq = V[:, q].copy()
                    V[:, p] = c * vp - sec * vq
                    V[:, q] = se * vp + c * vq
        if not rotated:
            break
    else:
        sweep = max_sweeps + 1
    off = max((float(_abs(A[i, j])) for i in range(n) for j in range(n) if i != j), default=0.0)
    diag = np.array([A[i, i].real if complex_ else A[i, i] for i in range(n)],
                    dtype=float if is_double(bits) else object)
    return diag, V, sweep, off


def _tridiagonal_ql(A, bits, vectors, thresh, max_iter=60):
    """Eigenvalues (and vectors) of a real symmetric mp matrix via Householder + implicit QL."""
    n = A.shape[0]
    T = A.copy()
    Z = _identity(n, bits, A)
    zero = mpfr(0)
    for k in range(n - 2):
        x = T[k + 1:, k].copy()
        sigma = gmpy2.sqrt(sum((v * v for v in x), zero))
        if sigma == 0:
            continue
        alpha = -sigma if x[0] >= 0 else sigma
        v = x
        v[0] = v[0] - alpha
        beta = sum((e * e for e in v), zero)
        if beta == 0:
            continue
        sub = T[k + 1:, k + 1:]
        p = np.dot(sub, v) * (2 / beta)
        K = np.dot(v, p) / beta
        w = p - K * v
        T[k + 1:, k + 1:] = sub - np.outer(v, w) - np.outer(w, v)
        T[k + 1:, k] = zero
        T[k, k + 1:] = zero
        T[k + 1, k] = T[k, k + 1] = alpha
        if vectors:
            Zs = Z[:, k + 1:]
            Z[:, k + 1:] = Zs - np.outer(np.dot(Zs, v) * (2 / beta), v)
    d = np.array([T[i, i] for i in range(n)], dtype=object)
    e = np.array([T[i + 1, i] for i in range(n - 1)] + [zero], dtype=object)
    eps = gmpy2.mul_2exp(mpfr(1), -bits)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = (abs(d[m]) + abs(d[m + 1])) * eps
                if abs(e[m]) <= dd or abs(e[m]) <= thresh:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise ArithmeticError("tridiagonal QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2 * e[l])
            r = gmpy2.hypot(g, mpfr(1))
            g = d[m] - d[l] + e[l] / (g - r if g < 0 else g + r)
            s = c = mpfr(1)
            p = zero
            i = m - 1
            broke = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = gmpy2.hypot(f, g)
                e[i + 1] = r
                if r == 0:
                    d[i + 1] -= p
                    e[m] = zero
                    broke = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if vectors:
                    zi = Z[:, i].copy()
                    zj = Z[:, i + 1].copy()
                    Z[:, i] = c * zi - s * zj
                    Z[:, i + 1] = s * zi + c * zj
                i -= 1
            if broke:
                continue
            d[l] -= p
            e[l] = g
            e[m] = zero
    return d, Z


def svd_jacobi(G, bits, max_sweeps=40):
    """One-sided (Hestenes) Jacobi SVD of an M x N matrix, M >= N.

    Returns ``(sigma, U, V, sweeps, off)``; ``off`` is the largest remaining
    normalized column inner product.
    """
    m, n = G.shape
    with working(bits):
        W = _copy(G, bits)
        V = _identity(n, bits, W)
        # inner products of length m carry ~sqrt(m) ulps of rounding
        tol = 2.0 ** (-bits + 3) * max(1.0, np.sqrt(m))

        def dot(x, y):
            return np.sum(np.conj(x) * y) if is_double(bits) else np.sum(
                np.array([_conj(v) for v in x], dtype=object) * y)

        def nrm2(x):
            if is_double(bits):
                return float(np.real(np.vdot(x, x)))
            return sum(((v * _conj(v)).real if type(v) is _MPC else v * v for v in x), mpfr(0))

        off = 0.0
        for sweep in range(1, max_sweeps + 1):
            rotated = False
            off = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    alpha = nrm2(W[:, p])
                    beta = nrm2(W[:, q])
                    gamma = dot(W[:, p], W[:, q])
                    mag = _abs(gamma)
                    denom = _sqrt(alpha * beta, bits)
                    if mag == 0 or mag <= tol * denom:
                        continue
                    off = max(off, float(mag / denom))
                    rotated = True
                    c, se, sec, _ = _rotation(alpha, beta, gamma, bits)
                    wp = W[:, p].copy()
                    wq = W[:, q].copy()
                    W[:, p] = c * wp - sec * wq
                    W[:, q] = se * wp + c * wq
                    vp = V[:, p].copy()
                    vq = V[:, q].copy()
                    V[:, p] = c * vp - sec * vq
                    V[:, q] = se * vp + c * vq
            if not rotated:
                break
        else:
            sweep = max_sweeps + 1
        sigma = np.array([_sqrt(nrm2(W[:, j]), bits) for j in range(n)],
                         dtype=float if is_double(bits) else object)
        U = W.copy()
        for j in range(n):
            if sigma[j] != 0:
                U[:, j] = W[:, j] / sigma[j]
    return sigma, U, V, sweep, off
