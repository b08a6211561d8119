# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Jacobi kernels.

Two-sided cyclic Jacobi for Hermitian matrices and one-sided (Hestenes)
Jacobi SVD, for float64, complex128 and real MPFR matrices of any
precision. Complex matrices above double precision are handed to the
pure-Python kernels. Signatures and return values match ``_jacobi_py``.
"""

from libc.math cimport fabs, sqrt
from libc.stdlib cimport malloc, free

import numpy as np
import gmpy2

from frameward.kernels import _jacobi_py

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex conj(double complex)

cdef extern from "mpfr.h" nogil:
    ctypedef long mpfr_prec_t
    ctypedef long mpfr_exp_t
    ctypedef int mpfr_sign_t
    ctypedef struct __mpfr_struct:
        mpfr_prec_t _mpfr_prec
        mpfr_sign_t _mpfr_sign
        mpfr_exp_t _mpfr_exp
        void *_mpfr_d
    ctypedef __mpfr_struct *mpfr_ptr
    ctypedef enum mpfr_rnd_t:
        MPFR_RNDN
    void mpfr_init2(mpfr_ptr, mpfr_prec_t)
    void mpfr_clear(mpfr_ptr)
    int mpfr_set(mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_set_ui(mpfr_ptr, unsigned long, mpfr_rnd_t)
    int mpfr_set_si(mpfr_ptr, long, mpfr_rnd_t)
    int mpfr_set_str(mpfr_ptr, const char *, int, mpfr_rnd_t)
    char *mpfr_get_str(char *, mpfr_exp_t *, int, size_t, mpfr_ptr, mpfr_rnd_t)
    void mpfr_free_str(char *)
    double mpfr_get_d(mpfr_ptr, mpfr_rnd_t)
    int mpfr_add(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_sub(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_mul(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_div(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_fma(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_fms(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_sqr(mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_sqrt(mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_hypot(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_abs(mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_neg(mpfr_ptr, mpfr_ptr, mpfr_rnd_t)
    int mpfr_ui_div(mpfr_ptr, unsigned long, mpfr_ptr, mpfr_rnd_t)
    int mpfr_add_ui(mpfr_ptr, mpfr_ptr, unsigned long, mpfr_rnd_t)
    int mpfr_mul_2si(mpfr_ptr, mpfr_ptr, long, mpfr_rnd_t)
    int mpfr_cmp(mpfr_ptr, mpfr_ptr)
    int mpfr_cmpabs(mpfr_ptr, mpfr_ptr)
    int mpfr_sgn(mpfr_ptr)
    int mpfr_zero_p(mpfr_ptr)

ctypedef fused scalar:
    double
    double complex


cdef inline double _mag(scalar x) noexcept nogil:
    if scalar is double:
        return fabs(x)
    else:
        return cabs(x)


cdef inline scalar _cj(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return conj(x)


cdef inline double _re(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.real


cdef int _eigh_fixed(scalar[:, ::1] A, scalar[:, ::1] V, bint vectors, int max_sweeps,
                     double tol, double floor) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef bint rotated
    cdef double r, theta, t, c, app, aqq
    cdef scalar apq, e, se, sec, x, y
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = _mag(apq)
                app = _re(A[p, p])
                aqq = _re(A[q, q])
                if r <= floor or r <= tol * sqrt(fabs(app * aqq)):
                    continue
                rotated = True
                e = apq / r
                theta = (aqq - app) / (2.0 * r)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                se = (t * c) * e
                sec = _cj(se)
                for k in range(n):
                    if k == p or k == q:
                        continue
                    x = A[k, p]
                    y = A[k, q]
                    A[k, p] = c * x - sec * y
                    A[k, q] = se * x + c * y
                    A[p, k] = _cj(A[k, p])
                    A[q, k] = _cj(A[k, q])
                A[p, p] = app - t * r
                A[q, q] = aqq + t * r
                A[p, q] = 0
                A[q, p] = 0
                if vectors:
                    for k in range(n):
                        x = V[k, p]
                        y = V[k, q]
                        V[k, p] = c * x - sec * y
                        V[k, q] = se * x + c * y
        if not rotated:
            return sweep
    return max_sweeps + 1


cdef int _svd_fixed(scalar[:, ::1] W, scalar[:, ::1] V, int max_sweeps, double tol) noexcept nogil:
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef bint rotated
    cdef double alpha, beta, r, theta, t, c
    cdef scalar gamma, e, se, sec, x, y
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0
                for k in range(m):
                    alpha = alpha + _re(_cj(W[k, p]) * W[k, p])
                    beta = beta + _re(_cj(W[k, q]) * W[k, q])
                    gamma = gamma + _cj(W[k, p]) * W[k, q]
                r = _mag(gamma)
                if r == 0 or r <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                e = gamma / r
                theta = (beta - alpha) / (2.0 * r)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                se = (t * c) * e
                sec = _cj(se)
                for k in range(m):
                    x = W[k, p]
                    y = W[k, q]
                    W[k, p] = c * x - sec * y
                    W[k, q] = se * x + c * y
                for k in range(n):
                    x = V[k, p]
                    y = V[k, q]
                    V[k, p] = c * x - sec * y
                    V[k, q] = se * x + c * y
        if not rotated:
            return sweep
    return max_sweeps + 1


# ---------------------------------------------------------------- MPFR --

_MPFR = type(gmpy2.mpfr(0))


cdef class _MPMatrix:
    """Row-major block of initialized mpfr_t values."""

    cdef __mpfr_struct *data
    cdef Py_ssize_t rows, cols
    cdef mpfr_prec_t prec

    def __cinit__(self, Py_ssize_t rows, Py_ssize_t cols, mpfr_prec_t prec):
        cdef Py_ssize_t i
        self.rows = rows
        self.cols = cols
        self.prec = prec
        self.data = <__mpfr_struct *> malloc(max(rows * cols, 1) * sizeof(__mpfr_struct))
        if self.data == NULL:
            raise MemoryError()
        for i in range(rows * cols):
            mpfr_init2(&self.data[i], prec)
            mpfr_set_ui(&self.data[i], 0, MPFR_RNDN)

    def __dealloc__(self):
        cdef Py_ssize_t i
        if self.data != NULL:
            for i in range(self.rows * self.cols):
                mpfr_clear(&self.data[i])
            free(self.data)

    cdef inline mpfr_ptr at(self, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
        return &self.data[i * self.cols + j]

    def load(self, A):
        cdef Py_ssize_t i, j
        cdef bytes s
        ctx = gmpy2.context(gmpy2.get_context(), precision=self.prec)
        for i in range(self.rows):
            for j in range(self.cols):
                v = A[i, j]
                if type(v) is not _MPFR:
                    with ctx:
                        v = gmpy2.mpfr(v)
                mant, ex = v.as_mantissa_exp()
                s = format(int(mant), "x").encode()
                mpfr_set_str(self.at(i, j), s, 16, MPFR_RNDN)
                mpfr_mul_2si(self.at(i, j), self.at(i, j), int(ex), MPFR_RNDN)

    def identity(self):
        cdef Py_ssize_t i
        for i in range(min(self.rows, self.cols)):
            mpfr_set_ui(self.at(i, i), 1, MPFR_RNDN)

    cdef object get(self, Py_ssize_t i, Py_ssize_t j):
        return _to_gmpy(self.at(i, j))

    def dump(self):
        cdef Py_ssize_t i, j
        out = np.empty((self.rows, self.cols), dtype=object)
        for i in range(self.rows):
            for j in range(self.cols):
                out[i, j] = _to_gmpy(self.at(i, j))
        return out


cdef object _to_gmpy(mpfr_ptr x):
    cdef mpfr_exp_t e = 0
    cdef char *s
    cdef long prec = x._mpfr_prec
    if mpfr_zero_p(x):
        return gmpy2.mpfr(0, prec)
    s = mpfr_get_str(NULL, &e, 16, 0, x, MPFR_RNDN)
    try:
        digits = (<bytes> s).decode()
    finally:
        mpfr_free_str(s)
    nd = len(digits) - (1 if digits[0] == "-" else 0)
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        return gmpy2.mul_2exp(gmpy2.mpfr(int(digits, 16)), 4 * (e - nd))


cdef class _Scratch:
    cdef __mpfr_struct tmp[12]
    cdef int count

    def __cinit__(self, mpfr_prec_t prec):
        cdef int i
        self.count = 12
        for i in range(12):
            mpfr_init2(&self.tmp[i], prec)

    def __dealloc__(self):
        cdef int i
        for i in range(self.count):
            mpfr_clear(&self.tmp[i])


cdef inline mpfr_ptr _up(_MPMatrix A, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    # symmetric storage: only the upper triangle is kept current
    if i <= j:
        return A.at(i, j)
    return A.at(j, i)


cdef inline void _rot(mpfr_ptr x, mpfr_ptr y, mpfr_ptr c, mpfr_ptr s,
                      mpfr_ptr u, mpfr_ptr w) noexcept nogil:
    # (x, y) <- (c x - s y, s x + c y)
    mpfr_mul(u, s, y, MPFR_RNDN)
    mpfr_mul(w, s, x, MPFR_RNDN)
    mpfr_fms(x, c, x, u, MPFR_RNDN)
    mpfr_fma(y, c, y, w, MPFR_RNDN)


cdef int _eigh_mpfr(_MPMatrix A, _MPMatrix V, bint vectors, int max_sweeps,
                    _Scratch S, mpfr_ptr thresh):
    cdef Py_ssize_t n = A.rows
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef bint rotated
    cdef mpfr_ptr theta = &S.tmp[1]
    cdef mpfr_ptr t = &S.tmp[2]
    cdef mpfr_ptr c = &S.tmp[3]
    cdef mpfr_ptr s = &S.tmp[4]
    cdef mpfr_ptr u = &S.tmp[5]
    cdef mpfr_ptr w = &S.tmp[6]
    cdef mpfr_ptr tr = &S.tmp[9]
    with nogil:
        for sweep in range(1, max_sweeps + 1):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    if mpfr_cmpabs(A.at(p, q), thresh) <= 0:
                        continue
                    rotated = True
                    # theta = (a_qq - a_pp) / (2 a_pq)
                    mpfr_sub(theta, A.at(q, q), A.at(p, p), MPFR_RNDN)
                    mpfr_div(theta, theta, A.at(p, q), MPFR_RNDN)
                    mpfr_mul_2si(theta, theta, -1, MPFR_RNDN)
                    mpfr_sqr(u, theta, MPFR_RNDN)
                    mpfr_add_ui(u, u, 1, MPFR_RNDN)
                    mpfr_sqrt(u, u, MPFR_RNDN)
                    mpfr_abs(w, theta, MPFR_RNDN)
                    mpfr_add(u, u, w, MPFR_RNDN)
                    mpfr_ui_div(t, 1, u, MPFR_RNDN)
                    if mpfr_sgn(theta) < 0:
                        mpfr_neg(t, t, MPFR_RNDN)
                    mpfr_sqr(u, t, MPFR_RNDN)
                    mpfr_add_ui(u, u, 1, MPFR_RNDN)
                    mpfr_sqrt(u, u, MPFR_RNDN)
                    mpfr_ui_div(c, 1, u, MPFR_RNDN)
                    mpfr_mul(s, t, c, MPFR_RNDN)
                    mpfr_mul(tr, t, A.at(p, q), MPFR_RNDN)
                    for k in range(n):
                        if k == p or k == q:
                            continue
                        _rot(_up(A, k, p), _up(A, k, q), c, s, u, w)
                    mpfr_sub(A.at(p, p), A.at(p, p), tr, MPFR_RNDN)
                    mpfr_add(A.at(q, q), A.at(q, q), tr, MPFR_RNDN)
                    mpfr_set_ui(A.at(p, q), 0, MPFR_RNDN)
                    if vectors:
                        for k in range(n):
                            _rot(V.at(k, p), V.at(k, q), c, s, u, w)
            if not rotated:
                return sweep
    return max_sweeps + 1


cdef void _tred2(_MPMatrix Z, __mpfr_struct *D, __mpfr_struct *E, bint vec, _Scratch S) noexcept nogil:
    # Householder reduction to tridiagonal form; Z holds the accumulated
    # orthogonal transform on exit when vec is set
    cdef Py_ssize_t n = Z.rows
    cdef Py_ssize_t i, j, k, l
    cdef mpfr_ptr scale = &S.tmp[0]
    cdef mpfr_ptr h = &S.tmp[1]
    cdef mpfr_ptr f = &S.tmp[2]
    cdef mpfr_ptr g = &S.tmp[3]
    cdef mpfr_ptr hh = &S.tmp[4]
    cdef mpfr_ptr t = &S.tmp[5]
    for i in range(n - 1, 0, -1):
        l = i - 1
        mpfr_set_ui(h, 0, MPFR_RNDN)
        mpfr_set_ui(scale, 0, MPFR_RNDN)
        if l > 0:
            for k in range(i):
                mpfr_abs(t, Z.at(i, k), MPFR_RNDN)
                mpfr_add(scale, scale, t, MPFR_RNDN)
            if mpfr_zero_p(scale):
                mpfr_set(&E[i], Z.at(i, l), MPFR_RNDN)
            else:
                for k in range(i):
                    mpfr_div(Z.at(i, k), Z.at(i, k), scale, MPFR_RNDN)
                    mpfr_fma(h, Z.at(i, k), Z.at(i, k), h, MPFR_RNDN)
                mpfr_set(f, Z.at(i, l), MPFR_RNDN)
                mpfr_sqrt(g, h, MPFR_RNDN)
                if mpfr_sgn(f) >= 0:
                    mpfr_neg(g, g, MPFR_RNDN)
                mpfr_mul(&E[i], scale, g, MPFR_RNDN)
                mpfr_mul(t, f, g, MPFR_RNDN)
                mpfr_sub(h, h, t, MPFR_RNDN)
                mpfr_sub(Z.at(i, l), f, g, MPFR_RNDN)
                mpfr_set_ui(f, 0, MPFR_RNDN)
                for j in range(i):
                    if vec:
                        mpfr_div(Z.at(j, i), Z.at(i, j), h, MPFR_RNDN)
                    mpfr_set_ui(g, 0, MPFR_RNDN)
                    for k in range(j + 1):
                        mpfr_fma(g, Z.at(j, k), Z.at(i, k), g, MPFR_RNDN)
                    for k in range(j + 1, i):
                        mpfr_fma(g, Z.at(k, j), Z.at(i, k), g, MPFR_RNDN)
                    mpfr_div(&E[j], g, h, MPFR_RNDN)
                    mpfr_fma(f, &E[j], Z.at(i, j), f, MPFR_RNDN)
                mpfr_add(t, h, h, MPFR_RNDN)
                mpfr_div(hh, f, t, MPFR_RNDN)
                for j in range(i):
                    mpfr_set(f, Z.at(i, j), MPFR_RNDN)
                    mpfr_mul(t, hh, f, MPFR_RNDN)
                    mpfr_sub(&E[j], &E[j], t, MPFR_RNDN)
                    mpfr_set(g, &E[j], MPFR_RNDN)
                    for k in range(j + 1):
                        mpfr_mul(t, f, &E[k], MPFR_RNDN)
                        mpfr_fma(t, g, Z.at(i, k), t, MPFR_RNDN)
                        mpfr_sub(Z.at(j, k), Z.at(j, k), t, MPFR_RNDN)
        else:
            mpfr_set(&E[i], Z.at(i, l), MPFR_RNDN)
        mpfr_set(&D[i], h, MPFR_RNDN)
    if vec:
        mpfr_set_ui(&D[0], 0, MPFR_RNDN)
    mpfr_set_ui(&E[0], 0, MPFR_RNDN)
    for i in range(n):
        if vec:
            if not mpfr_zero_p(&D[i]):
                for j in range(i):
                    mpfr_set_ui(g, 0, MPFR_RNDN)
                    for k in range(i):
                        mpfr_fma(g, Z.at(i, k), Z.at(k, j), g, MPFR_RNDN)
                    for k in range(i):
                        mpfr_mul(t, g, Z.at(k, i), MPFR_RNDN)
                        mpfr_sub(Z.at(k, j), Z.at(k, j), t, MPFR_RNDN)
            mpfr_set(&D[i], Z.at(i, i), MPFR_RNDN)
            mpfr_set_ui(Z.at(i, i), 1, MPFR_RNDN)
            for j in range(i):
                mpfr_set_ui(Z.at(j, i), 0, MPFR_RNDN)
                mpfr_set_ui(Z.at(i, j), 0, MPFR_RNDN)
        else:
            mpfr_set(&D[i], Z.at(i, i), MPFR_RNDN)


cdef int _tql(_MPMatrix Z, __mpfr_struct *D, __mpfr_struct *E, bint vec, long bits,
              mpfr_ptr floor, _Scratch S) noexcept nogil:
    # implicit QL with Wilkinson-type shifts on the tridiagonal (D, E);
    # returns -1 if some eigenvalue needs more than 60 iterations
    cdef Py_ssize_t n = Z.rows
    cdef Py_ssize_t i, k, l, m
    cdef int it
    cdef bint broke
    cdef mpfr_ptr f = &S.tmp[0]
    cdef mpfr_ptr g = &S.tmp[1]
    cdef mpfr_ptr r = &S.tmp[2]
    cdef mpfr_ptr s = &S.tmp[3]
    cdef mpfr_ptr c = &S.tmp[4]
    cdef mpfr_ptr p = &S.tmp[5]
    cdef mpfr_ptr b = &S.tmp[6]
    cdef mpfr_ptr dd = &S.tmp[7]
    cdef mpfr_ptr t = &S.tmp[8]
    cdef mpfr_ptr u = &S.tmp[9]
    cdef mpfr_ptr w = &S.tmp[10]
    for i in range(1, n):
        mpfr_set(&E[i - 1], &E[i], MPFR_RNDN)
    mpfr_set_ui(&E[n - 1], 0, MPFR_RNDN)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                mpfr_abs(dd, &D[m], MPFR_RNDN)
                mpfr_abs(t, &D[m + 1], MPFR_RNDN)
                mpfr_add(dd, dd, t, MPFR_RNDN)
                mpfr_mul_2si(dd, dd, -bits, MPFR_RNDN)
                if mpfr_cmpabs(&E[m], dd) <= 0 or mpfr_cmpabs(&E[m], floor) <= 0:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return -1
            # g = (d[l+1] - d[l]) / (2 e[l]); shift d[m] - d[l] + e[l] / (g + sign(g) hypot(g, 1))
            mpfr_sub(g, &D[l + 1], &D[l], MPFR_RNDN)
            mpfr_div(g, g, &E[l], MPFR_RNDN)
            mpfr_mul_2si(g, g, -1, MPFR_RNDN)
            mpfr_set_ui(t, 1, MPFR_RNDN)
            mpfr_hypot(r, g, t, MPFR_RNDN)
            if mpfr_sgn(g) < 0:
                mpfr_sub(t, g, r, MPFR_RNDN)
            else:
                mpfr_add(t, g, r, MPFR_RNDN)
            mpfr_div(t, &E[l], t, MPFR_RNDN)
            mpfr_sub(g, &D[m], &D[l], MPFR_RNDN)
            mpfr_add(g, g, t, MPFR_RNDN)
            mpfr_set_ui(s, 1, MPFR_RNDN)
            mpfr_set_ui(c, 1, MPFR_RNDN)
            mpfr_set_ui(p, 0, MPFR_RNDN)
            broke = False
            i = m - 1
            while i >= l:
                mpfr_mul(f, s, &E[i], MPFR_RNDN)
                mpfr_mul(b, c, &E[i], MPFR_RNDN)
                mpfr_hypot(r, f, g, MPFR_RNDN)
                mpfr_set(&E[i + 1], r, MPFR_RNDN)
                if mpfr_zero_p(r):
                    mpfr_sub(&D[i + 1], &D[i + 1], p, MPFR_RNDN)
                    mpfr_set_ui(&E[m], 0, MPFR_RNDN)
                    broke = True
                    break
                mpfr_div(s, f, r, MPFR_RNDN)
                mpfr_div(c, g, r, MPFR_RNDN)
                mpfr_sub(g, &D[i + 1], p, MPFR_RNDN)
                mpfr_sub(r, &D[i], g, MPFR_RNDN)
                mpfr_mul(r, r, s, MPFR_RNDN)
                mpfr_mul(t, c, b, MPFR_RNDN)
                mpfr_mul_2si(t, t, 1, MPFR_RNDN)
                mpfr_add(r, r, t, MPFR_RNDN)
                mpfr_mul(p, s, r, MPFR_RNDN)
                mpfr_add(&D[i + 1], g, p, MPFR_RNDN)
                mpfr_mul(g, c, r, MPFR_RNDN)
                mpfr_sub(g, g, b, MPFR_RNDN)
                if vec:
                    for k in range(n):
                        _rot(Z.at(k, i), Z.at(k, i + 1), c, s, u, w)
                i -= 1
            if broke:
                continue
            mpfr_sub(&D[l], &D[l], p, MPFR_RNDN)
            mpfr_set(&E[l], g, MPFR_RNDN)
            mpfr_set_ui(&E[m], 0, MPFR_RNDN)
    return 0


cdef void _congruence(_MPMatrix A, _MPMatrix Z, _MPMatrix B, _MPMatrix T) noexcept nogil:
    # upper triangle of B = Z^T A Z (A full, symmetric)
    cdef Py_ssize_t n = A.rows
    cdef Py_ssize_t i, j, k
    for i in range(n):
        for j in range(n):
            mpfr_set_ui(T.at(i, j), 0, MPFR_RNDN)
            for k in range(n):
                mpfr_fma(T.at(i, j), A.at(i, k), Z.at(k, j), T.at(i, j), MPFR_RNDN)
    for i in range(n):
        for j in range(i, n):
            mpfr_set_ui(B.at(i, j), 0, MPFR_RNDN)
            for k in range(n):
                mpfr_fma(B.at(i, j), Z.at(k, i), T.at(k, j), B.at(i, j), MPFR_RNDN)


cdef int _svd_mpfr(_MPMatrix W, _MPMatrix V, int max_sweeps, long tol_exp, _Scratch S):
    cdef Py_ssize_t m = W.rows
    cdef Py_ssize_t n = W.cols
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef bint rotated
    cdef mpfr_ptr alpha = &S.tmp[0]
    cdef mpfr_ptr beta = &S.tmp[1]
    cdef mpfr_ptr gamma = &S.tmp[2]
    cdef mpfr_ptr theta = &S.tmp[3]
    cdef mpfr_ptr t = &S.tmp[4]
    cdef mpfr_ptr c = &S.tmp[5]
    cdef mpfr_ptr s = &S.tmp[6]
    cdef mpfr_ptr u = &S.tmp[7]
    cdef mpfr_ptr w = &S.tmp[8]
    with nogil:
        for sweep in range(1, max_sweeps + 1):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    mpfr_set_ui(alpha, 0, MPFR_RNDN)
                    mpfr_set_ui(beta, 0, MPFR_RNDN)
                    mpfr_set_ui(gamma, 0, MPFR_RNDN)
                    for k in range(m):
                        mpfr_fma(alpha, W.at(k, p), W.at(k, p), alpha, MPFR_RNDN)
                        mpfr_fma(beta, W.at(k, q), W.at(k, q), beta, MPFR_RNDN)
                        mpfr_fma(gamma, W.at(k, p), W.at(k, q), gamma, MPFR_RNDN)
                    if mpfr_zero_p(gamma):
                        continue
                    mpfr_mul(u, alpha, beta, MPFR_RNDN)
                    mpfr_sqrt(u, u, MPFR_RNDN)
                    mpfr_mul_2si(u, u, tol_exp, MPFR_RNDN)
                    if mpfr_cmpabs(gamma, u) <= 0:
                        continue
                    rotated = True
                    mpfr_sub(theta, beta, alpha, MPFR_RNDN)
                    mpfr_div(theta, theta, gamma, MPFR_RNDN)
                    mpfr_mul_2si(theta, theta, -1, MPFR_RNDN)
                    mpfr_sqr(u, theta, MPFR_RNDN)
                    mpfr_add_ui(u, u, 1, MPFR_RNDN)
                    mpfr_sqrt(u, u, MPFR_RNDN)
                    mpfr_abs(w, theta, MPFR_RNDN)
                    mpfr_add(u, u, w, MPFR_RNDN)
                    mpfr_ui_div(t, 1, u, MPFR_RNDN)
                    if mpfr_sgn(theta) < 0:
                        mpfr_neg(t, t, MPFR_RNDN)
                    mpfr_sqr(u, t, MPFR_RNDN)
                    mpfr_add_ui(u, u, 1, MPFR_RNDN)
                    mpfr_sqrt(u, u, MPFR_RNDN)
                    mpfr_ui_div(c, 1, u, MPFR_RNDN)
                    mpfr_mul(s, t, c, MPFR_RNDN)
                    for k in range(m):
                        _rot(W.at(k, p), W.at(k, q), c, s, u, w)
                    for k in range(n):
                        _rot(V.at(k, p), V.at(k, q), c, s, u, w)
            if not rotated:
                return sweep
    return max_sweeps + 1


# ------------------------------------------------------------ dispatch --

_MPC = type(gmpy2.mpc(0))


def _is_complex_object(A):
    return any(type(v) is _MPC for v in A.flat)


def eigh_jacobi(A, bits, vectors=True, max_sweeps=40):
    """Cyclic Jacobi eigen-decomposition; see ``_jacobi_py.eigh_jacobi``."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j
    if bits <= 53:
        dtype = np.complex128 if np.iscomplexobj(A) or (A.dtype == object and _is_complex_object(A)) \
            else np.float64
        M = np.ascontiguousarray(np.array(A, dtype=dtype))
        V = np.ascontiguousarray(np.eye(n, dtype=dtype))
        scale = float(np.max(np.abs(M))) if n else 0.0
        tol = 2.0 ** (-bits + 3)
        floor = 2.0 ** (-bits + 2) * scale
        if dtype == np.float64:
            sweeps = _eigh_fixed[double](M, V, vectors, max_sweeps, tol, floor)
        else:
            sweeps = _eigh_fixed[complex](M, V, vectors, max_sweeps, tol, floor)
        off = float(np.max(np.abs(M - np.diag(np.diag(M))))) if n > 1 else 0.0
        return np.real(np.diag(M)).copy(), (V if vectors else None), sweeps, off
    if _is_complex_object(A):
        return _jacobi_py.eigh_jacobi(A, bits, vectors, max_sweeps)
    cdef _MPMatrix MA = _MPMatrix(n, n, bits)
    cdef _MPMatrix Z = _MPMatrix(n, n, bits)
    cdef _MPMatrix DE = _MPMatrix(2, n, bits)
    cdef _Scratch S = _Scratch(bits)
    cdef _MPMatrix th = _MPMatrix(1, 1, bits)
    cdef _MPMatrix B
    cdef _MPMatrix T
    cdef int status
    cdef bint vec = vectors
    cdef long cbits = bits
    MA.load(A)
    Z.load(A)
    # |a_ij| <= sigma_1, so this bounds the stopping level 2^(8-bits) sigma_1 from below
    scale = max((abs(v) for v in A.flat), default=0)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        th.load(np.array([[gmpy2.mul_2exp(gmpy2.mpfr(scale), -bits + 8)]], dtype=object))
    with nogil:
        _tred2(Z, DE.at(0, 0), DE.at(1, 0), vec, S)
        status = _tql(Z, DE.at(0, 0), DE.at(1, 0), vec, cbits, th.at(0, 0), S)
    if status < 0:
        raise ArithmeticError("tridiagonal QL iteration did not converge")
    diag = np.empty(n, dtype=object)
    if not vectors:
        for i in range(n):
            diag[i] = DE.get(0, i)
        return diag, None, 0, 0.0
    # Jacobi sweeps on Z^T A Z until every off-diagonal entry is below the threshold
    B = _MPMatrix(n, n, bits)
    T = _MPMatrix(n, n, bits)
    with nogil:
        _congruence(MA, Z, B, T)
    T = None
    sweeps = _eigh_mpfr(B, Z, True, max_sweeps, S, th.at(0, 0))
    off = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            off = max(off, abs(mpfr_get_d(B.at(i, j), MPFR_RNDN)))
    for i in range(n):
        diag[i] = B.get(i, i)
    MV = Z
    return diag, (MV.dump() if vectors else None), sweeps, off


def _column_coupling(W):
    # largest normalized inner product between distinct columns (reported on failure only)
    Wf = np.array([[complex(v) for v in row] for row in W]) if W.dtype == object else W
    C = np.abs(Wf.conj().T @ Wf)
    d = np.sqrt(np.diag(C))
    d[d == 0] = 1.0
    C = C / np.outer(d, d)
    np.fill_diagonal(C, 0.0)
    return float(C.max()) if C.size else 0.0


def svd_jacobi(G, bits, max_sweeps=40):
    """One-sided Jacobi SVD; see ``_jacobi_py.svd_jacobi``."""
    cdef Py_ssize_t m = G.shape[0]
    cdef Py_ssize_t n = G.shape[1]
    cdef Py_ssize_t j
    if bits <= 53:
        dtype = np.complex128 if np.iscomplexobj(G) or (G.dtype == object and _is_complex_object(G)) \
            else np.float64
        W = np.ascontiguousarray(np.array(G, dtype=dtype))
        V = np.ascontiguousarray(np.eye(n, dtype=dtype))
        tol = 2.0 ** (-bits + 3) * max(1.0, sqrt(<double> m))
        if dtype == np.float64:
            sweeps = _svd_fixed[double](W, V, max_sweeps, tol)
        else:
            sweeps = _svd_fixed[complex](W, V, max_sweeps, tol)
        sigma = np.sqrt(np.real(np.sum(np.conj(W) * W, axis=0)))
        U = W.copy()
        nz = sigma > 0
        U[:, nz] = W[:, nz] / sigma[nz]
        return sigma, U, V, sweeps, (_column_coupling(W) if sweeps > max_sweeps else 0.0)
    if _is_complex_object(G):
        return _jacobi_py.svd_jacobi(G, bits, max_sweeps)
    cdef _MPMatrix MW = _MPMatrix(m, n, bits)
    cdef _MPMatrix MV = _MPMatrix(n, n, bits)
    cdef _Scratch S = _Scratch(bits)
    MW.load(G)
    MV.identity()
    tol_exp = -bits + 3 + int(np.ceil(np.log2(max(m, 1)) / 2))
    sweeps = _svd_mpfr(MW, MV, max_sweeps, tol_exp, S)
    W = MW.dump()
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        sigma = np.empty(n, dtype=object)
        U = W.copy()
        for j in range(n):
            sigma[j] = gmpy2.sqrt(sum((v * v for v in W[:, j]), gmpy2.mpfr(0)))
            if sigma[j] != 0:
                U[:, j] = W[:, j] / sigma[j]
    return sigma, U, MV.dump(), sweeps, (_column_coupling(W) if sweeps > max_sweeps else 0.0)
