"""Working-precision helpers.

Precision is always given in bits. Anything at or below 53 bits runs on
numpy float64/complex128 arrays; above that, values are gmpy2 ``mpfr`` /
``mpc`` scalars held in numpy object arrays and arithmetic happens inside
a :func:`working` context.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

DOUBLE = 53


def is_double(bits: int) -> bool:
    return bits <= DOUBLE


@contextmanager
def working(bits: int):
    """Set the gmpy2 context precision for the enclosed block."""
    with gmpy2.context(gmpy2.get_context(), precision=max(int(bits), DOUBLE)):
        yield


def pi(bits: int):
    if is_double(bits):
        return math.pi
    with working(bits):
        return gmpy2.const_pi()


def eps(bits: int) -> float:
    return 2.0 ** (1 - bits)


def real(x, bits: int):
    """Convert a Python/numpy scalar (or decimal string) to a real at ``bits``."""
    if is_double(bits):
        return float(x)
    with working(bits):
        return mpfr(x)


def asarray(x, bits: int, dtype=None) -> np.ndarray:
    """Coerce ``x`` to the array representation used at ``bits``.

    Double precision returns float64 or complex128; extended precision an
    object array of mpfr/mpc.
    """
    if is_double(bits):
        a = np.asarray(x)
        if dtype is not None:
            return a.astype(dtype)
        if a.dtype == object:
            if any(isinstance(v, (complex, type(mpc(0)))) for v in a.flat):
                return np.array([complex(v) for v in a.flat]).reshape(a.shape)
            return np.array([float(v) for v in a.flat]).reshape(a.shape)
        if np.iscomplexobj(a):
            return a.astype(np.complex128)
        return a.astype(np.float64)
    a = np.asarray(x, dtype=object)
    out = np.empty(a.shape, dtype=object)
    with working(bits):
        for i, v in np.ndenumerate(a):
            out[i] = _to_mp(v)
    return out


def _to_mp(v):
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        if v.imag == 0.0:
            return mpfr(v.real)
        return mpc(v)
    if isinstance(v, (np.floating, np.integer)):
        return mpfr(v.item())
    if type(v) is type(mpc(0)):
        return mpc(v)
    return mpfr(v)


def zeros(shape, bits: int, complex_: bool = False) -> np.ndarray:
    if is_double(bits):
        return np.zeros(shape, dtype=np.complex128 if complex_ else np.float64)
    out = np.empty(shape, dtype=object)
    with working(bits):
        z = mpc(0) if complex_ else mpfr(0)
        out.fill(z)
    return out


def is_complex_array(a: np.ndarray) -> bool:
    if a.dtype != object:
        return np.iscomplexobj(a)
    mpc_t = type(mpc(0))
    return any(type(v) is mpc_t for v in a.flat)


def to_float(a) -> np.ndarray:
    """Round an array (any precision) to float64/complex128."""
    a = np.asarray(a)
    if a.dtype != object:
        return a
    if is_complex_array(a):
        return np.array([complex(v) for v in a.flat], dtype=np.complex128).reshape(a.shape)
    return np.array([float(v) for v in a.flat], dtype=np.float64).reshape(a.shape)


def conj(a: np.ndarray) -> np.ndarray:
    if a.dtype != object:
        return np.conj(a)
    mpc_t = type(mpc(0))
    return np.array([v.conjugate() if type(v) is mpc_t else v for v in a.flat],
                    dtype=object).reshape(a.shape)


def absval(a: np.ndarray) -> np.ndarray:
    if a.dtype != object:
        return np.abs(a)
    return np.array([abs(v) for v in a.flat], dtype=object).reshape(a.shape)


def norm(v: np.ndarray, bits: int):
    """Euclidean norm at working precision."""
    if is_double(bits):
        return float(np.linalg.norm(v))
    with working(bits):
        s = mpfr(0)
        mpc_t = type(mpc(0))
        for x in v.flat:
            if type(x) is mpc_t:
                s += x.real * x.real + x.imag * x.imag
            else:
                s += x * x
        return gmpy2.sqrt(s)


def vdot(a: np.ndarray, b: np.ndarray, bits: int):
    """``sum(conj(a) * b)`` at working precision."""
    if is_double(bits):
        return np.vdot(a, b)
    with working(bits):
        return np.sum(conj(np.asarray(a)) * np.asarray(b))


def matmul(a: np.ndarray, b: np.ndarray, bits: int) -> np.ndarray:
    if is_double(bits):
        return a @ b
    with working(bits):
        return np.dot(a, b)


def hermitian_transpose(a: np.ndarray) -> np.ndarray:
    return conj(a).T.copy()


def simplify(a: np.ndarray) -> np.ndarray:
    """Demote mpc entries with exactly zero imaginary part to mpfr."""
    if a.dtype != object:
        return a
    mpc_t = type(mpc(0))
    out = a.copy()
    for i, v in np.ndenumerate(a):
        if type(v) is mpc_t and v.imag == 0:
            out[i] = v.real
    return out


def ufunc(name: str):
    """Elementwise gmpy2 function over object arrays (``exp``, ``sin``...)."""
    f = getattr(gmpy2, name)
    return np.frompyfunc(f, 1, 1)
