"""Built-in target functions.

Each target evaluates on float64 or gmpy2 object arrays. The synthetic
target ``synthetic-p51`` has no pointwise form: it is defined by its
coefficients ``b_n = sqrt(6)/pi / n`` in the orthonormal basis of the
augmented-orthonormal frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import gmpy2
import numpy as np
from gmpy2 import mpfr

from frameward import _mp
from frameward._mp import is_double, working
from frameward.frames import P51_LAW, CoefficientLaw


@dataclass(frozen=True)
class TargetFunction:
    """A named target ``f``.

    Attributes
    ----------
    id : str
        Catalog name.
    double : callable or None
        Vectorized float64 evaluator.
    scalar_mp : callable or None
        Scalar evaluator for gmpy2 reals (called inside a precision context).
    graded_left : bool
        The function has an endpoint singularity at ``t = -1``; quadrature
        grades panels toward it.
    law : CoefficientLaw or None
        Basis coefficients for targets that live in coefficient space.
    """

    id: str
    double: Callable | None = None
    scalar_mp: Callable | None = None
    graded_left: bool = False
    law: CoefficientLaw | None = None
    real: bool = True

    @property
    def pointwise(self) -> bool:
        return self.law is None

    def __call__(self, t, bits: int = _mp.DOUBLE):
        if not self.pointwise:
            raise TypeError(f"target {self.id!r} is defined by coefficients, not point values")
        if is_double(bits):
            return self.double(np.asarray(_mp.to_float(np.asarray(t)), dtype=float))
        t = _mp.asarray(np.atleast_1d(t), bits)
        with working(bits):
            out = np.array([self.scalar_mp(x) for x in t.flat], dtype=object)
        return out.reshape(t.shape)

    def evaluator(self, bits: int = _mp.DOUBLE):
        return lambda t: self(t, bits)


def _runge(a):
    return TargetFunction(
        f"runge{a}",
        double=lambda t: 1.0 / (1.0 + a * t * t),
        scalar_mp=lambda x: 1 / (1 + a * x * x),
    )


def _mixed_double(t):
    return np.exp(np.sin(3 * t + 0.5)) * np.sqrt(np.maximum(1 + t, 0.0)) + np.cos(5 * t)


def _mixed_mp(x):
    half = mpfr(1) / 2
    return gmpy2.exp(gmpy2.sin(3 * x + half)) * gmpy2.sqrt(max(1 + x, mpfr(0))) + gmpy2.cos(5 * x)


CATALOG: dict[str, TargetFunction] = {
    "exp": TargetFunction("exp", double=np.exp, scalar_mp=gmpy2.exp),
    "runge16": _runge(16),
    "runge25": _runge(25),
    "abs5": TargetFunction("abs5", double=lambda t: np.abs(t) ** 5, scalar_mp=lambda x: abs(x) ** 5),
    "pole": TargetFunction("pole", double=lambda t: 1.0 / (10.0 - 9.0 * t), scalar_mp=lambda x: 1 / (10 - 9 * x)),
    "mixed": TargetFunction("mixed", double=_mixed_double, scalar_mp=_mixed_mp, graded_left=True),
    "synthetic-p51": TargetFunction("synthetic-p51", law=P51_LAW),
}


def get_target(name: str) -> TargetFunction:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown target {name!r}; choose from {', '.join(CATALOG)}") from None


def from_callable(name: str, fun: Callable, *, graded_left: bool = False) -> TargetFunction:
    """Wrap a float64 callable as a target (mp evaluation goes through float)."""
    return TargetFunction(name, double=fun, scalar_mp=lambda x: mpfr(float(fun(float(x)))),
                          graded_left=graded_left, real=False)
