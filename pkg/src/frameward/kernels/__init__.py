"""Jacobi eigen/SVD kernels.

The compiled core is used when it was built and ``FRAMEWARD_PURE`` is not
set to a true value; otherwise the pure-Python kernels are used. Both
expose ``eigh_jacobi`` and ``svd_jacobi`` with identical signatures.
"""

from __future__ import annotations

import os

from frameward.kernels import _jacobi_py

_pure = os.environ.get("FRAMEWARD_PURE", "").strip().lower() in {"1", "true", "yes", "on"}

backend = _jacobi_py
BACKEND = "python"
if not _pure:
    try:
        from frameward.kernels import _jacobi as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        backend = _compiled
        BACKEND = "compiled"


def eigh_jacobi(A, bits, vectors=True, max_sweeps=40):
    return backend.eigh_jacobi(A, bits, vectors, max_sweeps)


def svd_jacobi(G, bits, max_sweeps=40):
    return backend.svd_jacobi(G, bits, max_sweeps)


__all__ = ["BACKEND", "eigh_jacobi", "svd_jacobi"]
