"""Compiled vs pure-Python Jacobi kernels on Gram matrices.

Run with ``python benchmarks/bench_jacobi.py [--repeat R]``. Each case
reports the best of R wall times for both backends, the speedup, and the
largest eigenvalue/singular-value difference between them, relative to
the largest value.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from frameward import _mp
from frameward.frames import FrameSpec
from frameward.gram import assemble_rect, assemble_square
from frameward.kernels import _jacobi_py

try:
    from frameward.kernels import _jacobi as _compiled
except ImportError:  # extension not built
    _compiled = None


def _cases():
    fe = FrameSpec.fe(2.0)
    augf = FrameSpec.augmented_fourier(4)
    return [
        ("eigh fe N=64 double", "eigh", assemble_square(fe, 64).matrix, 53),
        ("eigh augf N=48 double", "eigh", assemble_square(augf, 48).matrix, 53),
        ("svd fe 128x64 double", "svd", assemble_rect(fe, 128, 64).matrix, 53),
        ("eigh fe N=40 256 bits", "eigh", assemble_square(fe, 40, 256).matrix, 256),
        ("eigh fe N=40 values 256 bits", "eigv", assemble_square(fe, 40, 256).matrix, 256),
        ("svd fe 48x24 256 bits", "svd", assemble_rect(fe, 48, 24, 256).matrix, 256),
    ]


def _run(mod, kind, A, bits):
    if kind == "svd":
        return mod.svd_jacobi(_mp.asarray(A, bits), bits, 40)[0]
    return mod.eigh_jacobi(_mp.asarray(A, bits), bits, kind == "eigh", 40)[0]


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled kernels not built; nothing to compare")
        return
    print(f"{'case':32s} {'compiled ms':>12s} {'python ms':>12s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, kind, A, bits in _cases():
        tc, vc = _best(lambda: _run(_compiled, kind, A, bits), args.repeat)
        tp, vp = _best(lambda: _run(_jacobi_py, kind, A, bits), args.repeat)
        a = np.sort(_mp.to_float(vc).astype(float))
        b = np.sort(_mp.to_float(vp).astype(float))
        diff = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        print(f"{name:32s} {tc * 1e3:12.1f} {tp * 1e3:12.1f} {tp / tc:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
