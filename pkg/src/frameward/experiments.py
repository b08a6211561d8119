"""Sweep drivers producing tabular records.

Every driver returns :class:`SweepRecord` objects in grid order, whatever
order the work pool finishes them in. Absent fields are ``None`` and are
written as ``NA``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from frameward import _mp, approx
from frameward.frames import Family, FrameSpec
from frameward.gram import (assemble_rect, assemble_square, auto_bits, bind_target, frame_bounds,
                            growth_E)
from frameward.regsolve import PrecisionError, hermitian_eig, rect_svd, solve_exact
from frameward.targets import TargetFunction, get_target

SEED = 0x5EED
METHODS = ("exact", "tsvd", "dual")
FIT_WINDOW = 5

CSV_FIELDS = ("family", "params", "f_id", "N", "M", "eps", "method", "l2_error", "coeff_norm",
              "A_N", "B_N", "kappa", "rank_kept", "precision_bits", "wall_time_ms")


@dataclass(frozen=True)
class SweepRecord:
    """One row of a sweep; ``note`` explains refused cells and is not written to CSV."""

    family: str
    params: str
    f_id: str | None = None
    N: int | None = None
    M: int | None = None
    eps: float | None = None
    method: str | None = None
    l2_error: float | None = None
    coeff_norm: float | None = None
    A_N: float | None = None
    B_N: float | None = None
    kappa: float | None = None
    rank_kept: int | None = None
    precision_bits: int | None = None
    wall_time_ms: float | None = None
    note: str = ""

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


def _base(spec: FrameSpec, f: TargetFunction | None = None, **kw) -> dict:
    return dict(family=spec.family.value, params=spec.params, f_id=None if f is None else f.id, **kw)


def _bounds(values) -> tuple[float, float, float]:
    a = float(values[-1])
    b = float(values[0])
    # a nonpositive A_N means the precision could not resolve the spectrum; the ratio is kept as is
    return a, b, b / a if a != 0 else math.inf


def resolve_bits(spec: FrameSpec, N: int, precision) -> int:
    """``"auto"`` applies the precision rule and ``"double"`` means 53 bits; anything else is a bit count."""
    if precision in (None, "auto"):
        return auto_bits(spec, N)
    if precision == "double":
        return _mp.DOUBLE
    return int(precision)


def run_tasks(fn: Callable, tasks: Sequence, workers: int = 1, progress: Callable | None = None) -> list:
    """Apply ``fn`` to each task; results come back in task order.

    ``progress(N, ms)`` is called after each task, ``N`` being the task's
    second element.
    """
    out = []
    if workers <= 1:
        for task in tasks:
            t0 = time.perf_counter()
            out.append(fn(task))
            if progress:
                progress(task[1], (time.perf_counter() - t0) * 1e3)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        t0 = time.perf_counter()
        for task, res in zip(tasks, pool.map(fn, tasks)):
            out.append(res)
            if progress:
                progress(task[1], (time.perf_counter() - t0) * 1e3)
    return out


# ---------------------------------------------------------------- spectra and conditioning

def spectrum_experiment(spec: FrameSpec, N: int, precision=_mp.DOUBLE) -> np.ndarray:
    """Descending eigenvalues of ``G_N`` at the requested precision."""
    bits = resolve_bits(spec, N, precision)
    return hermitian_eig(assemble_square(spec, N, bits).matrix, bits, vectors=False).values


def theoretical_bound(spec: FrameSpec, N: int) -> float | None:
    """Growth-law overlay: ``E(T)^N``, ``N^(2K-1)`` or ``4^N`` (none for the closed-form family)."""
    if spec.family == Family.FE:
        return growth_E(spec.T) ** N
    if spec.family == Family.AUGF:
        return float(N) ** (2 * spec.K - 1)
    if spec.family == Family.WLEG:
        return 4.0 ** N
    return None


def _condition_task(args):
    spec, N, precision = args
    bits = resolve_bits(spec, N, precision)
    t0 = time.perf_counter()
    fb = frame_bounds(assemble_square(spec, N, bits))
    a, b, k = _bounds([fb.upper, fb.lower])
    return SweepRecord(**_base(spec, N=N, method="spectrum", A_N=a, B_N=b, kappa=k, precision_bits=bits,
                               wall_time_ms=(time.perf_counter() - t0) * 1e3))


@dataclass(frozen=True)
class ConditionSweep:
    records: list
    bound: list
    slope: float


def fit_slope(x: Iterable[float], y: Iterable[float], window: int = FIT_WINDOW) -> float:
    """Least-squares slope over the last ``window`` points."""
    x = np.asarray(list(x), dtype=float)[-window:]
    y = np.asarray(list(y), dtype=float)[-window:]
    if len(x) < 2:
        raise ValueError("need at least two points to fit a slope")
    return float(np.polyfit(x, y, 1)[0])


def growth_fit(spec: FrameSpec, Ns, kappas, window: int = FIT_WINDOW) -> float:
    """Family-specific growth exponent of ``kappa``.

    Slope of ``log kappa`` against ``N`` for Fourier extension and weighted
    Legendre, against ``log N`` for augmented Fourier.
    """
    y = np.log(np.asarray(kappas, dtype=float))
    x = np.log(np.asarray(Ns, dtype=float)) if spec.family == Family.AUGF else np.asarray(Ns, dtype=float)
    return fit_slope(x, y, window)


def condition_sweep(spec: FrameSpec, N_list: Sequence[int], precision="auto", *, workers: int = 1,
                    progress: Callable | None = None) -> ConditionSweep:
    """Frame bounds and condition numbers of ``G_N`` along ``N_list``."""
    Ns = list(N_list)
    if any(b <= a for a, b in zip(Ns[:-1], Ns[1:])):
        raise ValueError("N list must be strictly ascending")
    for N in Ns:
        spec.check_admissible(N)
    recs = run_tasks(_condition_task, [(spec, N, precision) for N in Ns], workers, progress)
    bound = [theoretical_bound(spec, N) for N in Ns]
    slope = growth_fit(spec, Ns, [r.kappa for r in recs]) if len(Ns) >= 2 else math.nan
    return ConditionSweep(recs, bound, slope)


def plateau_onset(errors: Sequence[float]) -> int:
    """Index of the first error that does not exceed some later error.

    Before this index the sequence is still above everything that follows
    it; from here on it no longer improves on its own future.
    """
    e = list(errors)
    for k in range(len(e) - 1):
        if e[k] <= max(e[k + 1:]):
            return k
    return len(e) - 1


# ---------------------------------------------------------------- coefficient table

def _table_task(args):
    spec, N, fs, precision = args
    bits = resolve_bits(spec, N, precision)
    t0 = time.perf_counter()
    sys = assemble_square(spec, N, bits)
    fact = hermitian_eig(sys.matrix, bits)
    shared = (time.perf_counter() - t0) * 1e3
    a, b, k = _bounds(fact.values)
    out = []
    for f in fs:
        t1 = time.perf_counter()
        try:
            x = solve_exact(bind_target(sys, f), fact)
        except PrecisionError as exc:
            out.append(SweepRecord(**_base(spec, f, N=N, method="exact", A_N=a, B_N=b, kappa=k,
                                           precision_bits=bits, note=str(exc))))
            continue
        out.append(SweepRecord(**_base(spec, f, N=N, method="exact", coeff_norm=float(_mp.norm(x, bits)), A_N=a,
                                       B_N=b, kappa=k, rank_kept=N, precision_bits=bits,
                                       wall_time_ms=shared + (time.perf_counter() - t1) * 1e3)))
    return out


def coefficient_table(spec: FrameSpec, f_list: Sequence, N_list: Sequence[int], precision="auto", *,
                      workers: int = 1, progress: Callable | None = None) -> list[SweepRecord]:
    """Norm of the exact projection coefficients and ``kappa(G_N)`` per (f, N) cell.

    One factorization per N serves every target. Records are ordered by
    target, then N. Cells refused by the precision rule carry NA values and
    a note.
    """
    fs = tuple(get_target(f) if isinstance(f, str) else f for f in f_list)
    for N in N_list:
        spec.check_admissible(N)
    rows = run_tasks(_table_task, [(spec, N, fs, precision) for N in N_list], workers, progress)
    return [rows[j][i] for i in range(len(fs)) for j in range(len(N_list))]


# ---------------------------------------------------------------- error sweeps

def _error_task(args):
    spec, N, f, eps_list, methods, precision = args
    out = []
    if "exact" in methods:
        bits = resolve_bits(spec, N, precision)
        t0 = time.perf_counter()
        try:
            p = approx.project_exact(spec, N, f, bits)
            a, b, k = _bounds(p.factorization.values)
            out.append(SweepRecord(**_base(
                spec, f, N=N, method="exact", l2_error=approx.error_l2(spec, f, p), coeff_norm=p.coeff_norm(),
                A_N=a, B_N=b, kappa=k, rank_kept=N, precision_bits=bits,
                wall_time_ms=(time.perf_counter() - t0) * 1e3)))
        except PrecisionError as exc:
            out.append(SweepRecord(**_base(spec, f, N=N, method="exact", precision_bits=bits, note=str(exc))))
    if "tsvd" in methods and eps_list:
        t0 = time.perf_counter()
        sys = bind_target(assemble_square(spec, N), f)
        fact = hermitian_eig(sys.matrix)
        a, b, k = _bounds(fact.values)
        shared = (time.perf_counter() - t0) * 1e3
        for eps in eps_list:
            t1 = time.perf_counter()
            p = approx.project_tsvd(spec, N, f, eps, system=sys, factorization=fact)
            out.append(SweepRecord(**_base(
                spec, f, N=N, eps=eps, method="tsvd", l2_error=approx.error_l2(spec, f, p),
                coeff_norm=p.coeff_norm(), A_N=a, B_N=b, kappa=k, rank_kept=p.rank_kept,
                precision_bits=_mp.DOUBLE, wall_time_ms=shared + (time.perf_counter() - t1) * 1e3)))
    if "dual" in methods:
        t0 = time.perf_counter()
        p = approx.project_dual(spec, N, f)
        out.append(SweepRecord(**_base(
            spec, f, N=N, method="dual", l2_error=approx.error_l2(spec, f, p), coeff_norm=p.coeff_norm(),
            rank_kept=N, precision_bits=_mp.DOUBLE, wall_time_ms=(time.perf_counter() - t0) * 1e3)))
    return out


def error_sweep(spec: FrameSpec, f, N_list: Sequence[int], eps_list: Sequence[float] = (1e-4, 1e-8, 1e-12),
                methods: Sequence[str] = ("tsvd",), precision="auto", *, workers: int = 1,
                progress: Callable | None = None) -> list[SweepRecord]:
    """L2 errors per (N, eps, method).

    Exact projections run at the rule-selected precision, truncated-SVD and
    dual expansions in double. Records are ordered by N, then method in the
    order exact, tsvd, dual, then eps.
    """
    f = get_target(f) if isinstance(f, str) else f
    bad = set(methods) - set(METHODS)
    if bad:
        raise ValueError(f"unknown method(s) {sorted(bad)}; choose from {', '.join(METHODS)}")
    for N in N_list:
        spec.check_admissible(N)
    tasks = [(spec, N, f, tuple(eps_list), tuple(methods), precision) for N in N_list]
    return [r for batch in run_tasks(_error_task, tasks, workers, progress) for r in batch]


def _oversample_task(args):
    spec, N, f, M, eps = args
    t0 = time.perf_counter()
    sys = bind_target(assemble_rect(spec, M, N), f)
    fact = rect_svd(sys.matrix) if M > N else hermitian_eig(sys.matrix)
    p = approx.project_oversampled(spec, M, N, f, eps, system=sys, factorization=fact)
    a, b, k = _bounds(fact.values)
    return SweepRecord(**_base(
        spec, f, N=N, M=M, eps=eps, method="oversampled", l2_error=approx.error_l2(spec, f, p),
        coeff_norm=p.coeff_norm(), A_N=a, B_N=b, kappa=k, rank_kept=p.rank_kept, precision_bits=_mp.DOUBLE,
        wall_time_ms=(time.perf_counter() - t0) * 1e3))


def oversample_sweep(spec: FrameSpec, f, gamma_list: Sequence[float], N_list: Sequence[int], eps: float = 1e-12,
                     *, workers: int = 1, progress: Callable | None = None) -> list[SweepRecord]:
    """Oversampled projections with ``M = gamma N``, ordered by gamma then N.

    ``A_N``, ``B_N`` and ``kappa`` of these records refer to the singular
    values of the rectangular system.
    """
    f = get_target(f) if isinstance(f, str) else f
    tasks = []
    for g in gamma_list:
        if g < 1:
            raise ValueError(f"oversampling factor must be >= 1, got {g}")
        for N in N_list:
            M = int(round(g * N))
            spec.check_admissible(N)
            spec.check_admissible(M)
            tasks.append((spec, N, f, M, eps))
    return run_tasks(_oversample_task, tasks, workers, progress)


# ---------------------------------------------------------------- plot data

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def pivot(records: Sequence[SweepRecord], value: str = "l2_error", x: str = "N") -> tuple[list, dict]:
    """Columns ``x`` plus one series per (method, eps, M/N) combination."""
    xs = sorted({getattr(r, x) for r in records if getattr(r, x) is not None})
    series: dict = {}
    for r in records:
        name = r.method or "value"
        if r.eps is not None:
            name += f"_eps={r.eps:g}"
        if r.M is not None and r.N:
            name += f"_gamma={r.M / r.N:g}"
        if r.f_id and len({q.f_id for q in records}) > 1:
            name = f"{r.f_id}_{name}"
        series.setdefault(name, {})[getattr(r, x)] = getattr(r, value)
    return xs, {k: [v.get(xv) for xv in xs] for k, v in series.items()}


def write_plot_data(path, columns: dict) -> None:
    """Whitespace-separated columns under a one-line header."""
    names = list(columns)
    n = max((len(c) for c in columns.values()), default=0)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(" ".join(names) + "\n")
        for i in range(n):
            fh.write(" ".join(_fmt(columns[k][i] if i < len(columns[k]) else None) for k in names) + "\n")


def records_plot_columns(records: Sequence[SweepRecord], value: str = "l2_error") -> dict:
    xs, series = pivot(records, value)
    return {"N": xs, **series}


__all__ = [
    "SweepRecord", "CSV_FIELDS", "SEED", "spectrum_experiment", "condition_sweep", "coefficient_table",
    "error_sweep", "oversample_sweep", "write_plot_data", "records_plot_columns", "fit_slope", "growth_fit",
    "theoretical_bound", "resolve_bits", "run_tasks", "ConditionSweep", "plateau_onset",
]
