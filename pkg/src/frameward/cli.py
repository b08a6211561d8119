"""Command-line front end.

Every option can also be given through an environment variable named
``FRAMEWARD_`` plus the option's destination in upper case (for example
``FRAMEWARD_PRECISION=auto`` or ``FRAMEWARD_N=10,20``); an explicit flag
always wins. Exit status is 0 on success, 2 on usage errors and 3 on
numerical refusals, accuracy failures or unwritable output.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from frameward import __version__, _mp, acceptance, approx, experiments
from frameward.experiments import CSV_FIELDS, SweepRecord
from frameward.frames import AdmissibilityError, FrameSpec
from frameward.gram import assemble_rect, assemble_square, bind_target, dump_matrix
from frameward.quadrature import ConvergenceError as QuadratureConvergenceError
from frameward.targets import CATALOG, get_target

ENV_PREFIX = "FRAMEWARD_"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
_TRUE = {"1", "true", "yes", "on"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- value parsers

def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        out = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _precision(text: str):
    t = str(text).strip().lower()
    if t == "auto":
        return "auto"
    if t == "double":
        return _mp.DOUBLE
    try:
        bits = int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"precision must be 'auto', 'double' or a bit count, got {text!r}") from None
    if bits < 2:
        raise argparse.ArgumentTypeError(f"precision must be at least 2 bits, got {bits}")
    return bits


def _target(text: str) -> str:
    if text not in CATALOG:
        raise argparse.ArgumentTypeError(f"unknown function {text!r}; choose from {', '.join(CATALOG)}")
    return text


def _targets(text: str) -> list[str]:
    return [_target(v.strip()) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------- serialization

def format_value(v) -> str:
    """Shortest round-trip decimal for reals, ``NA`` for absent values."""
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(records, path=None, *, timing: bool = True) -> None:
    """Write records under the fixed header (UTF-8, LF line endings).

    ``path=None`` writes to standard output. With ``timing=False`` the
    wall-time column is NA so reruns are byte-identical.
    """
    lines = [",".join(CSV_FIELDS)]
    for r in records:
        row = r.row() if isinstance(r, SweepRecord) else dict(r)
        if not timing:
            row["wall_time_ms"] = None
        lines.append(",".join(format_value(row.get(k)) for k in CSV_FIELDS))
    text = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _plot_path(args) -> Path | None:
    if args.plot_data:
        return Path(args.plot_data)
    if args.out and args.out != "-":
        return Path(args.out).with_suffix(".dat")
    return None


def _emit(args, records, columns: dict | None) -> None:
    write_csv(records, args.out, timing=not args.no_timing)
    path = _plot_path(args)
    if path is not None and columns is not None:
        experiments.write_plot_data(path, columns)


def _progress(args):
    if args.quiet:
        return None

    def report(N, ms):
        print(f"# N={N} done ({ms:.0f} ms)", file=sys.stderr, flush=True)

    return report


# ---------------------------------------------------------------- commands

def _spec(args) -> FrameSpec:
    if args.frame == "fe":
        return FrameSpec.fe(args.T)
    if args.frame == "augf":
        return FrameSpec.augmented_fourier(args.K)
    if args.frame == "wleg":
        return FrameSpec.weighted_legendre(args.alpha)
    return FrameSpec.augmented_orthonormal()


def _check_ns(spec: FrameSpec, Ns) -> None:
    for N in Ns:
        try:
            spec.check_admissible(N)
        except AdmissibilityError as exc:
            raise UsageError(str(exc)) from None


def cmd_gram_spectrum(args, spec) -> int:
    _check_ns(spec, args.N)
    records, columns = [], {}
    report = _progress(args)
    for N in args.N:
        bits = experiments.resolve_bits(spec, N, args.precision)
        t0 = time.perf_counter()
        values = experiments.spectrum_experiment(spec, N, bits)
        ms = (time.perf_counter() - t0) * 1e3
        vf = [float(v) for v in values]
        records.append(SweepRecord(spec.family.value, spec.params, N=N, method="spectrum", A_N=vf[-1], B_N=vf[0],
                                   kappa=vf[0] / vf[-1] if vf[-1] != 0 else math.inf, rank_kept=N,
                                   precision_bits=bits, wall_time_ms=ms))
        columns.setdefault("n", list(range(1, max(args.N) + 1)))
        columns[f"sigma_N={N}" if len(args.N) > 1 else "sigma"] = vf
        if args.dump_matrix:
            dump_matrix(assemble_square(spec, N, bits), _numbered(args.dump_matrix, N, len(args.N)))
        if report:
            report(N, ms)
    _emit(args, records, columns)
    return EXIT_OK


def _numbered(path, N, count):
    p = Path(path)
    return p if count == 1 else p.with_name(f"{p.stem}_N{N}{p.suffix}")


def cmd_condition_sweep(args, spec) -> int:
    _check_ns(spec, args.N)
    cs = experiments.condition_sweep(spec, args.N, args.precision, workers=args.workers, progress=_progress(args))
    columns = {"N": [r.N for r in cs.records], "kappa": [r.kappa for r in cs.records],
               "A_N": [r.A_N for r in cs.records], "B_N": [r.B_N for r in cs.records], "bound": cs.bound}
    _emit(args, cs.records, columns)
    if not args.quiet and len(args.N) >= 2:
        print(f"# growth fit over last {min(len(args.N), experiments.FIT_WINDOW)} points: {cs.slope!r}",
              file=sys.stderr)
    return EXIT_OK


def cmd_table1(args, spec) -> int:
    _check_ns(spec, args.N)
    recs = experiments.coefficient_table(spec, args.f, args.N, args.precision, workers=args.workers,
                                         progress=_progress(args))
    Ns = sorted({r.N for r in recs})
    columns = {"N": Ns}
    for fid in args.f:
        columns[f"norm_{fid}"] = [next(r.coeff_norm for r in recs if r.N == N and r.f_id == fid) for N in Ns]
    columns["kappa"] = [next(r.kappa for r in recs if r.N == N) for N in Ns]
    _emit(args, recs, columns)
    refused = [r for r in recs if r.note]
    for r in refused:
        print(f"error: {r.f_id} N={r.N}: {r.note}", file=sys.stderr)
    return EXIT_NUMERIC if refused else EXIT_OK


def cmd_error_sweep(args, spec) -> int:
    _check_ns(spec, args.N)
    methods = args.method or ["tsvd"]
    recs = experiments.error_sweep(spec, args.f[0], args.N, args.eps, methods, args.precision,
                                   workers=args.workers, progress=_progress(args))
    _emit(args, recs, experiments.records_plot_columns(recs))
    refused = [r for r in recs if r.note]
    for r in refused:
        print(f"error: N={r.N}: {r.note}", file=sys.stderr)
    return EXIT_NUMERIC if refused else EXIT_OK


def cmd_oversample_sweep(args, spec) -> int:
    _check_ns(spec, args.N)
    gammas = args.gamma or [1.0, 2.0]
    for g in gammas:
        if g < 1:
            raise UsageError(f"oversampling factor must be >= 1, got {g}")
        _check_ns(spec, [int(round(g * N)) for N in args.N])
    recs = experiments.oversample_sweep(spec, args.f[0], gammas, args.N, args.eps[0], workers=args.workers,
                                        progress=_progress(args))
    columns = experiments.records_plot_columns(recs)
    columns.update({k.replace("oversampled", "coeff_norm"): v
                    for k, v in experiments.records_plot_columns(recs, "coeff_norm").items() if k != "N"})
    _emit(args, recs, columns)
    return EXIT_OK


def cmd_project(args, spec) -> int:
    _check_ns(spec, args.N)
    if len(args.N) != 1:
        raise UsageError("project takes a single --N")
    N = args.N[0]
    f = get_target(args.f[0])
    method = (args.method or ["tsvd"])[0]
    eps = args.eps[0]
    report = _progress(args)
    t0 = time.perf_counter()
    if method == "exact":
        bits = experiments.resolve_bits(spec, N, args.precision)
        p = approx.project_exact(spec, N, f, bits)
    elif method == "dual":
        p = approx.project_dual(spec, N, f)
    else:
        bits = _mp.DOUBLE if args.precision == "auto" else args.precision
        if method == "oversampled":
            M = args.M if args.M is not None else int(round((args.gamma or [2.0])[0] * N))
            _check_ns(spec, [M])
            if M < N:
                raise UsageError(f"--M must be at least N={N}")
            p = approx.project_oversampled(spec, M, N, f, eps, bits)
        else:
            p = approx.project_tsvd(spec, N, f, eps, bits)
    err = approx.error_l2(spec, f, p)
    fact = p.factorization
    a = b = k = None
    if fact is not None:
        vals = fact.values_float()
        a, b = float(vals[-1]), float(vals[0])
        k = b / a if a != 0 else math.inf
    ms = (time.perf_counter() - t0) * 1e3
    rec = SweepRecord(spec.family.value, spec.params, f.id, N, p.M, p.eps if method in ("tsvd", "oversampled") else None,
                      method, err, p.coeff_norm(), a, b, k, p.rank_kept, p.bits, ms)
    if report:
        report(N, ms)
    write_csv([rec], args.out, timing=not args.no_timing)
    if args.emit_coeffs:
        write_coefficients(p, args.emit_coeffs)
    if args.dump_matrix:
        sys_ = p.system if p.system is not None else bind_target(
            assemble_rect(spec, p.M or N, N, p.bits), f)
        dump_matrix(sys_, args.dump_matrix)
    return EXIT_OK


def write_coefficients(p: approx.FrameApproximant, path) -> None:
    """``k index re im`` per coefficient under a one-line header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k index re im\n")
        for k, (idx, z) in enumerate(zip(p.indices, p.coefficients)):
            if _mp.is_double(p.bits):
                c = complex(z)
                fh.write(f"{k} {idx} {c.real!r} {c.imag!r}\n")
            else:
                re = z.real if hasattr(z, "imag") else z
                im = z.imag if hasattr(z, "imag") else 0
                digits = math.ceil(p.bits * math.log10(2)) + 1
                fh.write(f"{k} {idx} {format(re, f'.{digits}g')} {format(im, f'.{digits}g')}\n")


def cmd_selftest(args, spec) -> int:
    numbers = set(args.criteria) if args.criteria else None
    outcomes = acceptance.run(numbers, report=lambda s: print(s, flush=True))
    failed = [o for o in outcomes if not o.passed]
    print(f"# {len(outcomes) - len(failed)}/{len(outcomes)} criteria passed", flush=True)
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "gram-spectrum": (cmd_gram_spectrum, "descending eigenvalues of the Gram matrix G_N", _mp.DOUBLE),
    "condition-sweep": (cmd_condition_sweep, "frame bounds and condition numbers along an N list", "auto"),
    "table1": (cmd_table1, "coefficient norms of exact projections and kappa per N", "auto"),
    "error-sweep": (cmd_error_sweep, "L2 errors of exact, truncated-SVD and dual approximations", "auto"),
    "oversample-sweep": (cmd_oversample_sweep, "errors and coefficient norms of oversampled projections", "auto"),
    "project": (cmd_project, "a single approximation, optionally writing its coefficients", "auto"),
    "selftest": (cmd_selftest, "run the acceptance checks", "auto"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("frame and target")
    g.add_argument("--frame", choices=("fe", "augf", "wleg", "augon"), default="fe", help="frame family")
    g.add_argument("--T", type=float, default=2.0, help="extension ratio of the Fourier-extension frame")
    g.add_argument("--K", type=int, default=8, help="number of Legendre elements in the augmented Fourier frame")
    g.add_argument("--alpha", type=float, default=0.5, help="weight exponent of the weighted-Legendre frame")
    g.add_argument("--f", type=_targets, default=["runge25"], help="target function id(s), comma separated")
    s = common.add_argument_group("sweep")
    s.add_argument("--N", type=_int_list, default=[20], help="comma-separated N values")
    s.add_argument("--M", type=int, default=None, help="rows of the oversampled system (project)")
    s.add_argument("--gamma", type=_float_list, default=None, help="oversampling factors M/N")
    s.add_argument("--eps", type=_float_list, default=[1e-4, 1e-8, 1e-12], help="truncation thresholds")
    s.add_argument("--method", type=lambda t: [m.strip() for m in t.split(",") if m.strip()], default=None,
                   help="exact, tsvd, dual (error-sweep) or exact, tsvd, oversampled, dual (project)")
    s.add_argument("--precision", type=_precision, default=None, help="bits, 'double' or 'auto'")
    s.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    s.add_argument("--seed", type=lambda t: int(t, 0), default=experiments.SEED, help="random seed")
    o = common.add_argument_group("output")
    o.add_argument("--out", default=None, help="CSV path (default: standard output)")
    o.add_argument("--plot-data", default=None, help="plot-data path (default: CSV path with .dat suffix)")
    o.add_argument("--dump-matrix", default=None, help="write the Gram matrix as 'row col re im' lines")
    o.add_argument("--emit-coeffs", nargs="?", const="coeffs.txt", default=None,
                   help="write the coefficient vector (project)")
    o.add_argument("--no-timing", action="store_true", help="write NA for wall_time_ms")
    o.add_argument("--quiet", action="store_true", help="suppress progress lines")
    o.add_argument("--criteria", type=_int_list, default=None, help="subset of acceptance checks (selftest)")

    parser = argparse.ArgumentParser(prog="frameward", description="Function approximation in redundant frames.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, (_, help_, default_precision) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(precision=default_precision)
        _apply_env(p)
    return parser


def _apply_env(parser: argparse.ArgumentParser) -> None:
    """Use ``FRAMEWARD_<DEST>`` as the default of each option when set."""
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        value = os.environ.get(ENV_PREFIX + action.dest.upper())
        if value is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            parser.set_defaults(**{action.dest: value.strip().lower() in _TRUE})
        else:
            parser.set_defaults(**{action.dest: value})


def _convert_env(parser, args) -> None:
    # argparse only converts string defaults declared with add_argument
    sub = parser._subparsers._group_actions[0].choices[args.command]
    for action in sub._actions:
        v = getattr(args, action.dest, None)
        if isinstance(v, str) and action.type is not None and action.option_strings:
            try:
                setattr(args, action.dest, action.type(v))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                sub.error(f"environment variable {ENV_PREFIX}{action.dest.upper()}: {exc}")
        if action.choices is not None and action.option_strings and getattr(args, action.dest) not in action.choices:
            sub.error(f"environment variable {ENV_PREFIX}{action.dest.upper()}: invalid choice "
                      f"{getattr(args, action.dest)!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _convert_env(parser, args)
    handler = COMMANDS[args.command][0]
    try:
        spec = _spec(args)
        if args.method:
            allowed = {"error-sweep": experiments.METHODS,
                       "project": ("exact", "tsvd", "oversampled", "dual")}.get(args.command)
            bad = [m for m in args.method if allowed is not None and m not in allowed]
            if bad:
                raise UsageError(f"unknown method(s) {', '.join(bad)}")
        if any(e <= 0 for e in args.eps):
            raise UsageError("thresholds must be positive")
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        return handler(args, spec)
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"frameward {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, QuadratureConvergenceError, OSError) as exc:
        print(f"frameward {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
