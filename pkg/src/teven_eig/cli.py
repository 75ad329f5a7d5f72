"""Batch command line: generate problems, solve them, validate reports.

Exit codes of ``solve``: 0 success, 2 no convergence (the partial result is
still written), 3 input error, 4 shift on the spectrum after all retries.
``validate`` exits with 1 when a value deviates by more than ``--tol``.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import matpoly as mp
from .densekernels import dense_polyeig_oracle
from .errors import NoConvergence, OracleCapExceeded, ShiftOnSpectrum, TevenError
from .krylovschur import STRATEGIES, SolverConfig, run

EXIT_OK = 0
EXIT_DEVIATION = 1
EXIT_NO_CONVERGENCE = 2
EXIT_INPUT = 3
EXIT_SHIFT = 4

log = logging.getLogger("teven_eig")


def parse_complex(text):
    """Parse ``a+bi``, ``a+bj``, ``bi`` or ``a`` into a complex number."""
    s = str(text).strip().replace(" ", "").replace("I", "j").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def encode_complex(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def decode_complex(d):
    return complex(float(d["re"]), float(d["im"]))


def _jsonable(obj):
    """Recursively replace complex and numpy scalars by JSON types."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return encode_complex(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def build_report(result, cfg, reverse=False, converged=True):
    """JSON-ready run report; eigenvalues sorted by decreasing magnitude."""
    vals = list(result.eigenvalues())
    if reverse:
        vals = [1.0 / z for z in vals if z != 0]
    vals.sort(key=lambda z: (-abs(z), -z.real, -z.imag))
    config = {
        "num_eigs": cfg.M,
        "extension": cfg.extension,
        "shift": cfg.initial_shift,
        "strategy": cfg.strategy,
        "target": cfg.target,
        "tol_lock": cfg.tol_lock,
        "shift_threshold": cfg.shift_change_threshold,
        "max_cycles": cfg.max_cycles,
        "reverse": reverse,
    }
    report = {
        "config": config,
        "converged": converged,
        "eigenvalues": vals,
        "infinite_count": result.infinite_count,
        "cycles": result.cycles,
        "factorizations": result.factorizations,
        "shifts": result.shifts,
        "elapsed": result.elapsed,
        "trace": result.diagnostics,
    }
    return _jsonable(report)


def report_to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im"])
    for z in report["eigenvalues"]:
        w.writerow([repr(float(z["re"])), repr(float(z["im"]))])
    return buf.getvalue()


def read_report_values(path):
    """Eigenvalues from a JSON or CSV report."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return [decode_complex(d) for d in data.get("eigenvalues", [])]
    rows = list(csv.DictReader(io.StringIO(text)))
    return [complex(float(r["re"]), float(r["im"])) for r in rows]


def compare_to_oracle(values, oracle):
    """Relative deviation of each value from its nearest oracle eigenvalue."""
    rows = []
    oracle = np.asarray(oracle, dtype=complex)
    for z in values:
        if oracle.size == 0:
            rows.append((z, complex("nan"), math.inf))
            continue
        k = int(np.argmin(np.abs(oracle - z)))
        ref = complex(oracle[k])
        dev = abs(z - ref) / abs(ref) if ref != 0 else abs(z - ref)
        rows.append((z, ref, dev))
    return rows


def digits(dev):
    if dev <= 0:
        return 16.0
    return max(0.0, min(16.0, -math.log10(dev)))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args):
    try:
        if args.kind == "butterfly":
            c = args.constants if args.constants else mp.BUTTERFLY_CONSTANTS
            P = mp.generate_butterfly(args.m, c)
        else:
            P = mp.generate_gyroscopic(args.n, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    path = mp.write_polynomial(P, args.out)
    print(json.dumps({"manifest": str(path), "n": P.n, "degree": P.deg}))
    return EXIT_OK


def _config(args):
    trace = None
    if args.trace or os.environ.get("TEVEN_EIG_TRACE") == "1":
        def trace(record):
            print(json.dumps(_jsonable(record)), file=sys.stderr)
    return SolverConfig(M=args.num_eigs, extension=args.extension, initial_shift=args.shift,
                        strategy=args.strategy, target=args.target or
                        (args.shift if args.strategy == "target" else None),
                        tol_lock=args.tol_lock, shift_change_threshold=args.shift_threshold,
                        max_cycles=args.max_cycles, trace=trace)


def _emit_report(report, fmt):
    if fmt == "csv":
        sys.stdout.write(report_to_csv(report))
    else:
        sys.stdout.write(json.dumps(report, indent=2) + "\n")


def cmd_solve(args):
    try:
        P = mp.read_polynomial(args.problem)
        if args.reverse:
            P = mp.reversal(P)
        cfg = _config(args)
    except (TevenError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = run(P, cfg)
    except NoConvergence as exc:
        print(f"warning: {exc}; reporting the values locked so far", file=sys.stderr)
        if exc.result is not None:
            _emit_report(build_report(exc.result, cfg, args.reverse, converged=False), args.format)
        return EXIT_NO_CONVERGENCE
    except ShiftOnSpectrum as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHIFT
    except (TevenError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit_report(build_report(result, cfg, args.reverse), args.format)
    return EXIT_OK


def cmd_validate(args):
    try:
        P = mp.read_polynomial(args.problem)
        values = read_report_values(args.report)
    except (TevenError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not values:
        print("warning: report holds no eigenvalues; nothing to compare", file=sys.stderr)
        print(json.dumps({"count": 0, "max_deviation": 0.0, "min_digits": None, "passed": True}))
        return EXIT_OK
    try:
        oracle, _ = dense_polyeig_oracle(P)
    except OracleCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rows = compare_to_oracle(values, oracle)
    worst = max(dev for _, _, dev in rows)
    for z, ref, dev in rows:
        flag = "  <-- deviates" if dev > args.tol else ""
        print(f"{z.real:+.16e} {z.imag:+.16e}j  rel.dev {dev:.2e}  digits {digits(dev):5.2f}{flag}")
    passed = worst <= args.tol
    summary = {"count": len(rows), "max_deviation": worst,
               "min_digits": min(digits(dev) for _, _, dev in rows), "passed": passed}
    print(json.dumps(summary))
    return EXIT_OK if passed else EXIT_DEVIATION


def build_parser():
    parser = argparse.ArgumentParser(prog="teven-eig",
                                     description="Rational Krylov eigensolver for T-even matrix polynomials")
    parser.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a test problem (Matrix Market + manifest)")
    g.add_argument("kind", choices=("butterfly", "gyroscopic"))
    g.add_argument("--m", type=int, default=10, help="butterfly grid size (order m**2)")
    g.add_argument("--constants", type=float, nargs=10, default=None,
                   help="butterfly constants c01 c02 ... c41 c42")
    g.add_argument("--n", type=int, default=30, help="gyroscopic order")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="manifest path")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="compute eigenvalues of a stored problem")
    s.add_argument("problem", help="manifest path")
    s.add_argument("--num-eigs", type=int, default=6, help="number M of +-mu pairs")
    s.add_argument("--extension", type=int, default=None)
    s.add_argument("--shift", type=parse_complex, default=0.5 + 2j, help="initial shift, e.g. 0.5+2i")
    s.add_argument("--strategy", choices=STRATEGIES, default="lazy")
    s.add_argument("--target", type=parse_complex, default=None)
    s.add_argument("--tol-lock", type=float, default=1e-9)
    s.add_argument("--shift-threshold", type=float, default=1e-5)
    s.add_argument("--max-cycles", type=int, default=200)
    s.add_argument("--trace", action="store_true", help="stream cycle records to stderr")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--reverse", action="store_true",
                   help="solve the reversal and report reciprocals (smallest |mu|)")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="compare a report with the dense oracle")
    v.add_argument("problem", help="manifest path")
    v.add_argument("report", help="JSON or CSV report")
    v.add_argument("--tol", type=float, default=1e-8)
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
