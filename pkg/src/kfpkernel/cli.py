"""Command-line interface: ``kfpkernel {eval,solve,verify,info}``.

Exit codes: 0 success, 1 a verification check failed, 2 unparseable input,
3 invalid problem or datum, 4 numerical failure, 5 horizon exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .cauchy import BoundedCallable, GaussianGrowth, SolveConfig, horizon, solve_at
from .errors import (
    ExpressionError,
    HorizonExceeded,
    KFPError,
    NumericError,
    ProblemFileError,
    UnsupportedDimension,
    ValidationError,
)
from .expr import compile_expression
from .files import load_datum, read_raw_problem
from .kernel import derivatives, log_gamma
from .operator import BlockStructure, CoefficientTrack, kalman_hypoelliptic, nu_of
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAILED, EXIT_PARSE, EXIT_INVALID, EXIT_NUMERIC, EXIT_HORIZON = range(6)
CHUNK = 256


class UsageError(Exception):
    """Malformed command-line value (exit code 2)."""


# -- argument helpers ----------------------------------------------------------

def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None


def parse_spacetime(text: str, N: int, what: str = "point") -> tuple[np.ndarray, float]:
    """``"x1,...,xN@t"`` -> (x, t)."""
    if text.count("@") != 1:
        raise UsageError(f"{what} must look like 'x1,...,xN@t', got {text!r}")
    xs, ts = text.split("@")
    x = np.array(_floats(xs, what))
    if x.size != N:
        raise UsageError(f"{what} {text!r} has {x.size} coordinates, operator has N = {N}")
    t = _floats(ts, what)
    if len(t) != 1:
        raise UsageError(f"{what} {text!r} needs exactly one time")
    return x, t[0]


def parse_grid(text: str, N: int) -> np.ndarray:
    """``"lo:hi:n,lo:hi:n"`` (one triple per coordinate) -> (M, N) points, C order."""
    parts = text.split(",")
    if len(parts) != N:
        raise UsageError(f"grid needs {N} 'lo:hi:n' triples, got {text!r}")
    axes = []
    for p in parts:
        try:
            lo, hi, n = p.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
        except ValueError:
            raise UsageError(f"cannot parse grid axis {p!r}; expected lo:hi:n") from None
        if n < 1 or (n > 1 and not hi > lo):
            raise UsageError(f"grid axis {p!r} must have n >= 1 and hi > lo")
        axes.append(np.linspace(lo, hi, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def read_points_file(path: str, N: int) -> tuple[np.ndarray, np.ndarray]:
    """CSV with header ``x1..xN,t``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise UsageError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    expected = [f"x{i + 1}" for i in range(N)] + ["t"]
    if header != expected:
        raise UsageError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError:
        raise UsageError(f"{path}: non-numeric entry") from None
    if data.size == 0:
        return np.zeros((0, N)), np.zeros(0)
    if data.shape[1] != N + 1:
        raise UsageError(f"{path}: every row needs {N + 1} entries")
    return data[:, :N], data[:, N]


def _collect_points(args, N) -> tuple[np.ndarray, np.ndarray]:
    """Points and times from --point / --points-file / --grid + --times, in that order."""
    xs, ts = [], []
    for p in args.point or []:
        x, t = parse_spacetime(p, N)
        xs.append(x[None])
        ts.append(np.array([t]))
    if args.points_file:
        x, t = read_points_file(args.points_file, N)
        xs.append(x)
        ts.append(t)
    if args.grid:
        if not args.times:
            raise UsageError("--grid needs --times")
        G = parse_grid(args.grid, N)
        for t in _floats(args.times, "times"):
            xs.append(G)
            ts.append(np.full(len(G), t))
    if not xs:
        raise UsageError("no evaluation points: give --point, --points-file or --grid with --times")
    return np.concatenate(xs), np.concatenate(ts)


def _threads(n) -> int:
    return max(1, n if n else (os.cpu_count() or 1))


def _parallel_rows(func, n_rows: int, threads: int) -> list:
    """Apply ``func(lo, hi)`` to row chunks and concatenate the results in order."""
    bounds = [(i, min(i + CHUNK, n_rows)) for i in range(0, n_rows, CHUNK)]
    if threads == 1 or len(bounds) <= 1:
        parts = [func(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    return [row for part in parts for row in part]


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(header, rows, path):
    out = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    finally:
        if path:
            out.close()


# -- commands ------------------------------------------------------------------

def cmd_eval(args) -> int:
    spec = read_raw_problem(args.problem).build()
    N = spec.N
    x0, t0 = parse_spacetime(args.pole, N, "pole")
    X, T = _collect_points(args, N)

    def rows_for(lo, hi):
        rows = []
        for x, t in zip(X[lo:hi], T[lo:hi]):
            lg = float(log_gamma(spec, x, float(t), x0, t0))
            row = [*x, t, np.exp(lg)]
            if args.log:
                row.append(lg)
            if args.derivatives:
                if t > t0:
                    d = derivatives(spec, x, float(t), x0, t0)
                    row.extend(d.grad_x.tolist())
                    row.extend(d.hess_x.reshape(-1).tolist())
                else:
                    row.extend([0.0] * (N + N * N))
            rows.append(row)
        return rows

    rows = _parallel_rows(rows_for, len(X), _threads(args.threads))
    header = [f"x{i + 1}" for i in range(N)] + ["t", "gamma"]
    if args.log:
        header.append("log_gamma")
    if args.derivatives:
        header += [f"grad_x{i + 1}" for i in range(N)]
        header += [f"hess_x{i + 1}x{j + 1}" for i in range(N) for j in range(N)]
    _write_csv(header, rows, args.output)
    return EXIT_OK


def _load_datum_arg(args, N):
    if args.datum and args.expr:
        raise UsageError("give either --datum or --expr, not both")
    if args.datum:
        return load_datum(args.datum, N)
    if args.expr:
        expr = compile_expression(args.expr, N)
        if args.alpha is not None:
            return GaussianGrowth(expr, args.alpha)
        return BoundedCallable(expr)
    raise UsageError("solve needs --datum PATH or --expr EXPRESSION")


def cmd_solve(args) -> int:
    spec = read_raw_problem(args.problem).build()
    N = spec.N
    f = _load_datum_arg(args, N)
    cfg = SolveConfig(hermite_order=args.hermite_order)
    if not args.times:
        raise UsageError("solve needs --times")
    times = _floats(args.times, "times")
    if any(not t > args.t0 for t in times):
        raise UsageError(f"all --times must exceed --t0 = {args.t0}")
    if isinstance(f, GaussianGrowth):
        h = horizon(spec, f.alpha, args.t0, cfg)
        bad = [t for t in times if t - args.t0 >= h.usable]
        if bad:
            raise HorizonExceeded(bad[0] - args.t0, h.usable, h.raw)
    if args.grid:
        G = parse_grid(args.grid, N)
    elif args.point:
        G = np.array([_floats(p, "point") for p in args.point])
        if G.shape[1] != N:
            raise UsageError(f"--point needs {N} coordinates")
    else:
        raise UsageError("solve needs --grid or --point")
    threads = _threads(args.threads)
    rows = []
    for t in times:
        def rows_for(lo, hi, t=t):
            u = np.atleast_1d(solve_at(spec, f, args.t0, G[lo:hi], t, cfg))
            return [[*x, t, v] for x, v in zip(G[lo:hi], u)]

        rows.extend(_parallel_rows(rows_for, len(G), threads))
    _write_csv([f"x{i + 1}" for i in range(N)] + ["t", "u"], rows, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = read_raw_problem(args.problem).build()
    report = run_suite(spec, args.suite, seed=args.seed, samples=args.samples)
    width = max([len(c.check_id) for c in report.checks] + [5])
    print(f"{'check':<{width}}  {'samples':>8}  {'worst':>10}  {'tolerance':>10}  result")
    for c in report.checks:
        print(f"{c.check_id:<{width}}  {c.samples:>8}  {c.worst:>10.3e}  {c.tolerance:>10.3e}  "
              f"{'PASS' if c.passed else 'FAIL'}")
    print(f"suite {args.suite} on {spec.name or args.problem}: "
          f"{'PASS' if report.passed else 'FAIL'} (seed {args.seed})")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, default=float)
            fh.write("\n")
    return EXIT_OK if report.passed else EXIT_FAILED


def describe(raw) -> list[str]:
    """Human-readable structure summary; works even when the block ranks fail."""
    structure = BlockStructure.from_blocks(raw.blocks)
    hyp = kalman_hypoelliptic(raw.B, raw.q)
    nu = raw.nu if raw.nu is not None else nu_of(CoefficientTrack(raw.breakpoints, raw.pieces))
    lines = [
        f"N={raw.N}, q={raw.q}, blocks m=({','.join(map(str, structure.m))}), "
        f"Tr B={float(np.trace(raw.B)):g}, coefficient pieces={len(raw.pieces)}",
        f"κ={structure.kappa}, σ=({','.join(map(str, structure.sigma))}), Q={structure.Q}, "
        f"ν={nu:g}, hypoelliptic: {'yes' if hyp else 'no'}",
    ]
    return lines


def cmd_info(args) -> int:
    raw = read_raw_problem(args.problem)
    lines = describe(raw)
    try:
        raw.build()
    except ValidationError as exc:
        if kalman_hypoelliptic(raw.B, raw.q):
            raise
        lines.append(f"structure check: {exc}")
    else:
        lines.append("structure check: ok")
    print("\n".join(lines))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True,
                        help="problem JSON file, or builtin:<name> for a bundled fixture")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--threads", type=int, default=0, help="worker threads (0 = all cores)")

    p = argparse.ArgumentParser(prog="kfpkernel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate the fundamental solution")
    e.add_argument("--pole", required=True, help="pole as 'x1,...,xN@t0'")
    e.add_argument("--point", action="append", help="evaluation point 'x1,...,xN@t' (repeatable)")
    e.add_argument("--points-file", help="CSV file with header x1..xN,t")
    e.add_argument("--grid", help="'lo:hi:n' per coordinate, comma separated (use --grid=...)")
    e.add_argument("--times", help="comma-separated times for --grid")
    e.add_argument("--derivatives", action="store_true", help="add gradient and Hessian in x")
    e.add_argument("--log", action="store_true", help="add log_gamma (-inf where gamma is 0)")
    e.add_argument("--output", help="CSV path (default stdout)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("solve", parents=[common], help="solve the Cauchy problem")
    s.add_argument("--datum", help="datum JSON file")
    s.add_argument("--expr", help="inline bounded datum expression over x1..xN")
    s.add_argument("--alpha", type=float, help="treat --expr as a Gaussian-growth datum with this alpha")
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--times", help="comma-separated output times")
    s.add_argument("--grid", help="'lo:hi:n' per coordinate, comma separated (use --grid=...)")
    s.add_argument("--point", action="append", help="output point 'x1,...,xN' (repeatable)")
    s.add_argument("--hermite-order", type=int, default=SolveConfig.hermite_order)
    s.add_argument("--output", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", choices=["all", *SUITES], default="all")
    v.add_argument("--samples", type=int, help="override the per-check sample count")
    v.add_argument("--report", help="write the full report as JSON")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("info", parents=[common], help="print the operator structure")
    i.set_defaults(func=cmd_info)
    return p


def _describe_error(exc) -> str:
    name = type(exc).__name__
    text = str(exc)
    return text if text.startswith(name) else f"{name}: {text}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ProblemFileError, ExpressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HorizonExceeded as exc:
        print(f"error: {_describe_error(exc)}", file=sys.stderr)
        print(f"horizon: usable {exc.horizon:.10g}, raw {exc.raw_horizon:.10g}", file=sys.stderr)
        return EXIT_HORIZON
    except (ValidationError, UnsupportedDimension, ValueError) as exc:
        print(f"error: {_describe_error(exc)}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, KFPError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {_describe_error(exc)}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
