"""Command-line entry point.

Exit codes
----------
solve:     0 converged, 2 iteration limit reached, 1 input error
check:     0 pass, 2 gap or feasibility check failed, 3 instance too large for the oracle, 1 input error
bench:     0 ok, 1 input error
partition: 0 ok, 1 input error
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict

from .admm import SolverConfig, kkt_check, solve
from .decomposition import decompose
from .errors import LinDistError, OracleSizeError
from .feeder import load_feeder
from .lp import assemble_lp
from .oracle import solve_lp_reference

EXIT_OK, EXIT_INPUT, EXIT_MAXITER, EXIT_ORACLE_SIZE = 0, 1, 2, 3
EXIT_CHECK_FAILED = 2
BENCH_COLUMNS = ("workers", "precision", "avg_us_global", "avg_us_local", "avg_us_dual", "avg_us_total")


def _csv_list(cast):
    def parse(text):
        try:
            return [cast(v) for v in text.split(",") if v]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _add_solver_flags(p):
    p.add_argument("--input", required=True, help="feeder file")
    p.add_argument("--rho", type=float, default=100.0)
    p.add_argument("--eps-rel", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=50000)
    p.add_argument("--precision", choices=("single", "double"), default="double")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--partition", choices=("component", "single"), default="component")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lindistadmm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a feeder with distributed ADMM")
    _add_solver_flags(p)
    p.add_argument("--trace", help="write per-iteration trace CSV")
    p.add_argument("--solution", help="write solution CSV")

    p = sub.add_parser("check", help="compare ADMM against the reference LP solver")
    _add_solver_flags(p)
    p.add_argument("--tol", type=float, default=1e-2)

    p = sub.add_parser("bench", help="time global/local/dual phases over a fixed iteration budget")
    p.add_argument("--input", required=True)
    p.add_argument("--workers-list", type=_csv_list(int), default=[1, 2, 4])
    p.add_argument("--precision-list", type=_csv_list(str), default=["double", "single"])
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--rho", type=float, default=100.0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--partition", choices=("component", "single"), default="component")
    p.add_argument("--output", help="bench CSV path (default: stdout)")

    p = sub.add_parser("partition", help="print subsystem size statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--partition", choices=("component", "single"), default="component")
    p.add_argument("--output", help="write per-subsystem CSV")
    return parser


def _prepare(path, partition):
    model = load_feeder(path)
    lp = assemble_lp(model)
    return model, lp, decompose(lp, model, partition)


def _config(args) -> SolverConfig:
    return SolverConfig(rho=args.rho, eps_rel=args.eps_rel, max_iter=args.max_iter, precision=args.precision,
                        workers=args.workers, deterministic=args.deterministic)


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    cfg = _config(args)
    model, lp, dlp = _prepare(args.input, args.partition)
    sol = solve(dlp, cfg)
    wall = time.perf_counter() - t0
    if args.trace:
        sol.trace.to_csv(args.trace)
    if args.solution:
        sol.write(args.solution, lp.variables)
    manifest = {
        "input": str(args.input),
        "config": asdict(cfg),
        "partition": dlp.stats(),
        "status": sol.status,
        "objective": sol.objective,
        "iterations": sol.iterations,
        "wall_time_s": wall,
    }
    print(json.dumps(manifest, indent=2))
    return EXIT_OK if sol.status == "Converged" else EXIT_MAXITER


def cmd_check(args) -> int:
    cfg = _config(args)
    model, lp, dlp = _prepare(args.input, args.partition)
    ref = solve_lp_reference(lp)
    if ref.status != "Optimal":
        print(f"reference solver status: {ref.status}")
        return EXIT_CHECK_FAILED
    sol = solve(dlp, cfg)
    gap = abs(sol.objective - ref.objective) / max(abs(ref.objective), 1e-12)
    rep = kkt_check(lp, sol.x, args.tol)
    ok = gap <= args.tol and rep.passed and sol.status == "Converged"
    rows = [
        ("admm status", sol.status),
        ("admm iterations", sol.iterations),
        ("admm objective", f"{sol.objective:.10g}"),
        ("oracle objective", f"{ref.objective:.10g}"),
        ("relative gap", f"{gap:.3e}"),
        ("max |Ax - b|", f"{rep.eq_violation:.3e}"),
        ("max bound violation", f"{rep.bound_violation:.3e}"),
        ("tolerance", f"{args.tol:g}"),
        ("result", "PASS" if ok else "FAIL"),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_bench(args) -> int:
    model, lp, dlp = _prepare(args.input, args.partition)
    records, summary = [], []
    for precision in args.precision_list:
        for workers in args.workers_list:
            cfg = SolverConfig(rho=args.rho, max_iter=args.iters, precision=precision, workers=workers,
                               deterministic=args.deterministic)
            sol = solve(dlp, cfg, fixed_iterations=True)
            k = max(len(sol.trace), 1)
            g = sum(sol.trace.column("t_global_us")) / k
            lo = sum(sol.trace.column("t_local_us")) / k
            du = sum(sol.trace.column("t_dual_us")) / k
            records.append((workers, precision, g, lo, du, g + lo + du))
            summary.append({"workers": workers, "precision": precision, "iterations": sol.iterations,
                            "objective": sol.objective})
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in records:
            w.writerow([r[0], r[1]] + [f"{v:.3f}" for v in r[2:]])
    finally:
        if args.output:
            fh.close()
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_partition(args) -> int:
    model, lp, dlp = _prepare(args.input, args.partition)
    if args.output:
        dlp.write_partition_csv(args.output)
    print(json.dumps({"input": str(args.input), "lp": {"m": lp.m, "n": lp.n}, **dlp.stats()}, indent=2))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "bench": cmd_bench, "partition": cmd_partition}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_SIZE
    except (OSError, ValueError, LinDistError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
