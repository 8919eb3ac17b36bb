"""Solve the bundled 4-bus feeder with ADMM and compare against the reference LP."""
import argparse
import time

from lindistadmm import SolverConfig, assemble_lp, decompose, fixture_path, kkt_check, load_feeder, solve
from lindistadmm.oracle import solve_lp_reference


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, nargs="+", default=[10.0, 100.0, 1000.0])
    ap.add_argument("--eps-rel", type=float, default=1e-3)
    ap.add_argument("--partition", choices=("component", "single"), default="component")
    ap.add_argument("--trace", help="trace CSV for the last rho")
    args = ap.parse_args()

    model = load_feeder(fixture_path("four_bus"))
    lp = assemble_lp(model)
    dlp = decompose(lp, model, args.partition)
    ref = solve_lp_reference(lp)
    print(f"LP: m={lp.m} n={lp.n}  partition={args.partition} S={dlp.S}  reference objective {ref.objective:.8f}")
    print(f"{'rho':>8} {'precision':>9} {'status':>9} {'iters':>6} {'objective':>12} {'rel gap':>9} {'max|Ax-b|':>9} {'s':>6}")
    for rho in args.rho:
        for precision in ("double", "single"):
            t0 = time.perf_counter()
            sol = solve(dlp, SolverConfig(rho=rho, eps_rel=args.eps_rel, precision=precision, workers=1))
            dt = time.perf_counter() - t0
            gap = abs(sol.objective - ref.objective) / abs(ref.objective)
            rep = kkt_check(lp, sol.x, 1e-2)
            print(f"{rho:>8g} {precision:>9} {sol.status:>9} {sol.iterations:>6} {sol.objective:>12.6f} "
                  f"{gap:>9.2e} {rep.eq_violation:>9.2e} {dt:>6.2f}")
    if args.trace:
        sol.trace.to_csv(args.trace)


if __name__ == "__main__":
    main()
