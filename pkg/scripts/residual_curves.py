"""Primal and dual residual histories in single and double precision, written to one CSV.

Columns: iter, then pres/dres/eps_prim/eps_dual for each precision. Rows stop at
the longer of the two runs; the shorter run's cells are left empty.
"""
import argparse
import csv

from lindistadmm import SolverConfig, assemble_lp, decompose, fixture_path, load_feeder, solve

KEYS = ("pres", "dres", "eps_prim", "eps_dual")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--input", default=str(fixture_path("four_bus")))
    ap.add_argument("--rho", type=float, default=100.0)
    ap.add_argument("--output", default="residuals.csv")
    args = ap.parse_args()

    model = load_feeder(args.input)
    lp = assemble_lp(model)
    dlp = decompose(lp, model, "component")
    runs = {p: solve(dlp, SolverConfig(rho=args.rho, precision=p, workers=1)) for p in ("double", "single")}
    cols = {p: {k: runs[p].trace.column(k) for k in KEYS} for p in runs}
    length = max(len(r.trace) for r in runs.values())
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter"] + [f"{k}_{p}" for p in runs for k in KEYS])
        for t in range(length):
            row = [t + 1]
            for p in runs:
                row += [repr(float(cols[p][k][t])) if t < len(runs[p].trace) else "" for k in KEYS]
            w.writerow(row)
    for p, r in runs.items():
        print(f"{p}: {r.status} in {r.iterations} iterations, objective {r.objective:.8f}")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
