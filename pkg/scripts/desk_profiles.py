#!/usr/bin/env python3
"""Desk-scale campaign: DFBGN with p = n versus p = n/10 on the cr-desk collection.

Writes runs.csv, timings.csv and data/performance profiles (CSV and gnuplot .dat)
to --out-dir and prints the fraction of instances solved per accuracy level.
"""
import argparse
import os
import sys
from pathlib import Path

from dfbgn.bench import DEFAULT_TAUS, parse_solver_file, run_campaign

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", default="cr-desk")
    ap.add_argument("--solvers", default=str(HERE / "configs" / "desk_solvers.csv"))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--budget-gradients", type=float, default=100.0)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out-dir", default="desk_out")
    args = ap.parse_args(argv)

    specs = parse_solver_file(args.solvers)
    res = run_campaign(args.collection, specs, range(args.seeds), args.budget_gradients,
                       taus=DEFAULT_TAUS, jobs=args.jobs, out_dir=args.out_dir,
                       progress=lambda r: print(f"  {r.solver_id:<28} {r.problem_id:<10} seed={r.seed} "
                                                f"evals={r.n_evals} {r.status}", file=sys.stderr))
    print(f"{'tau':>8}  " + "  ".join(f"{s.solver_id:>26}" for s in specs))
    for tau in res.taus:
        print(f"{tau:>8g}  " + "  ".join(f"{res.data[tau][s.solver_id][-1]:>26.2f}" for s in specs))
    print(f"results in {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
