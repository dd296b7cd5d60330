"""Command-line interface: ``list-problems``, ``solve`` and ``bench``."""
from __future__ import annotations

import argparse
import csv
import sys

from .bench import DEFAULT_TAUS, load_collection, parse_solver_file, parse_solver_lines, run_campaign
from .problems import COLLECTIONS, ProblemLookupError, get_problem, manifest, problem_names
from .solvers import SolverConfig, solve
from .subspace import SUBSPACE_KINDS


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _taus(text: str) -> tuple:
    vals = tuple(float(t) for t in text.split(",") if t.strip())
    if not vals or not all(0 < t < 1 for t in vals):
        raise argparse.ArgumentTypeError("tau values must lie in (0, 1)")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfbgn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("list-problems", help="print the problem manifest as CSV")
    lp.add_argument("--collection", default=None,
                    help=f"collection name ({', '.join(sorted(COLLECTIONS))}) or CSV of name,n")
    lp.add_argument("--dim", type=int, default=None, help="instantiate every family at this n")
    lp.add_argument("--out", default="-", help="output CSV path (default stdout)")

    sp = sub.add_parser("solve", help="run one solver on one problem")
    sp.add_argument("--problem", required=True, help=f"one of {', '.join(problem_names())}")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--p", type=int, default=None, help="subspace dimension (default n)")
    sp.add_argument("--budget-gradients", type=float, default=100.0,
                    help="evaluation budget in units of n+1")
    sp.add_argument("--runtime-cap-sec", type=float, default=None)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--algorithm", choices=("dfbgn", "rsdfo-gn"), default="dfbgn")
    sp.add_argument("--subspace", choices=SUBSPACE_KINDS, default="orthonormal")
    sp.add_argument("--hash-s", type=int, default=3)
    sp.add_argument("--p-drop", default="mixed", help="'mixed' or a constant count")
    sp.add_argument("--theory-strict", action="store_true",
                    help="use gamma_inc = gamma_inc_bar = 8")
    sp.add_argument("--out", default=None, help="history CSV path")
    sp.add_argument("--geometry-out", default=None,
                    help="per-iteration interpolation set diagnostics (distance, theta, Lambda)")

    bp = sub.add_parser("bench", help="run a benchmark campaign and write profiles")
    bp.add_argument("--collection", default="cr-small")
    bp.add_argument("--solvers", default=None, help="solver spec file (algorithm,p_fraction,subspace,extra_flags)")
    bp.add_argument("--seeds", type=int, default=10, help="number of seeds (0..seeds-1)")
    bp.add_argument("--budget-gradients", type=float, default=100.0)
    bp.add_argument("--runtime-cap-sec", type=float, default=None)
    bp.add_argument("--tau", type=_taus, default=DEFAULT_TAUS)
    bp.add_argument("--jobs", type=int, default=1)
    bp.add_argument("--metric", choices=("evals", "wall_ms"), default="evals")
    bp.add_argument("--out-dir", default="bench_out")
    return parser


def _cmd_list(args) -> int:
    if args.collection:
        items = load_collection(args.collection)
    else:
        items = []
        for name in problem_names():
            n = args.dim or (12 if name == "powellse" else 10)
            if name == "powellse" and n % 4:
                n += 4 - n % 4
            if name == "rosenbrock" and n % 2:
                n += 1
            items.append((name, n))
    rows = manifest(items)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(["name", "n", "m", "two_f0", "two_fstar"])
        for r in rows:
            fstar = "" if r["two_fstar"] is None else repr(r["two_fstar"])
            w.writerow([r["name"], r["n"], r["m"], repr(r["two_f0"]), fstar])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_solve(args) -> int:
    problem = get_problem(args.problem, args.dim)
    policy = args.p_drop if args.p_drop == "mixed" else int(args.p_drop)
    kwargs = dict(
        p=args.p,
        seed=args.seed,
        max_evals=max(1, int(args.budget_gradients * (problem.n + 1))),
        max_runtime=args.runtime_cap_sec,
        subspace=args.subspace,
        hash_s=args.hash_s,
        p_drop_policy=policy,
        record_geometry=args.geometry_out is not None,
    )
    cfg = SolverConfig.theory_strict(**kwargs) if args.theory_strict else SolverConfig(**kwargs)
    if args.algorithm == "dfbgn" and args.subspace != "orthonormal":
        print("note: dfbgn always uses orthonormal directions; --subspace ignored", file=sys.stderr)
    if args.algorithm == "rsdfo-gn":
        for msg in cfg.theory_warnings():
            print(f"warning: {msg}", file=sys.stderr)
    res = solve(problem, cfg, args.algorithm)
    if args.out:
        res.write_history(args.out)
    if args.geometry_out:
        res.write_geometry(args.geometry_out)
    print(f"problem={problem.name} n={problem.n} algorithm={args.algorithm} p={res.config.p} seed={args.seed}")
    print(f"status={res.status} evals={res.n_evals} iters={res.n_iters}")
    print(f"two_f0={2 * res.f0!r} two_f_best={res.two_f_best!r}")
    return 0


def _cmd_bench(args) -> int:
    if args.solvers:
        specs = parse_solver_file(args.solvers)
    else:
        specs = parse_solver_lines(["dfbgn,1.0,orthonormal,", "dfbgn,0.1,orthonormal,"])
    if args.seeds < 1:
        raise ValueError("--seeds must be positive")

    def progress(rec):
        print(f"{rec.solver_id} {rec.problem_id} n={rec.n} seed={rec.seed} "
              f"status={rec.status} evals={rec.n_evals}", file=sys.stderr)

    res = run_campaign(args.collection, specs, range(args.seeds), args.budget_gradients,
                       args.runtime_cap_sec, args.tau, args.jobs, args.out_dir, args.metric, progress)
    print(f"{len(res.records)} runs written to {args.out_dir}")
    for tau in res.taus:
        for solver, fr in res.data[tau].items():
            print(f"tau={tau:g} {solver}: solved {fr[-1]:.3f} of instances within the budget window")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list-problems":
            return _cmd_list(args)
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_bench(args)
    except (ProblemLookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
