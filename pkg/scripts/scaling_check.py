#!/usr/bin/env python3
"""Model accuracy versus radius: max residual-model error on sampled ball points.

For a fully linear interpolation model the error is O(Delta^2), so halving the
radius should shrink it by about a factor of 4.
"""
import argparse

import numpy as np

from dfbgn.interpolation import fresh_set
from dfbgn.problems import get_problem, problem_names
from dfbgn.subspace import orthonormal_complement


def ball_error(prob, directions, delta, unit_pts):
    x = prob.x0
    iset = fresh_set(x, prob.residuals(x), directions, delta, prob.residuals)
    iset.factorize()
    model = iset.build_model()
    return max(np.linalg.norm(prob.residuals(x + iset.Q @ (delta * u)) - model.residual_model(delta * u))
               for u in unit_pts)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    radii = (1e-1, 1e-2, 1e-3)
    print(f"{'problem':<10} " + " ".join(f"ratio@{d:g}".rjust(12) for d in radii))
    for name in problem_names():
        n = args.dim + (-args.dim % 4 if name == "powellse" else args.dim % 2 if name == "rosenbrock" else 0)
        prob = get_problem(name, n)
        rng = np.random.default_rng(args.seed)
        directions = orthonormal_complement(None, n, rng, n=n)
        u = rng.standard_normal((args.samples, n))
        u *= (rng.random(args.samples) ** (1.0 / n) / np.linalg.norm(u, axis=1))[:, None]
        ratios = [ball_error(prob, directions, d, u) / ball_error(prob, directions, d / 2, u) for d in radii]
        print(f"{name:<10} " + " ".join(f"{r:12.4f}" for r in ratios))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
