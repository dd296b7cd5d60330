"""Benchmarking: accuracy counts, data/performance profiles and campaign runner.

A problem instance is a (problem, seed) pair. For a solver S and instance P,
N(S, P, tau) is the first evaluation whose best-so-far objective satisfies
f <= f* + tau (f(x0) - f*). Data profiles report the fraction of instances
solved within alpha (n_P + 1) evaluations; performance profiles report the
fraction solved within alpha times the best solver's count.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .problems import COLLECTIONS, get_problem
from .solvers import SolverConfig, solve

__all__ = [
    "DEFAULT_TAUS",
    "DATA_ALPHAS",
    "PERF_ALPHAS",
    "RunRecord",
    "ProfilePoint",
    "SolverSpec",
    "evals_to_accuracy",
    "normalized_objective",
    "data_profile",
    "performance_profile",
    "data_profile_counts",
    "performance_profile_counts",
    "parse_solver_file",
    "load_collection",
    "run_campaign",
]

DEFAULT_TAUS = (0.5, 1e-1, 1e-3, 1e-5)
DATA_ALPHAS = np.arange(0.0, 100.0 + 0.25, 0.5)
PERF_ALPHAS = 2.0 ** np.linspace(0.0, 6.0, 61)
PROFILE_FIELDS = ("solver", "tau", "alpha", "fraction")


class ProblemDataError(ValueError):
    """Starting value does not exceed the optimal value."""


@dataclass
class RunRecord:
    solver_id: str
    problem_id: str
    n: int
    seed: int
    f0: float
    f_star: float
    trace: np.ndarray = field(repr=False)
    wall_ms: np.ndarray = field(repr=False)
    status: str = ""
    message: str = ""

    @property
    def instance(self) -> tuple:
        return (self.problem_id, self.n, self.seed)

    @property
    def n_evals(self) -> int:
        return len(self.trace)

    @property
    def f_best(self) -> float:
        return float(self.trace[-1]) if len(self.trace) else math.inf


@dataclass(frozen=True)
class ProfilePoint:
    alpha: float
    fraction: float


def _check_problem_data(f0, f_star):
    if not f0 > f_star:
        raise ProblemDataError(f"need f0 > f_star, got f0={f0!r}, f_star={f_star!r}")


def normalized_objective(f, f0, f_star):
    """(f - f*) / (f0 - f*), clamped below at 0."""
    _check_problem_data(f0, f_star)
    return np.maximum((np.asarray(f, dtype=float) - f_star) / (f0 - f_star), 0.0)


def evals_to_accuracy(record, f0=None, f_star=None, tau=1e-3, key: Optional[Sequence] = None):
    """First 1-based evaluation index reaching f* + tau (f0 - f*), else inf.

    ``record`` is a RunRecord or a sequence of objective values (one per
    evaluation). With ``key`` (e.g. wall-clock milliseconds per evaluation)
    the key value at that evaluation is returned instead of the index.
    """
    if isinstance(record, RunRecord):
        f0 = record.f0 if f0 is None else f0
        f_star = record.f_star if f_star is None else f_star
        trace = record.trace
    else:
        trace = np.asarray(record, dtype=float)
    _check_problem_data(f0, f_star)
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    hits = np.flatnonzero(np.asarray(trace) <= f_star + tau * (f0 - f_star))
    if hits.size == 0:
        return math.inf
    if key is not None:
        return float(np.asarray(key)[hits[0]])
    return int(hits[0]) + 1


def data_profile_counts(counts: Mapping[str, Sequence[float]], dims: Sequence[int],
                        alphas: Sequence[float] = DATA_ALPHAS) -> dict[str, np.ndarray]:
    """counts[solver][i] = N for instance i with dimension dims[i]."""
    dims = np.asarray(dims, dtype=float)
    if dims.size == 0:
        raise ValueError("empty problem collection")
    alphas = np.asarray(alphas, dtype=float)
    out = {}
    for solver, n_vals in counts.items():
        ratio = np.asarray(n_vals, dtype=float) / (dims + 1.0)
        out[solver] = (ratio[None, :] <= alphas[:, None]).mean(axis=1)
    return out


def performance_profile_counts(counts: Mapping[str, Sequence[float]],
                               alphas: Sequence[float] = PERF_ALPHAS) -> dict[str, np.ndarray]:
    """Fraction of instances with N <= alpha * min over solvers; unsolved-by-all never counts."""
    solvers = list(counts)
    mat = np.array([np.asarray(counts[s], dtype=float) for s in solvers])
    if mat.size == 0:
        raise ValueError("empty problem collection")
    best = mat.min(axis=0)
    alphas = np.asarray(alphas, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.isfinite(best), mat / best, np.inf)
    return {s: (ratio[i][None, :] <= alphas[:, None]).mean(axis=1) for i, s in enumerate(solvers)}


def _count_table(records: Iterable[RunRecord], tau: float, metric: str = "evals"):
    """Instance-aligned N values per solver (missing or failed runs count as unsolved)."""
    by_solver: dict[str, dict[tuple, float]] = {}
    dims: dict[tuple, int] = {}
    for rec in records:
        key = rec.wall_ms if metric == "wall_ms" else None
        n_val = evals_to_accuracy(rec, tau=tau, key=key) if len(rec.trace) else math.inf
        by_solver.setdefault(rec.solver_id, {})[rec.instance] = n_val
        dims[rec.instance] = rec.n
    instances = sorted(dims)
    counts = {s: [vals.get(i, math.inf) for i in instances] for s, vals in by_solver.items()}
    return counts, [dims[i] for i in instances]


def _to_points(alphas, fractions):
    return [ProfilePoint(float(a), float(f)) for a, f in zip(alphas, fractions)]


def data_profile(records: Sequence[RunRecord], tau: float, alpha_grid=DATA_ALPHAS,
                 metric: str = "evals") -> dict[str, list[ProfilePoint]]:
    counts, dims = _count_table(records, tau, metric)
    prof = data_profile_counts(counts, dims, alpha_grid)
    return {s: _to_points(alpha_grid, v) for s, v in prof.items()}


def performance_profile(records: Sequence[RunRecord], tau: float, alpha_grid=PERF_ALPHAS,
                        metric: str = "evals") -> dict[str, list[ProfilePoint]]:
    counts, _ = _count_table(records, tau, metric)
    if not counts:
        raise ValueError("empty problem collection")
    prof = performance_profile_counts(counts, alpha_grid)
    return {s: _to_points(alpha_grid, v) for s, v in prof.items()}


# ---------------------------------------------------------------------------
# Campaigns


@dataclass(frozen=True)
class SolverSpec:
    algorithm: str
    p_fraction: float
    subspace: str = "orthonormal"
    extra: tuple = ()

    @property
    def solver_id(self) -> str:
        tag = f"{self.algorithm}-p{self.p_fraction:g}-{self.subspace}"
        if self.extra:
            tag += "-" + "-".join(f"{k}={v}" if v is not True else k for k, v in self.extra)
        return tag

    def config(self, n: int, seed: int, max_evals: int, max_runtime=None) -> tuple[str, SolverConfig]:
        p = min(n, max(1, int(round(self.p_fraction * n))))
        kwargs = dict(p=p, seed=seed, max_evals=max_evals, max_runtime=max_runtime, subspace=self.subspace)
        strict = False
        for k, v in self.extra:
            if k == "theory-strict":
                strict = True
            elif k == "hash_s":
                kwargs["hash_s"] = int(v)
            elif k == "p_drop":
                kwargs["p_drop_policy"] = v if v == "mixed" else int(v)
            else:
                kwargs[k] = float(v)
        cfg = SolverConfig.theory_strict(**kwargs) if strict else SolverConfig(**kwargs)
        return self.algorithm, cfg


def _parse_extra(text: str) -> tuple:
    items = []
    for tok in text.replace(";", " ").split():
        tok = tok.lstrip("-")
        if "=" in tok:
            k, v = tok.split("=", 1)
            items.append((k.replace("-", "_"), v))
        else:
            items.append((tok, True))
    return tuple(items)


def parse_solver_lines(lines: Iterable[str]) -> list[SolverSpec]:
    """Lines ``algorithm,p_fraction,subspace,extra_flags``; '#' comments and a header are skipped."""
    specs = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("algorithm"):
            continue
        parts = [s.strip() for s in line.split(",", 3)]
        if len(parts) < 2:
            raise ValueError(f"solver spec needs at least algorithm,p_fraction: {raw!r}")
        algo = parts[0]
        if algo not in ("dfbgn", "rsdfo-gn"):
            raise ValueError(f"unknown algorithm {algo!r} in solver spec")
        frac = float(parts[1])
        if not 0 < frac <= 1:
            raise ValueError(f"p_fraction must lie in (0, 1], got {frac}")
        sub = parts[2] if len(parts) > 2 and parts[2] else "orthonormal"
        extra = _parse_extra(parts[3]) if len(parts) > 3 else ()
        specs.append(SolverSpec(algo, frac, sub, extra))
    if not specs:
        raise ValueError("no solver configurations given")
    return specs


def parse_solver_file(path) -> list[SolverSpec]:
    with open(path) as fh:
        return parse_solver_lines(fh)


def load_collection(name_or_path: str) -> list[tuple[str, int]]:
    """Named collection or a CSV file with columns ``name,n``."""
    if name_or_path in COLLECTIONS:
        return list(COLLECTIONS[name_or_path])
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(f"unknown collection {name_or_path!r}; use one of {sorted(COLLECTIONS)} or a CSV path")
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((row["name"].strip(), int(row["n"])))
    if not out:
        raise ValueError(f"collection {name_or_path!r} is empty")
    for name, n in out:
        get_problem(name, n)  # validate early
    return out


def _run_one(task) -> RunRecord:
    spec, name, n, seed, budget_gradients, runtime_cap = task
    problem = get_problem(name, n)
    f_star = problem.f_star if problem.f_star is not None else 0.0
    r0 = problem.residuals(problem.x0)
    f0 = 0.5 * float(r0 @ r0)
    try:
        algo, cfg = spec.config(n, seed, int(budget_gradients * (n + 1)), runtime_cap)
        res = solve(problem, cfg, algo)
        return RunRecord(spec.solver_id, name, n, seed, f0, f_star, res.best_trace(), res.wall_ms(), res.status)
    except Exception as exc:  # a failed run is recorded, never fatal to the campaign
        return RunRecord(spec.solver_id, name, n, seed, f0, f_star, np.zeros(0), np.zeros(0),
                         "failed", f"{type(exc).__name__}: {exc}")


@dataclass
class CampaignResult:
    records: list
    taus: tuple
    data: dict  # tau -> solver -> fractions
    perf: dict


def run_campaign(collection, solver_specs: Sequence[SolverSpec], seeds: Sequence[int],
                 budget_gradients: float = 100.0, runtime_cap: Optional[float] = None,
                 taus: Sequence[float] = DEFAULT_TAUS, jobs: int = 1, out_dir=None,
                 metric: str = "evals", progress=None) -> CampaignResult:
    """Run every (problem, solver, seed) combination and compute profiles.

    ``collection`` is a list of (name, n) pairs or a collection name/CSV path.
    Results are ordered deterministically regardless of ``jobs``.
    """
    if isinstance(collection, str):
        collection = load_collection(collection)
    if not collection:
        raise ValueError("empty problem collection")
    tasks = [(spec, name, n, seed, budget_gradients, runtime_cap)
             for (name, n) in collection for spec in solver_specs for seed in seeds]
    records: list[RunRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_run_one, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = _run_one(task)
            records.append(rec)
            if progress:
                progress(rec)

    data, perf = {}, {}
    for tau in taus:
        counts, dims = _count_table(records, tau, metric)
        data[tau] = data_profile_counts(counts, dims, DATA_ALPHAS)
        perf[tau] = performance_profile_counts(counts, PERF_ALPHAS)
    result = CampaignResult(records, tuple(taus), data, perf)
    if out_dir is not None:
        write_campaign(result, out_dir)
    return result


def _write_profile(path_csv, path_dat, profiles, alphas):
    with open(path_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_FIELDS)
        for tau, by_solver in profiles.items():
            for solver, fr in by_solver.items():
                for a, f in zip(alphas, fr):
                    w.writerow([solver, repr(float(tau)), repr(float(a)), repr(float(f))])
    # gnuplot: one indexed block per (solver, tau), separated by two blank lines
    with open(path_dat, "w") as fh:
        for tau, by_solver in profiles.items():
            for solver, fr in by_solver.items():
                fh.write(f"# solver={solver} tau={tau!r}\n# alpha fraction\n")
                for a, f in zip(alphas, fr):
                    fh.write(f"{float(a):.10g} {float(f):.10g}\n")
                fh.write("\n\n")


def write_campaign(result: CampaignResult, out_dir) -> None:
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "problem", "n", "seed", "status", "n_evals", "two_f0", "two_f_best",
                    "two_fstar", "normalized_final"] + [f"N_tau={t:g}" for t in result.taus] + ["message"])
        for rec in result.records:
            if len(rec.trace):
                norm = float(normalized_objective(rec.f_best, rec.f0, rec.f_star))
                ns = [evals_to_accuracy(rec, tau=t) for t in result.taus]
            else:
                norm, ns = math.nan, [math.inf] * len(result.taus)
            w.writerow([rec.solver_id, rec.problem_id, rec.n, rec.seed, rec.status, rec.n_evals,
                        repr(2 * rec.f0), repr(2 * rec.f_best), repr(2 * rec.f_star), repr(norm)]
                       + ns + [rec.message])
    # wall-clock data kept apart so runs.csv is reproducible
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "problem", "n", "seed", "wall_ms"])
        for rec in result.records:
            total = float(rec.wall_ms[-1]) if len(rec.wall_ms) else math.nan
            w.writerow([rec.solver_id, rec.problem_id, rec.n, rec.seed, f"{total:.3f}"])
    _write_profile(out / "data_profile.csv", out / "data_profile.dat", result.data, DATA_ALPHAS)
    _write_profile(out / "perf_profile.csv", out / "perf_profile.dat", result.perf, PERF_ALPHAS)
