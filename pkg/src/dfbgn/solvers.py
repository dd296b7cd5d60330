"""Subspace derivative-free Gauss-Newton solvers.

``dfbgn_solve`` is the practical method: it keeps an interpolation set of
p + 1 points, builds a Gauss-Newton model in the span of the set, and after
every iteration drops a few points (chosen by a geometry-aware score) and
replaces them with fresh orthogonal directions, so the subspace keeps moving.

``rsdfo_gn_solve`` is the variant with convergence guarantees: it resamples a
random subspace each iteration unless the previous model was flagged for
checking, and has explicit criticality and safety steps.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.linalg import orth

from .interpolation import DegenerateSetError, InterpolationSet
from .problems import EvaluationError, LeastSquaresProblem, evaluate
from .subspace import DegenerateDrawError, orthonormal_complement, sample_basis, SUBSPACE_KINDS
from .trust_region import solve_trs, step_bound_constant

__all__ = [
    "STATUSES",
    "HISTORY_FIELDS",
    "SolverConfig",
    "SolverError",
    "IterationRecord",
    "SolverResult",
    "Evaluator",
    "p_drop_select",
    "trust_region_update",
    "dfbgn_solve",
    "rsdfo_gn_solve",
    "solve",
]

STATUSES = ("small_delta", "budget_exhausted", "runtime_exhausted", "model_stationary")
HISTORY_FIELDS = ("eval_index", "iter", "f_best", "two_f_best", "delta", "rho", "p_drop", "wall_ms")

MAX_REPAIRS = 5
_DECREASE_GUARD = 1e-15


class SolverError(RuntimeError):
    """Unrecoverable failure (e.g. interpolation set cannot be repaired)."""


class BudgetExhausted(Exception):
    pass


class RuntimeExhausted(Exception):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Trust-region parameters, budgets and randomness for one solver run.

    Fields left as ``None`` are filled from the problem by :meth:`resolved`:
    p = n, delta0 = 0.1 max(||x0||_inf, 1), lambda_target = 2(1 + sqrt(p)),
    max_evals = 100 (n + 1).
    """

    p: Optional[int] = None
    delta0: Optional[float] = None
    delta_max: float = 1e10
    delta_end: float = 1e-8
    gamma_dec: float = 0.5
    gamma_inc: float = 2.0
    gamma_inc_bar: float = 4.0
    eta1: float = 0.1
    eta2: float = 0.7
    # criticality / safety / poisedness (RSDFO-GN only)
    eps_c: float = 1e-2
    mu: float = 1.0
    gamma_c: float = 0.5
    gamma_f: float = 0.5
    beta_f: float = math.sqrt(2.0) - 1.0
    lambda_target: Optional[float] = None
    # budgets
    max_evals: Optional[int] = None
    max_runtime: Optional[float] = None
    seed: int = 0
    p_drop_policy: Union[str, int] = "mixed"
    subspace: str = "orthonormal"
    hash_s: int = 3
    record_geometry: bool = False

    @classmethod
    def theory_strict(cls, **kwargs) -> "SolverConfig":
        """Preset with gamma_inc = gamma_inc_bar = 8, satisfying the radius-growth condition."""
        kwargs.setdefault("gamma_inc", 8.0)
        kwargs.setdefault("gamma_inc_bar", 8.0)
        return cls(**kwargs)

    def resolved(self, problem: LeastSquaresProblem) -> "SolverConfig":
        n = problem.n
        p = n if self.p is None else int(self.p)
        delta0 = self.delta0
        if delta0 is None:
            delta0 = 0.1 * max(float(np.max(np.abs(problem.x0))), 1.0)
        lam = 2.0 * (1.0 + math.sqrt(p)) if self.lambda_target is None else self.lambda_target
        max_evals = 100 * (n + 1) if self.max_evals is None else int(self.max_evals)
        cfg = replace(self, p=p, delta0=delta0, lambda_target=lam, max_evals=max_evals)
        cfg.validate(n)
        return cfg

    def validate(self, n: Optional[int] = None) -> None:
        errs = []
        if not 0 < self.gamma_dec < 1 < self.gamma_inc <= self.gamma_inc_bar:
            errs.append("need 0 < gamma_dec < 1 < gamma_inc <= gamma_inc_bar")
        if not 0 < self.eta1 <= self.eta2 < 1:
            errs.append("need 0 < eta1 <= eta2 < 1")
        if self.delta0 is not None and not self.delta_end < self.delta0 <= self.delta_max:
            errs.append("need delta_end < delta0 <= delta_max")
        if self.delta_end <= 0:
            errs.append("delta_end must be positive")
        if self.p is not None and (self.p < 1 or (n is not None and self.p > n)):
            errs.append(f"need 1 <= p <= n, got p={self.p}, n={n}")
        if not (0 < self.gamma_c < 1 and 0 < self.gamma_f < 1):
            errs.append("need 0 < gamma_c, gamma_f < 1")
        if self.eps_c <= 0 or self.mu <= 0 or self.beta_f <= 0:
            errs.append("eps_c, mu and beta_f must be positive")
        if self.lambda_target is not None and self.lambda_target <= 1:
            errs.append("lambda_target must exceed 1")
        if self.max_evals is not None and self.max_evals < 1:
            errs.append("max_evals must be positive")
        if self.max_runtime is not None and self.max_runtime <= 0:
            errs.append("max_runtime must be positive")
        if self.subspace not in SUBSPACE_KINDS:
            errs.append(f"subspace must be one of {SUBSPACE_KINDS}")
        if self.hash_s < 1:
            errs.append("hash_s must be positive")
        try:
            _parse_policy(self.p_drop_policy)
        except ValueError as exc:
            errs.append(str(exc))
        if errs:
            raise ValueError("invalid solver configuration: " + "; ".join(errs))

    def theory_warnings(self) -> list[str]:
        """Parameter conditions from the convergence analysis that this config violates."""
        out = []
        smallest = min(self.gamma_c, self.gamma_f, self.gamma_dec, self.beta_f)
        if not self.gamma_inc > smallest ** -2:
            out.append(
                f"gamma_inc={self.gamma_inc:g} does not exceed "
                f"min(gamma_c, gamma_f, gamma_dec, beta_f)^-2={smallest ** -2:.4g}"
            )
        if self.beta_f > step_bound_constant(0.5) + 1e-15:
            out.append(f"beta_f={self.beta_f:g} exceeds the step-length constant {step_bound_constant(0.5):.4g}")
        return out

    @property
    def theory_compliant(self) -> bool:
        return not self.theory_warnings()


def _parse_policy(policy) -> Optional[int]:
    """None for the mixed policy, else the constant k."""
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        if policy < 1:
            raise ValueError(f"constant p_drop must be >= 1, got {policy}")
        return int(policy)
    if isinstance(policy, str):
        if policy == "mixed":
            return None
        key = policy.split(":", 1)[-1] if policy.startswith("constant") else policy
        if key.isdigit() and int(key) >= 1:
            return int(key)
    raise ValueError(f"p_drop_policy must be 'mixed' or a positive integer, got {policy!r}")


def p_drop_select(policy, successful: bool, p: int) -> int:
    """Mixed: 1 after a successful iteration, ceil(p/10) otherwise. Constant k: clamp to [1, p]."""
    if p < 1:
        raise ValueError("p must be positive")
    k = _parse_policy(policy)
    if k is None:
        return 1 if successful else max(1, math.ceil(p / 10))
    return min(max(k, 1), p)


def trust_region_update(rho: float, delta: float, step_norm: float, config: SolverConfig):
    """Return (new radius, accept flag) from the ratio test."""
    if delta <= 0:
        raise ValueError("trust-region radius must be positive")
    if rho >= config.eta2:
        return min(max(config.gamma_inc * delta, config.gamma_inc_bar * step_norm), config.delta_max), True
    if rho >= config.eta1:
        return max(config.gamma_dec * delta, step_norm), True
    return min(config.gamma_dec * delta, step_norm), False


@dataclass
class IterationRecord:
    k: int
    kind: str  # step | guard | criticality | safety
    delta: float
    delta_next: float
    rho: float
    accepted: bool
    p_drop: int
    n_removed: int
    n_added: int
    evals_model: int
    evals_step: int
    g_norm: float
    h_fro: float
    step_norm: float
    certified: Optional[bool] = None
    check_model: Optional[bool] = None
    # evaluation counter once the model is built, and when the iteration ends
    count_after_model: int = -1
    count_end: int = -1


@dataclass
class SolverResult:
    x_best: np.ndarray
    f_best: float
    f0: float
    status: str
    n_evals: int
    n_iters: int
    history: list = field(repr=False)
    iterations: list = field(repr=False)
    config: SolverConfig = field(repr=False)
    geometry: list = field(default_factory=list, repr=False)
    message: str = ""

    @property
    def two_f_best(self) -> float:
        return 2.0 * self.f_best

    def best_trace(self) -> np.ndarray:
        """Best-so-far f after each evaluation (length n_evals)."""
        return np.array([row[2] for row in self.history])

    def wall_ms(self) -> np.ndarray:
        return np.array([row[7] for row in self.history])

    def write_history(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_FIELDS)
            for row in self.history:
                w.writerow([_fmt(v) for v in row])

    def write_geometry(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "delta", "point", "distance", "theta", "lambda"])
            for row in self.geometry:
                w.writerow([_fmt(row[k]) for k in ("iter", "delta", "point", "distance", "theta", "lambda")])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


class Evaluator:
    """Counts residual evaluations, enforces budgets and records per-evaluation history."""

    def __init__(self, problem: LeastSquaresProblem, max_evals: int, max_runtime: Optional[float] = None):
        self.problem = problem
        self.max_evals = max_evals
        self.max_runtime = max_runtime
        self.count = 0
        self.f_best = math.inf
        self.x_best: Optional[np.ndarray] = None
        self.history: list[tuple] = []
        self.t0 = time.perf_counter()
        # context stamped onto history rows
        self.iter = 0
        self.delta = math.nan
        self.rho = math.nan
        self.p_drop = 0

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def check_budget(self) -> None:
        if self.count >= self.max_evals:
            raise BudgetExhausted
        if self.max_runtime is not None and self.elapsed() >= self.max_runtime:
            raise RuntimeExhausted

    def __call__(self, x) -> np.ndarray:
        self.check_budget()
        self.count += 1
        try:
            r = evaluate(self.problem, x)
        except EvaluationError:
            self._record()
            raise
        f = 0.5 * float(r @ r)
        if f < self.f_best:
            self.f_best = f
            self.x_best = np.array(x, dtype=float)
        self._record()
        return r

    def _record(self):
        fb = self.f_best
        self.history.append(
            (self.count, self.iter, fb, 2.0 * fb, self.delta, self.rho, self.p_drop, 1e3 * self.elapsed())
        )


def _append_fresh(iset: InterpolationSet, q: int, delta: float, rng, ev: Evaluator,
                  basis: Optional[np.ndarray] = None) -> int:
    """Add q points base + delta d_j with d_j orthonormal and orthogonal to the set's span.

    If ``basis`` is given the directions are taken from its columns (rotated
    randomly) instead of the orthogonal complement. Points whose evaluation
    fails are dropped and redrawn (up to MAX_REPAIRS times per point).
    """
    added = 0
    failures = 0
    while added < q:
        if basis is not None:
            rot = orthonormal_complement(None, basis.shape[1], rng, n=basis.shape[1])
            d = (basis @ rot)[:, : q - added]
        else:
            w = iset.displacements()
            existing = orth(w.T) if iset.p else None
            d = orthonormal_complement(existing, q - added, rng, n=iset.n)
        for j in range(d.shape[1]):
            try:
                iset.append_directions(d[:, j], delta, ev)
                added += 1
            except EvaluationError:
                failures += 1
                if failures > MAX_REPAIRS:
                    raise SolverError("repeated evaluation failures while adding interpolation points")
                break
    return added


def _repair(iset: InterpolationSet, delta: float, rng, ev: Evaluator, p: int) -> int:
    """Factorize; replace rank-deficient points with fresh directions until poised."""
    evals = 0
    for _ in range(MAX_REPAIRS + 1):
        iset.factorize()
        if not iset.degenerate:
            return evals
        iset.delete(list(iset.degenerate_columns))
        evals += _append_fresh(iset, p - iset.p, delta, rng, ev)
    raise SolverError("interpolation set stayed degenerate after repeated repair")


def _finish(ev: Evaluator, status: str, k: int, iters, cfg, geometry, f0, message="") -> SolverResult:
    return SolverResult(
        x_best=ev.x_best.copy(),
        f_best=ev.f_best,
        f0=f0,
        status=status,
        n_evals=ev.count,
        n_iters=k,
        history=ev.history,
        iterations=iters,
        config=cfg,
        geometry=geometry,
        message=message,
    )


def _dump_geometry(geometry: list, iset: InterpolationSet, k: int, delta: float) -> None:
    if iset.p == 0:
        return
    for row in iset.diagnostics(delta):
        geometry.append({"iter": k, "delta": delta, **row})


def dfbgn_solve(problem: LeastSquaresProblem, config: Optional[SolverConfig] = None) -> SolverResult:
    """Minimize 0.5 ||r(x)||^2 with the block Gauss-Newton subspace method."""
    cfg = (config or SolverConfig()).resolved(problem)
    n, p = problem.n, cfg.p
    rng = np.random.default_rng(cfg.seed)
    ev = Evaluator(problem, cfg.max_evals, cfg.max_runtime)
    iters: list[IterationRecord] = []
    geometry: list[dict] = []
    delta = cfg.delta0
    ev.delta = delta
    k = 0

    try:
        r0 = ev(problem.x0)
    except EvaluationError as exc:
        raise SolverError(f"residual evaluation failed at the starting point: {exc}") from exc
    f0 = 0.5 * float(r0 @ r0)
    iset = InterpolationSet(problem.x0, r0)

    try:
        _append_fresh(iset, p, delta, rng, ev)
        while True:
            if iset.f_base == 0.0:
                return _finish(ev, "model_stationary", k, iters, cfg, geometry, f0, "zero residual")
            ev.iter = k
            evals_before = ev.count
            _repair(iset, delta, rng, ev, p)
            if cfg.record_geometry:
                _dump_geometry(geometry, iset, k, delta)
            model = iset.build_model()
            q_mat = iset.Q
            trs = solve_trs(model.g_hat, model.h_hat, delta)
            s_hat = trs.s_hat
            snorm = float(np.linalg.norm(s_hat))
            x_k, f_k = iset.base.copy(), iset.f_base
            evals_model = ev.count - evals_before

            pred = model.decrease(s_hat)
            r_new = None
            evals_step = 0
            if pred <= _DECREASE_GUARD * max(1.0, abs(f_k)):
                kind, rho = "guard", -math.inf
                delta_next, accepted = cfg.gamma_dec * delta, False
            else:
                kind = "step"
                x_new = x_k + q_mat @ s_hat
                try:
                    evals_step = 1
                    r_new = ev(x_new)
                    rho = (f_k - 0.5 * float(r_new @ r_new)) / pred
                except EvaluationError:
                    rho = -math.inf
                delta_next, accepted = trust_region_update(rho, delta, snorm, cfg)

            p_drop = p_drop_select(cfg.p_drop_policy, accepted, p)
            ev.rho, ev.p_drop, ev.delta = rho, p_drop, delta_next
            rec = IterationRecord(
                k, kind, delta, delta_next, rho, accepted, p_drop, 0, 0, evals_model, evals_step,
                float(np.linalg.norm(model.g_hat)), float(np.linalg.norm(model.h_hat)), snorm,
                count_after_model=evals_before + evals_model, count_end=ev.count,
            )
            iters.append(rec)

            new_index = None
            if r_new is not None:
                iset.add_point(x_new, r_new)
                new_index = iset.p - 1
                if accepted:
                    iset.change_base(new_index)  # old base takes the new point's slot
            delta = delta_next
            if delta <= cfg.delta_end:
                return _finish(ev, "small_delta", k + 1, iters, cfg, geometry, f0)

            removed = 0
            if p < n:
                n_drop = min(max(p_drop, 2), iset.p)
                removed += len(iset.remove_points(delta, n_drop))
            else:
                if r_new is not None:
                    # replace one point of the old set by the trial point
                    pool = [t for t in range(iset.p) if accepted or t != new_index]
                    removed += len(iset.remove_points(delta, 1, candidates=pool))
                n_drop = min(max(p_drop, 1), p, iset.p)
                removed += len(iset.remove_points(delta, n_drop))
            rec.n_removed = removed
            rec.n_added = _append_fresh(iset, p - iset.p, delta, rng, ev)
            rec.count_end = ev.count
            k += 1
    except BudgetExhausted:
        return _finish(ev, "budget_exhausted", k, iters, cfg, geometry, f0)
    except RuntimeExhausted:
        return _finish(ev, "runtime_exhausted", k, iters, cfg, geometry, f0)


def _orthonormal_range(q, rng, kind, n, p, hash_s):
    """Orthonormal basis of range(Q) for a freshly sampled Q (redraw if rank deficient)."""
    dense = q
    for _ in range(MAX_REPAIRS):
        dense = q.toarray() if hasattr(q, "toarray") else np.asarray(q)
        u, r = np.linalg.qr(dense)
        diag = np.abs(np.diag(r))
        if diag.min() > 1e-10 * max(diag.max(), 1e-300):
            return u
        q = sample_basis(kind, n, p, rng, hash_s).Q
    # persistent deficiency (e.g. very sparse hashing): fall back to the range actually spanned
    basis = orth(dense)
    if basis.shape[1] == 0:
        raise DegenerateDrawError("sampled subspace has rank zero")
    return basis


def _certify(iset: InterpolationSet, delta: float, lambda_target: float, p: int) -> bool:
    if iset.p != p:
        return False
    if np.any(iset.distances() > delta * (1.0 + 1e-10)):
        return False
    iset.factorize()
    if iset.degenerate:
        return False
    return iset.poisedness(delta) <= lambda_target


def rsdfo_gn_solve(problem: LeastSquaresProblem, config: Optional[SolverConfig] = None,
                   sampler: Optional[str] = None) -> SolverResult:
    """Random-subspace Gauss-Newton with criticality and safety steps."""
    cfg = (config or SolverConfig()).resolved(problem)
    if sampler is not None:
        cfg = replace(cfg, subspace=sampler)
        cfg.validate(problem.n)
    n, p = problem.n, cfg.p
    rng = np.random.default_rng(cfg.seed)
    ev = Evaluator(problem, cfg.max_evals, cfg.max_runtime)
    iters: list[IterationRecord] = []
    geometry: list[dict] = []
    delta = cfg.delta0
    ev.delta = delta
    k = 0

    try:
        r0 = ev(problem.x0)
    except EvaluationError as exc:
        raise SolverError(f"residual evaluation failed at the starting point: {exc}") from exc
    f0 = 0.5 * float(r0 @ r0)
    x, r_x = problem.x0.copy(), r0
    iset: Optional[InterpolationSet] = None
    basis: Optional[np.ndarray] = None
    check_model = False

    try:
        while True:
            ev.iter = k
            evals_before = ev.count
            if check_model and basis is not None and iset is not None:
                certified = _certify(iset, delta, cfg.lambda_target, basis.shape[1])
                if not certified:
                    iset = InterpolationSet(x, r_x)
                    _append_fresh(iset, basis.shape[1], delta, rng, ev, basis=basis)
                    iset.factorize()
                    certified = _certify(iset, delta, cfg.lambda_target, basis.shape[1])
            else:
                q = sample_basis(cfg.subspace, n, p, rng, min(cfg.hash_s, p)).Q
                basis = _orthonormal_range(q, rng, cfg.subspace, n, p, min(cfg.hash_s, p))
                iset = InterpolationSet(x, r_x)
                _append_fresh(iset, basis.shape[1], delta, rng, ev, basis=basis)
                _repair(iset, delta, rng, ev, basis.shape[1])
                certified = _certify(iset, delta, cfg.lambda_target, basis.shape[1])
            if iset.degenerate:
                _repair(iset, delta, rng, ev, basis.shape[1])
            if cfg.record_geometry:
                _dump_geometry(geometry, iset, k, delta)
            evals_model = ev.count - evals_before
            model = iset.build_model()
            g_norm = float(np.linalg.norm(model.g_hat))
            h_fro = float(np.linalg.norm(model.h_hat))

            rec = IterationRecord(k, "step", delta, delta, math.nan, False, 0, 0, 0, evals_model, 0,
                                  g_norm, h_fro, 0.0, certified, check_model, count_after_model=ev.count)
            iters.append(rec)

            if g_norm < cfg.eps_c and (g_norm < delta / cfg.mu or not certified):
                rec.kind = "criticality"
                delta = cfg.gamma_c * delta
                check_model = True
            else:
                trs = solve_trs(model.g_hat, model.h_hat, delta)
                snorm = float(np.linalg.norm(trs.s_hat))
                rec.step_norm = snorm
                if snorm < cfg.beta_f * delta:
                    rec.kind = "safety"
                    delta = cfg.gamma_f * delta
                    check_model = not certified
                else:
                    pred = model.decrease(trs.s_hat)
                    r_new = None
                    if pred <= _DECREASE_GUARD * max(1.0, abs(iset.f_base)):
                        rec.kind, rho = "guard", -math.inf
                        delta_next, accepted = cfg.gamma_dec * delta, False
                    else:
                        x_new = x + iset.Q @ trs.s_hat
                        rec.evals_step = 1
                        try:
                            r_new = ev(x_new)
                            rho = (iset.f_base - 0.5 * float(r_new @ r_new)) / pred
                        except EvaluationError:
                            rho = -math.inf
                        delta_next, accepted = trust_region_update(rho, delta, snorm, cfg)
                    rec.rho, rec.accepted = rho, accepted
                    if accepted:
                        x, r_x = x_new, r_new
                        # keep the set in the same affine subspace, re-centred at the new iterate
                        iset.add_point(x_new, r_new)
                        iset.change_base(iset.p - 1)
                        iset.remove_points(delta_next, 1)
                    delta = delta_next
                    check_model = not (rho >= cfg.eta2 or certified)
            rec.delta_next = delta
            rec.check_model = check_model
            rec.count_end = ev.count
            ev.delta, ev.rho = delta, rec.rho
            k += 1
            if delta <= cfg.delta_end:
                return _finish(ev, "small_delta", k, iters, cfg, geometry, f0)
    except BudgetExhausted:
        return _finish(ev, "budget_exhausted", k, iters, cfg, geometry, f0)
    except RuntimeExhausted:
        return _finish(ev, "runtime_exhausted", k, iters, cfg, geometry, f0)


def solve(problem: LeastSquaresProblem, config: Optional[SolverConfig] = None,
          algorithm: str = "dfbgn") -> SolverResult:
    if algorithm == "dfbgn":
        return dfbgn_solve(problem, config)
    if algorithm == "rsdfo-gn":
        return rsdfo_gn_solve(problem, config)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected 'dfbgn' or 'rsdfo-gn'")
