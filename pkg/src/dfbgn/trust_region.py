"""Trust-region subproblem: min g.s + 0.5 s.H.s subject to ||s|| <= delta.

Solved approximately by truncated (Steihaug-Toint) conjugate gradients, which
always achieves at least the Cauchy decrease.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TrsSolution", "solve_trs", "cauchy_bound", "step_bound_constant", "BOUNDARY_TOL"]

BOUNDARY_TOL = 1e-8
CG_RTOL = 1e-8


@dataclass(frozen=True)
class TrsSolution:
    s_hat: np.ndarray
    model_decrease: float
    on_boundary: bool
    cg_iters: int
    exit: str = "converged"
    model_values: tuple = field(default=(), repr=False)


def cauchy_bound(g, H, delta, c1=0.5) -> float:
    """c1 ||g|| min(delta, ||g|| / max(||H||_2, 1))."""
    gn = float(np.linalg.norm(g))
    hn = float(np.linalg.norm(H, 2)) if np.size(H) else 0.0
    return c1 * gn * min(delta, gn / max(hn, 1.0))


def step_bound_constant(c1=0.5) -> float:
    """Constant c2 in ||s|| >= c2 min(delta, ||g|| / max(||H||, 1))."""
    return 2.0 * c1 / (1.0 + np.sqrt(1.0 + 2.0 * c1))


def _to_boundary(s, d, delta):
    # largest tau >= 0 with ||s + tau d|| = delta
    sd, dd, ss = s @ d, d @ d, s @ s
    disc = sd * sd + dd * (delta * delta - ss)
    tau = (-sd + np.sqrt(max(disc, 0.0))) / dd
    return s + tau * d


def _model(g, H, s):
    return float(g @ s + 0.5 * s @ (H @ s))


def solve_trs(g, H, delta: float, max_iters=None) -> TrsSolution:
    """Steihaug CG from s = 0.

    Stops when the CG residual drops below 1e-8 ||g||, the iterate would leave
    the ball, a direction of non-positive curvature is met, or after p
    iterations (p = len(g) unless ``max_iters`` is given).
    """
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    p = g.size
    if H.shape != (p, p):
        raise ValueError(f"H has shape {H.shape}, expected ({p}, {p})")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H)) and np.isfinite(delta)):
        raise ValueError("non-finite trust-region subproblem data")
    if delta <= 0:
        raise ValueError(f"trust-region radius must be positive, got {delta}")

    s = np.zeros(p)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return TrsSolution(s, 0.0, False, 0, "zero_gradient", (0.0,))

    max_iters = p if max_iters is None else max_iters
    r = g.copy()
    d = -r
    rr = float(r @ r)
    values = [0.0]
    exit_reason = "max_iters"
    it = 0
    while it < max_iters:
        it += 1
        hd = H @ d
        dhd = float(d @ hd)
        if dhd <= 0.0:
            s = _to_boundary(s, d, delta)
            exit_reason = "negative_curvature"
            values.append(_model(g, H, s))
            break
        alpha = rr / dhd
        s_new = s + alpha * d
        if np.linalg.norm(s_new) >= delta:
            s = _to_boundary(s, d, delta)
            exit_reason = "boundary"
            values.append(_model(g, H, s))
            break
        s = s_new
        r = r + alpha * hd
        rr_new = float(r @ r)
        values.append(_model(g, H, s))
        if np.sqrt(rr_new) <= CG_RTOL * gnorm:
            exit_reason = "converged"
            break
        d = -r + (rr_new / rr) * d
        rr = rr_new

    decrease = -_model(g, H, s)
    on_boundary = bool(np.linalg.norm(s) >= (1.0 - BOUNDARY_TOL) * delta)
    return TrsSolution(s, decrease, on_boundary, it, exit_reason, tuple(values))
