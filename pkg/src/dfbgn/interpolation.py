"""Linear interpolation sets in a subspace.

An interpolation set is a base point ``x`` plus ``p`` further points
``y_1..y_p``. The displacements ``W = [y_t - x]`` define the subspace via the
thin QR factorization ``W^T = Q R``; in those coordinates the point ``y_t`` is
``x + Q s_t`` with ``s_t`` the t-th column of ``R``. Linear interpolation of
the residual vectors then reduces to a triangular solve with ``R^T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "RANK_TOL",
    "DegenerateSetError",
    "SubspaceModel",
    "LagrangeBasis",
    "InterpolationSet",
]

RANK_TOL = 1e-12


class DegenerateSetError(np.linalg.LinAlgError):
    """Displacement matrix is (numerically) rank deficient."""

    def __init__(self, msg, columns=()):
        super().__init__(msg)
        self.columns = tuple(columns)


@dataclass(frozen=True)
class SubspaceModel:
    """Gauss-Newton model m(s) = 0.5 ||r0 + J s||^2 on R^p."""

    jac_hat: np.ndarray
    r0: np.ndarray
    g_hat: np.ndarray
    h_hat: np.ndarray
    f0: float

    @property
    def p(self) -> int:
        return self.jac_hat.shape[1]

    def residual_model(self, s_hat) -> np.ndarray:
        return self.r0 + self.jac_hat @ np.asarray(s_hat, dtype=float)

    def value(self, s_hat) -> float:
        r = self.residual_model(s_hat)
        return 0.5 * float(r @ r)

    def decrease(self, s_hat) -> float:
        # m(0) - m(s) = -g.s - 0.5 s.H.s, computed without cancellation in f0
        s_hat = np.asarray(s_hat, dtype=float)
        js = self.jac_hat @ s_hat
        return -float(self.g_hat @ s_hat) - 0.5 * float(js @ js)


@dataclass(frozen=True)
class LagrangeBasis:
    """Affine functionals l_t(s) = c[t] + grads[t] . s, t = 0..p (t = 0 is the base)."""

    c: np.ndarray
    grads: np.ndarray

    def __call__(self, s) -> np.ndarray:
        return self.c + self.grads @ np.asarray(s, dtype=float)

    def ball_max(self, delta: float) -> np.ndarray:
        """max over ||s|| <= delta of |l_t(s)|, in closed form."""
        return np.abs(self.c) + delta * np.linalg.norm(self.grads, axis=1)


class InterpolationSet:
    """Base point with cached residual and up to n further points with residuals."""

    def __init__(self, base, base_residual, points=None, residuals=None):
        self.base = np.array(base, dtype=float)
        self.base_residual = np.array(base_residual, dtype=float)
        n, m = self.base.size, self.base_residual.size
        self.points = np.zeros((0, n)) if points is None else np.array(points, dtype=float).reshape(-1, n)
        self.residuals = (
            np.zeros((0, m)) if residuals is None else np.array(residuals, dtype=float).reshape(-1, m)
        )
        if self.points.shape[0] != self.residuals.shape[0]:
            raise ValueError("points and residuals disagree in count")
        self._invalidate()

    # -- bookkeeping ---------------------------------------------------------

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def m(self) -> int:
        return self.base_residual.size

    @property
    def p(self) -> int:
        return self.points.shape[0]

    @property
    def f_base(self) -> float:
        return 0.5 * float(self.base_residual @ self.base_residual)

    def _invalidate(self):
        self.Q = None
        self.R = None
        self.valid = False
        self.degenerate_columns: tuple[int, ...] = ()

    def copy(self) -> "InterpolationSet":
        return InterpolationSet(self.base, self.base_residual, self.points, self.residuals)

    def displacements(self) -> np.ndarray:
        return self.points - self.base

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.displacements(), axis=1)

    def add_point(self, y, r) -> None:
        self.points = np.vstack([self.points, np.asarray(y, dtype=float)[None, :]])
        self.residuals = np.vstack([self.residuals, np.asarray(r, dtype=float)[None, :]])
        self._invalidate()

    def delete(self, indices) -> None:
        keep = np.setdiff1d(np.arange(self.p), np.asarray(indices, dtype=int))
        self.points = self.points[keep]
        self.residuals = self.residuals[keep]
        self._invalidate()

    def change_base(self, t: int) -> None:
        """Swap the base with point t (the old base becomes an interpolation point)."""
        old_x, old_r = self.base.copy(), self.base_residual.copy()
        self.base = self.points[t].copy()
        self.base_residual = self.residuals[t].copy()
        self.points[t] = old_x
        self.residuals[t] = old_r
        self._invalidate()

    # -- factorization and models ---------------------------------------------

    def factorize(self) -> "InterpolationSet":
        """Thin QR of W^T, recomputed from scratch; flags rank-deficient columns."""
        if self.p == 0:
            raise ValueError("cannot factorize an empty interpolation set")
        if self.p > self.n:
            raise ValueError(f"{self.p} points exceed ambient dimension {self.n}")
        wt = self.displacements().T
        q, r = np.linalg.qr(wt)
        # sign-normalize so diag(R) >= 0
        sign = np.where(np.diag(r) < 0, -1.0, 1.0)
        self.Q = q * sign
        self.R = r * sign[:, None]
        scale = np.linalg.norm(wt)
        diag = np.abs(np.diag(self.R))
        self.degenerate_columns = tuple(int(i) for i in np.flatnonzero(diag <= RANK_TOL * scale))
        self.valid = True
        return self

    @property
    def degenerate(self) -> bool:
        return bool(self.degenerate_columns)

    def _require_factors(self):
        if not self.valid:
            self.factorize()
        if self.degenerate:
            raise DegenerateSetError(
                f"rank-deficient interpolation set (columns {self.degenerate_columns})",
                self.degenerate_columns,
            )

    def reduced_points(self) -> np.ndarray:
        """Columns s_t with y_t = x + Q s_t (i.e. R)."""
        self._require_factors()
        return self.R

    def build_model(self) -> SubspaceModel:
        """Solve R^T J^T = [r(y_t) - r(x)] by forward substitution."""
        self._require_factors()
        rhs = self.residuals - self.base_residual
        jt = solve_triangular(self.R, rhs, trans="T", lower=False)
        jac = jt.T
        r0 = self.base_residual
        return SubspaceModel(jac, r0.copy(), jac.T @ r0, jac.T @ jac, self.f_base)

    def lagrange(self) -> LagrangeBasis:
        """Lagrange functionals in the reduced coordinates of the current QR.

        For t >= 1 the gradients are the rows of R^{-1}; l_0 = 1 - sum_t l_t.
        """
        self._require_factors()
        rinv = solve_triangular(self.R, np.eye(self.p), lower=False)
        grads = np.vstack([-rinv.sum(axis=0, keepdims=True), rinv])
        c = np.zeros(self.p + 1)
        c[0] = 1.0
        return LagrangeBasis(c, grads)

    def _ambient_lagrange_norms(self) -> np.ndarray:
        """Gradient norms of (least-squares) Lagrange functionals in R^n.

        Used when the set is overfull (more than p points in a p-dimensional
        affine subspace) or degenerate; coincides with the reduced form when the
        set is poised, since the ambient gradient is Q times the reduced one.
        """
        pinv = np.linalg.pinv(self.displacements(), rcond=1e-12)
        g = pinv.T  # row t: gradient of l_t
        return np.linalg.norm(np.vstack([-g.sum(axis=0, keepdims=True), g]), axis=1)

    def lagrange_ball_max(self, delta: float) -> np.ndarray:
        """max_{||x - base|| <= delta} |l_t(x)| for t = 0..p."""
        if self.p == 0:
            return np.ones(1)
        c = np.zeros(self.p + 1)
        c[0] = 1.0
        if self.p <= self.n:
            if not self.valid:
                self.factorize()
            if not self.degenerate:
                return self.lagrange().ball_max(delta)
        return np.abs(c) + delta * self._ambient_lagrange_norms()

    def poisedness(self, delta: float) -> float:
        """Lambda = max_t max_{||s||<=delta} |l_t(s)|."""
        return float(self.lagrange_ball_max(delta).max())

    def removal_scores(self, delta: float) -> np.ndarray:
        """theta_t = (ball max of |l_t|) * max(||y_t - x||^4 / delta^4, 1), t = 1..p."""
        lmax = self.lagrange_ball_max(delta)[1:]
        dist_factor = np.maximum((self.distances() / delta) ** 4, 1.0)
        return lmax * dist_factor

    def removal_order(self, delta: float, candidates=None) -> np.ndarray:
        """Point indices sorted for removal: largest theta, then farthest, then lowest index."""
        theta = self.removal_scores(delta)
        dist = self.distances()
        idx = np.arange(self.p) if candidates is None else np.asarray(candidates, dtype=int)
        order = np.lexsort((idx, -dist[idx], -theta[idx]))
        return idx[order]

    def remove_points(self, delta: float, p_drop: int, candidates=None) -> np.ndarray:
        """Remove the p_drop worst points (base is never a candidate); returns their indices."""
        pool = self.p if candidates is None else len(candidates)
        if not 0 <= p_drop <= pool:
            raise ValueError(f"p_drop={p_drop} outside [0, {pool}]")
        if p_drop == 0:
            return np.zeros(0, dtype=int)
        drop = np.sort(self.removal_order(delta, candidates)[:p_drop])
        self.delete(drop)
        return drop

    def append_directions(self, D, delta: float, evaluator: Callable[[np.ndarray], np.ndarray]) -> int:
        """Add points base + delta * d_j for the columns of D, evaluating each once.

        If an evaluation fails the point is not added and the error propagates;
        points evaluated before the failure are kept.
        """
        D = np.asarray(D, dtype=float).reshape(self.n, -1)
        added = 0
        for j in range(D.shape[1]):
            y = self.base + delta * D[:, j]
            r = evaluator(y)
            self.add_point(y, r)
            added += 1
        return added

    def diagnostics(self, delta: float) -> list[dict]:
        """Per-point rows (index, distance, theta) plus the set's Lambda, for CSV dumps."""
        theta = self.removal_scores(delta) if self.p else np.zeros(0)
        lam = self.poisedness(delta)
        dist = self.distances()
        return [
            {"point": t + 1, "distance": float(dist[t]), "theta": float(theta[t]), "lambda": lam}
            for t in range(self.p)
        ]


def fresh_set(base, base_residual, directions, delta, evaluator) -> InterpolationSet:
    """Convenience: base plus base + delta * d_j for each column d_j."""
    s = InterpolationSet(base, base_residual)
    s.append_directions(directions, delta, evaluator)
    return s
