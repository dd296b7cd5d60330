"""Random subspace generators.

Three constructions are available: orthonormal directions (optionally
orthogonal to an existing block), dense Gaussian sketches and sparse
s-hashing sketches. All take an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SUBSPACE_KINDS",
    "SubspaceBasis",
    "DegenerateDrawError",
    "orthonormal_complement",
    "gaussian_sketch",
    "hashing_sketch",
    "gaussian_qmax",
    "sample_basis",
    "alignment",
]

SUBSPACE_KINDS = ("orthonormal", "gaussian", "hashing")
MAX_REDRAWS = 5
_ORTH_TOL = 1e-10


class DegenerateDrawError(RuntimeError):
    """Random draw stayed rank deficient (or out of bounds) after all redraws."""


@dataclass
class SubspaceBasis:
    Q: Union[np.ndarray, sp.sparray]
    kind: str
    rejections: int = 0

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def p(self) -> int:
        return self.Q.shape[1]

    def dense(self) -> np.ndarray:
        return self.Q.toarray() if sp.issparse(self.Q) else np.asarray(self.Q)


def _check_dims(n: int, p: int) -> None:
    if n < 1 or p < 1 or p > n:
        raise ValueError(f"need 1 <= p <= n, got n={n}, p={p}")


def orthonormal_complement(existing: Optional[np.ndarray], q: int, rng: np.random.Generator,
                           n: Optional[int] = None) -> np.ndarray:
    """Draw q orthonormal directions orthogonal to the columns of ``existing``.

    A standard normal block is projected off ``existing`` (twice, for
    numerical safety) and orthonormalized by QR. Rank-deficient draws are
    redrawn up to ``MAX_REDRAWS`` times.
    """
    if existing is None or np.size(existing) == 0:
        if n is None:
            if existing is None:
                raise ValueError("ambient dimension n is required when existing is empty")
            n = np.shape(existing)[0]
        base = np.zeros((n, 0))
    else:
        base = np.asarray(existing, dtype=float)
        if base.ndim == 1:
            base = base[:, None]
        n = base.shape[0] if n is None else n
        if base.shape[0] != n:
            raise ValueError(f"existing has {base.shape[0]} rows, expected {n}")
    p1 = base.shape[1]
    if q < 0 or p1 + q > n:
        raise ValueError(f"cannot add {q} directions to {p1} in dimension {n}")
    if q == 0:
        return np.zeros((n, 0))

    for _ in range(MAX_REDRAWS):
        a = rng.standard_normal((n, q))
        for _ in range(2):
            a -= base @ (base.T @ a)
        d, r = np.linalg.qr(a)
        diag = np.abs(np.diag(r))
        if diag.min() > 1e-10 * max(1.0, diag.max()):
            # one more projection pass after QR keeps orthogonality at ~eps
            if p1:
                d -= base @ (base.T @ d)
                d, _ = np.linalg.qr(d)
            return d
    raise DegenerateDrawError(f"rank-deficient direction block after {MAX_REDRAWS} draws")


def gaussian_qmax(n: int, p: int) -> float:
    """Norm cap for sketches: comfortably above the expected top singular value."""
    return 3.0 * (1.0 + np.sqrt(n / p))


def _spectral_norm(q) -> float:
    dense = q.toarray() if sp.issparse(q) else q
    return float(np.linalg.norm(dense, 2))


def gaussian_sketch(n: int, p: int, rng: np.random.Generator) -> SubspaceBasis:
    """n x p matrix with i.i.d. N(0, 1/p) entries, redrawn while its norm exceeds the cap."""
    _check_dims(n, p)
    qmax = gaussian_qmax(n, p)
    scale = 1.0 / np.sqrt(p)
    for rejections in range(MAX_REDRAWS + 1):
        q = scale * rng.standard_normal((n, p))
        if _spectral_norm(q) <= qmax:
            return SubspaceBasis(q, "gaussian", rejections)
    raise DegenerateDrawError(f"Gaussian sketch exceeded norm cap {qmax:.3g} on every draw")


def hashing_sketch(n: int, p: int, s: int, rng: np.random.Generator) -> SubspaceBasis:
    """Sparse n x p matrix; each ambient coordinate (row) gets exactly s entries ±1/sqrt(s)."""
    _check_dims(n, p)
    if not 1 <= s <= p:
        raise ValueError(f"hashing sparsity must satisfy 1 <= s <= p, got s={s}, p={p}")
    qmax = gaussian_qmax(n, p)
    for rejections in range(MAX_REDRAWS + 1):
        # distinct columns per row: first s entries of independent row permutations
        cols = np.argsort(rng.random((n, p)), axis=1)[:, :s]
        signs = rng.choice(np.array([-1.0, 1.0]), size=(n, s))
        rows = np.repeat(np.arange(n), s)
        q = sp.csr_array((signs.ravel() / np.sqrt(s), (rows, cols.ravel())), shape=(n, p))
        if _spectral_norm(q) <= qmax:
            return SubspaceBasis(q, "hashing", rejections)
    raise DegenerateDrawError(f"hashing sketch exceeded norm cap {qmax:.3g} on every draw")


def sample_basis(kind: str, n: int, p: int, rng: np.random.Generator, hash_s: int = 1) -> SubspaceBasis:
    if kind == "orthonormal":
        _check_dims(n, p)
        return SubspaceBasis(orthonormal_complement(None, p, rng, n=n), "orthonormal")
    if kind == "gaussian":
        return gaussian_sketch(n, p, rng)
    if kind == "hashing":
        return hashing_sketch(n, p, hash_s, rng)
    raise ValueError(f"unknown subspace kind {kind!r}; expected one of {SUBSPACE_KINDS}")


def alignment(Q, g) -> float:
    """||Q^T g|| / ||g||."""
    g = np.asarray(g, dtype=float)
    gn = np.linalg.norm(g)
    if gn == 0.0:
        raise ValueError("alignment undefined for a zero vector")
    return float(np.linalg.norm(Q.T @ g) / gn)
