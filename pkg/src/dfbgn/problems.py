"""Nonlinear least-squares test problems.

Each problem is a residual map ``r: R^n -> R^m`` with a standard starting
point. Formulas follow the usual CUTEst / More-Garbow-Hillstrom definitions.
The objective convention is ``f(x) = 0.5 * ||r(x)||^2``; reference tables
(and the ``two_f`` fields) use ``||r(x)||^2`` without the half.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

__all__ = [
    "EvaluationError",
    "ProblemLookupError",
    "LeastSquaresProblem",
    "ObjectiveValue",
    "evaluate",
    "objective",
    "get_problem",
    "problem_names",
    "manifest",
    "REFERENCE_TWO_F0",
    "validate_against_reference",
]


class EvaluationError(ValueError):
    """Residual evaluation returned something unusable (wrong shape, inf, nan)."""


class ProblemLookupError(KeyError):
    """Unknown problem name or a dimension the family does not support."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class ObjectiveValue:
    f: float

    @property
    def two_f(self) -> float:
        return 2.0 * self.f


@dataclass(frozen=True)
class LeastSquaresProblem:
    name: str
    n: int
    m: int
    x0: np.ndarray
    residual_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    f_star: Optional[float] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"{self.name}: need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.n,):
            raise ValueError(f"{self.name}: x0 has shape {x0.shape}, expected ({self.n},)")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)

    @property
    def two_f_star(self) -> Optional[float]:
        return None if self.f_star is None else 2.0 * self.f_star

    def residuals(self, x) -> np.ndarray:
        return evaluate(self, x)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def evaluate(problem: LeastSquaresProblem, x) -> np.ndarray:
    """Evaluate r(x), checking dimensions and finiteness."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"{problem.name}: x has shape {x.shape}, expected ({problem.n},)")
    r = np.asarray(problem.residual_fn(x), dtype=float)
    if r.shape != (problem.m,):
        raise EvaluationError(f"{problem.name}: residual has shape {r.shape}, expected ({problem.m},)")
    if not np.all(np.isfinite(r)):
        raise EvaluationError(f"{problem.name}: non-finite residual")
    return r


def objective(r) -> ObjectiveValue:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise EvaluationError("non-finite residual vector")
    return ObjectiveValue(0.5 * float(np.dot(r, r)))


# ---------------------------------------------------------------------------
# Residual functions. All take x of length n and return a fresh array.


def _broydn3d(x):
    # Broyden tridiagonal, kappa1 = 2, kappa2 = 1
    r = (3.0 - 2.0 * x) * x + 1.0
    r[1:] -= x[:-1]
    r[:-1] -= 2.0 * x[1:]
    return r


def _argtrig(x):
    n = x.size
    i = np.arange(1, n + 1)
    c = np.cos(x)
    return n - c.sum() + i * (1.0 - c - np.sin(x))


def _vardimne(x):
    n = x.size
    d = x - 1.0
    s = float(np.dot(np.arange(1, n + 1), d))
    return np.concatenate([d, [s, s * s]])


def _arwhdne(x):
    return np.concatenate([x[:-1] ** 2 + x[-1] ** 2, 4.0 * x[:-1] - 3.0])


def _chandheq(x, mu, c=1.0):
    # H-equation with uniform weights 1/n on nodes mu_i = i/n
    n = x.size
    a = mu[:, None] / (mu[:, None] + mu[None, :])
    return x - 1.0 - (0.5 * c / n) * x * (a @ x)


def _morebvne(x):
    n = x.size
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h
    cube = 0.5 * h * h * (x + t + 1.0) ** 3
    r = 2.0 * x + cube
    r[1:] -= x[:-1]
    r[:-1] -= x[1:]
    # CUTEst's last group reads 2*x[n-1] - x[n-1] (x[n] never enters); kept so
    # starting values agree with the published large-scale table
    if n >= 2:
        r[-1] = x[-2] + cube[-1]
    return r


def _integreq(x):
    n = x.size
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h
    c = (x + t + 1.0) ** 3
    lower = np.cumsum(t * c)  # sum_{j<=i} t_j c_j
    upper_all = (1.0 - t) * c
    upper = np.concatenate([np.cumsum(upper_all[::-1])[::-1][1:], [0.0]])  # sum_{j>i}
    return x + 0.5 * h * ((1.0 - t) * lower + t * upper)


def _powellse(x):
    r = np.empty_like(x)
    r[0::4] = x[0::4] + 10.0 * x[1::4]
    r[1::4] = 5.0 * (x[2::4] - x[3::4])
    r[2::4] = (x[1::4] - 2.0 * x[2::4]) ** 2
    r[3::4] = 10.0 * (x[0::4] - x[3::4]) ** 2
    return r


def _rosenbrock(x):
    r = np.empty_like(x)
    r[0::2] = 10.0 * (x[1::2] - x[0::2] ** 2)
    r[1::2] = 1.0 - x[0::2]
    return r


def _linear(x, a, b):
    return a @ x - b


# ---------------------------------------------------------------------------
# Factories.


def _arwhdne_two_fstar(n: int) -> float:
    # x_i = a (i < n), x_n = 0 with a the real root of a^3 + 8a - 6 = 0
    roots = np.roots([1.0, 0.0, 8.0, -6.0])
    a = float(roots[np.abs(roots.imag) < 1e-12].real[0])
    return (n - 1) * (a**4 + (4.0 * a - 3.0) ** 2)


def _make_broydn3d(n):
    return LeastSquaresProblem("broydn3d", n, n, -np.ones(n), _broydn3d, 0.0)


def _make_argtrig(n):
    return LeastSquaresProblem("argtrig", n, n, np.full(n, 1.0 / n), _argtrig, 0.0)


def _make_vardimne(n):
    x0 = 1.0 - np.arange(1, n + 1) / n
    return LeastSquaresProblem("vardimne", n, n + 2, x0, _vardimne, 0.0)


def _make_arwhdne(n):
    return LeastSquaresProblem(
        "arwhdne", n, 2 * (n - 1), np.ones(n), _arwhdne, 0.5 * _arwhdne_two_fstar(n)
    )


def _make_chandheq(n):
    mu = np.arange(1, n + 1) / n
    return LeastSquaresProblem("chandheq", n, n, np.ones(n), partial(_chandheq, mu=mu), 0.0)


def _make_morebvne(n):
    t = np.arange(1, n + 1) / (n + 1)
    return LeastSquaresProblem("morebvne", n, n, t * (t - 1.0), _morebvne, 0.0)


def _make_integreq(n):
    t = np.arange(1, n + 1) / (n + 1)
    return LeastSquaresProblem("integreq", n, n, t * (t - 1.0), _integreq, 0.0)


def _make_powellse(n):
    x0 = np.tile([3.0, -1.0, 0.0, 1.0], n // 4)
    return LeastSquaresProblem("powellse", n, n, x0, _powellse, 0.0)


def _make_rosenbrock(n):
    x0 = np.tile([-1.2, 1.0], n // 2)
    return LeastSquaresProblem("rosenbrock", n, n, x0, _rosenbrock, 0.0)


# name -> (factory, dimension predicate, description of valid n)
_REGISTRY: dict[str, tuple[Callable[[int], LeastSquaresProblem], Callable[[int], bool], str]] = {
    "argtrig": (_make_argtrig, lambda n: n >= 1, "n >= 1"),
    "arwhdne": (_make_arwhdne, lambda n: n >= 2, "n >= 2"),
    "broydn3d": (_make_broydn3d, lambda n: n >= 2, "n >= 2"),
    "chandheq": (_make_chandheq, lambda n: n >= 1, "n >= 1"),
    "integreq": (_make_integreq, lambda n: n >= 1, "n >= 1"),
    "morebvne": (_make_morebvne, lambda n: n >= 2, "n >= 2"),
    "powellse": (_make_powellse, lambda n: n >= 4 and n % 4 == 0, "n a positive multiple of 4"),
    "rosenbrock": (_make_rosenbrock, lambda n: n >= 2 and n % 2 == 0, "n a positive even integer"),
    "vardimne": (_make_vardimne, lambda n: n >= 1, "n >= 1"),
}

_ALIASES = {"extended-rosenbrock": "rosenbrock", "rosenbr": "rosenbrock"}


def problem_names() -> list[str]:
    return sorted(_REGISTRY)


def get_problem(name: str, n: int) -> LeastSquaresProblem:
    """Instantiate a registered problem family at dimension ``n``."""
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _REGISTRY:
        raise ProblemLookupError(
            f"unknown problem {name!r}; valid names: {', '.join(problem_names())}"
        )
    factory, valid, rule = _REGISTRY[key]
    if not isinstance(n, (int, np.integer)) or not valid(int(n)):
        raise ProblemLookupError(f"invalid dimension n={n!r} for {key}: need {rule}")
    return factory(int(n))


def linear_problem(a, b, x0=None, name="linear") -> LeastSquaresProblem:
    """Affine residual r(x) = A x - b; f_star from a dense least-squares solve."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    x0 = np.zeros(n) if x0 is None else x0
    xs, *_ = np.linalg.lstsq(a, b, rcond=None)
    res = a @ xs - b
    return LeastSquaresProblem(name, n, m, x0, partial(_linear, a=a, b=b), 0.5 * float(res @ res))


# 2f(x0) for the large-scale CUTEst instances (n, value, significant digits printed)
REFERENCE_TWO_F0: dict[tuple[str, int], tuple[float, int]] = {
    ("argtrig", 1000): (333.0006, 7),
    ("arwhdne", 5000): (24995.0, 5),
    ("broydn3d", 1000): (1011.0, 4),
    ("chandheq", 1000): (69.41682, 7),
    ("integreq", 1000): (5.678349, 7),
    ("morebvne", 1000): (3.961509e-6, 7),
    ("powellse", 1000): (418750.0, 6),
    ("vardimne", 1000): (1.241994e22, 7),
}

# 2f(x*) reported alongside (only nonzero entries listed)
REFERENCE_TWO_FSTAR: dict[tuple[str, int], float] = {("arwhdne", 5000): 1396.793}


def reference_tolerance(digits: int) -> float:
    """Relative tolerance for a value printed with ``digits`` significant figures."""
    return 1e-4 if digits >= 7 else 1e-6


def validate_against_reference() -> dict[tuple[str, int], tuple[float, float, bool]]:
    """Check every tabulated instance; maps key -> (computed 2f0, reference, ok)."""
    out = {}
    for (name, n), (ref, digits) in REFERENCE_TWO_F0.items():
        prob = get_problem(name, n)
        val = objective(evaluate(prob, prob.x0)).two_f
        ok = abs(val - ref) / abs(ref) <= reference_tolerance(digits)
        out[(name, n)] = (val, ref, ok)
    return out


def manifest(instances) -> list[dict]:
    """Rows ``name,n,m,two_f0,two_fstar`` for (name, n) pairs or problem objects."""
    rows = []
    for item in instances:
        prob = item if isinstance(item, LeastSquaresProblem) else get_problem(*item)
        r0 = evaluate(prob, prob.x0)
        rows.append(
            {
                "name": prob.name,
                "n": prob.n,
                "m": prob.m,
                "two_f0": objective(r0).two_f,
                "two_fstar": prob.two_f_star,
            }
        )
    return rows


# Named collections used by the benchmark driver
COLLECTIONS: dict[str, list[tuple[str, int]]] = {
    "cr-small": [
        ("argtrig", 10),
        ("arwhdne", 10),
        ("broydn3d", 10),
        ("chandheq", 10),
        ("integreq", 10),
        ("morebvne", 10),
        ("powellse", 12),
        ("rosenbrock", 10),
        ("vardimne", 10),
    ],
    "cr-desk": [
        ("argtrig", 100),
        ("arwhdne", 100),
        ("broydn3d", 100),
        ("chandheq", 100),
        ("integreq", 100),
        ("powellse", 100),
    ],
}
