"""Derivative-free Gauss-Newton methods in random subspaces."""
from .problems import LeastSquaresProblem, ObjectiveValue, evaluate, get_problem, objective
from .solvers import SolverConfig, SolverResult, dfbgn_solve, rsdfo_gn_solve, solve

__all__ = [
    "LeastSquaresProblem",
    "ObjectiveValue",
    "evaluate",
    "objective",
    "get_problem",
    "SolverConfig",
    "SolverResult",
    "dfbgn_solve",
    "rsdfo_gn_solve",
    "solve",
]

__version__ = "0.1.0"
