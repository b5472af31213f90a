"""Minimax optimization with first- and second-order leader/follower methods.

Solvers touch problems only through gradients and Hessian-vector products;
Newton-type steps solve their linear systems with matrix-free CG.
"""

from .errors import (
    AnalysisError,
    ArgumentError,
    ConfigError,
    ConvergenceError,
    MinimaxError,
    NumericalFailure,
    PreconditionError,
    SingularityError,
    SingularityWarning,
)
from .oracle import CgBudget, MinimaxOracle, Point
from .problems import make_problem
from .solvers import Algorithm, Mode, SolverSpec, StepState, StopRule, Trace, run, step

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "ArgumentError",
    "ConfigError",
    "ConvergenceError",
    "MinimaxError",
    "NumericalFailure",
    "PreconditionError",
    "SingularityError",
    "SingularityWarning",
    "CgBudget",
    "MinimaxOracle",
    "Point",
    "make_problem",
    "Algorithm",
    "Mode",
    "SolverSpec",
    "StepState",
    "StopRule",
    "Trace",
    "run",
    "step",
]
