"""Minimal-Lipschitz-gradient C^{1,1} interpolation of scattered data.

Interpolates finite sets of (site, value, gradient) jets — or values alone —
by a piecewise-quadratic function whose gradient has the smallest possible
Lipschitz constant, with exact closed-form evaluation on a power-diagram
cell decomposition.
"""

from .core import (
    DimensionMismatchError,
    DuplicateSiteError,
    FunctionData,
    Jet,
    NonFiniteEntryError,
    OneField,
    ValidationError,
    jet_eval,
    validate,
)
from .gamma import (
    TILDE_RATIO,
    GammaBreakdown,
    gamma1_exact,
    gamma1_sup_sample,
    gamma1_tilde,
    wells_condition_check,
)
from .optim import QcqpProblem, SolverReport, barrier_solve, solve_function_problem
from .query import LocatorTree, NoCellFoundError, QueryResult, evaluate, evaluate_many, locate
from .wells import (
    WellsCell,
    WellsConditionViolatedError,
    WellsModel,
    build_model,
    model_from_json,
    model_to_json,
)
from .wspd import approx_constant, build_wspd, gamma1_approx

__version__ = "1.0.0"

__all__ = [
    "DimensionMismatchError", "DuplicateSiteError", "FunctionData", "Jet",
    "NonFiniteEntryError", "OneField", "ValidationError", "jet_eval", "validate",
    "TILDE_RATIO", "GammaBreakdown", "gamma1_exact", "gamma1_sup_sample",
    "gamma1_tilde", "wells_condition_check",
    "QcqpProblem", "SolverReport", "barrier_solve", "solve_function_problem",
    "LocatorTree", "NoCellFoundError", "QueryResult", "evaluate",
    "evaluate_many", "locate",
    "WellsCell", "WellsConditionViolatedError", "WellsModel", "build_model",
    "model_from_json", "model_to_json",
    "approx_constant", "build_wspd", "gamma1_approx",
]
