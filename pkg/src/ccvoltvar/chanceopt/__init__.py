"""Chance-constrained gain design."""

from .estimator import GainDesigner
from .functions import (
    HValues,
    best_u,
    cvar_constraint_estimate,
    eval_h,
    grad_q,
    q_of_t,
    q_of_x,
    smooth_g,
)
from .problem import DesignProblem, DesignSolution, DesignSpec
from .sca import ConvergenceWarning, evaluate_constraints, initial_point, ogd_sca
from .subproblem import SubproblemResult, solve_subproblem
from .surrogates import SurrogateBundle, build_surrogates, curvature_bounds, majorizer_matrices

__all__ = [
    "ConvergenceWarning",
    "DesignProblem",
    "DesignSolution",
    "DesignSpec",
    "GainDesigner",
    "HValues",
    "SubproblemResult",
    "SurrogateBundle",
    "best_u",
    "build_surrogates",
    "curvature_bounds",
    "cvar_constraint_estimate",
    "eval_h",
    "evaluate_constraints",
    "grad_q",
    "initial_point",
    "majorizer_matrices",
    "ogd_sca",
    "q_of_t",
    "q_of_x",
    "smooth_g",
    "solve_subproblem",
]
