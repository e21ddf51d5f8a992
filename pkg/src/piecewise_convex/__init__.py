"""
Piecewise-Convex Formulations

Incremental, multiple-choice and convex-combination models of separable
non-convex MINLPs, with perspective cuts and a branch-and-cut solver.
"""

__version__ = "0.1.0"

from .errors import PiecewiseError
from .formulation import (
    Formulation,
    SeparableProblem,
    build_ccm,
    build_im,
    build_mcm,
    build_model,
)
from .problems import gen_nck, gen_ufl, to_separable
from .solver import SolveConfig, SolveReport, branch_and_cut, solve_root_relaxation
from .univariate import UnivariateFunction, decompose, find_breakpoints

__all__ = [
    "Formulation",
    "PiecewiseError",
    "SeparableProblem",
    "SolveConfig",
    "SolveReport",
    "UnivariateFunction",
    "branch_and_cut",
    "build_ccm",
    "build_im",
    "build_mcm",
    "build_model",
    "decompose",
    "find_breakpoints",
    "gen_nck",
    "gen_ufl",
    "solve_root_relaxation",
    "to_separable",
]
