"""LP engine, cutting-plane relaxation, branch-and-cut and the external-solver bridge."""

from .branch_and_cut import BranchAndCut, branch_and_cut
from .config import SolveConfig, SolveReport, SolveStatus, gap_percent
from .external import CbcAdapter, external_milp_adapter
from .lpfile import read_lp, write_lp
from .relaxation import RelaxationResult, model_to_lp, solve_root_relaxation
from .simplex import Basis, LinearProgram, LPResult, LPStatus, solve_lp

__all__ = [
    "Basis",
    "BranchAndCut",
    "CbcAdapter",
    "LinearProgram",
    "LPResult",
    "LPStatus",
    "RelaxationResult",
    "SolveConfig",
    "SolveReport",
    "SolveStatus",
    "branch_and_cut",
    "external_milp_adapter",
    "gap_percent",
    "model_to_lp",
    "read_lp",
    "solve_lp",
    "solve_root_relaxation",
    "write_lp",
]
