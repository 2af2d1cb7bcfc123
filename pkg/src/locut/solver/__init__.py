"""Miniature branch-and-cut solver with a local-cut switch."""

from .bnc import branch_and_cut, compute_pdi, root_cut_loop, root_stats
from .cuts import Cut, gomory_cuts
from .lp import LpSolution, WorkCounter, solve_lp, solve_lp_instance
from .presolve import PresolveResult, presolve
from .records import RootStats, RunRecord, SolverConfig, read_runs, write_runs
from .scaling import ScaledProblem, scale

__all__ = [
    "Cut",
    "LpSolution",
    "PresolveResult",
    "RootStats",
    "RunRecord",
    "ScaledProblem",
    "SolverConfig",
    "WorkCounter",
    "branch_and_cut",
    "compute_pdi",
    "gomory_cuts",
    "presolve",
    "read_runs",
    "root_cut_loop",
    "root_stats",
    "scale",
    "solve_lp",
    "solve_lp_instance",
    "write_runs",
]
