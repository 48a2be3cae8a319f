"""Conic solver layer: QP with equalities, box rows and 3-d second-order cones."""
from .admm import HAVE_KERNEL, AdmmNumericalError, AdmmSolver, admm_solve, default_backend
from .oracle import ORACLE_MAX_VARIABLES, oracle_solve
from .program import (
    STATUS_INFEASIBLE_SUSPECT,
    STATUS_MAX_ITER,
    STATUS_SOLVED,
    ConicProgram,
    Solution,
    SolverConfig,
    constraint_violation,
    kkt_residuals,
    project_rows,
    project_soc,
    project_soc_polar,
)

__all__ = [
    "AdmmNumericalError",
    "AdmmSolver",
    "ConicProgram",
    "HAVE_KERNEL",
    "ORACLE_MAX_VARIABLES",
    "STATUS_INFEASIBLE_SUSPECT",
    "STATUS_MAX_ITER",
    "STATUS_SOLVED",
    "Solution",
    "SolverConfig",
    "admm_solve",
    "constraint_violation",
    "default_backend",
    "kkt_residuals",
    "oracle_solve",
    "project_rows",
    "project_soc",
    "project_soc_polar",
]
