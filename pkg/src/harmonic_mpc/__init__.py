"""Harmonic MPC toolkit.

Tracking of periodic harmonic references with a harmonic artificial
reference, a first-order conic solver with a compiled inner loop, baseline
controllers, and a closed-loop simulation and benchmarking CLI.
"""
from .harmonic import (
    ConeMarginReport,
    Frequency,
    HarmonicParams,
    cone_margins,
    dynamics_residual,
    evaluate,
    is_admissible,
    rotate,
    rotation_matrix,
)
from .hmpc import (
    CandidateSolution,
    HmpcConfig,
    HmpcProblem,
    HmpcSolution,
    ReferenceParams,
    build,
    candidate_residuals,
    lyapunov_value,
    offset_cost,
    optimal_artificial_reference,
    shift_solution,
)
from .model import (
    LtiModel,
    OutputConstraint,
    constraint_margin,
    constraint_satisfied,
    constraint_value,
    controllability_index,
    make_ball_and_plate,
    make_double_integrator,
    step,
)
from .baselines import MpctConfig, MpctProblem, StdMpcConfig, StdMpcProblem, dare_solve
from .reference import (
    MultiHarmonicReference,
    StateShapeHint,
    advance,
    local_harmonic_approx,
    make_admissible_harmonic,
    make_dynamics_consistent_harmonic,
    make_multi_harmonic,
)
from .sim import (
    ClosedLoopLog,
    HarmonicReferenceProvider,
    HmpcController,
    MpctController,
    Scenario,
    StdMpcController,
    TrajectoryReferenceProvider,
    feasibility_audit,
    lyapunov_audit,
    performance,
    period_sweep,
    run_closed_loop,
)
from .socp import ConicProgram, Solution, SolverConfig, admm_solve, oracle_solve

__version__ = "0.1.0"
