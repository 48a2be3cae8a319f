import numpy as np
import pytest

from harmonic_mpc.harmonic import HarmonicParams, cone_margins, dynamics_residual, evaluate, rotate
from harmonic_mpc.hmpc import (
    ArtificialReferenceProblem,
    HmpcConfig,
    HmpcProblem,
    ReferenceParams,
    build,
    candidate_residuals,
    lyapunov_value,
    offset_cost,
    optimal_artificial_reference,
    shift_solution,
)
from harmonic_mpc.model import step
from harmonic_mpc.reference import advance, make_admissible_harmonic, StateShapeHint
from harmonic_mpc.socp import SolverConfig, oracle_solve


@pytest.fixture(scope="module")
def di_problem(double_integrator, di_cfg):
    model, cons = double_integrator
    return build(model, cons, di_cfg)


@pytest.fixture(scope="module")
def di_reference(double_integrator, di_cfg):
    model, cons = double_integrator
    return make_admissible_harmonic(model, cons, di_cfg.w,
                                    StateShapeHint((0,), [0.5], [1.0], [0.5]), di_cfg.sigma)


def test_config_validation():
    I2, I1 = np.eye(2), np.eye(1)
    with pytest.raises(ValueError, match="sigma"):
        HmpcConfig(N=4, Q=I2, R=I1, T_e=I2, S_e=I1, T_h=I2, S_h=I1, w=0.3, sigma=0.0)
    with pytest.raises(ValueError, match="diagonal"):
        HmpcConfig(N=4, Q=I2, R=I1, T_e=I2, S_e=I1,
                   T_h=np.array([[1.0, 0.5], [0.5, 1.0]]), S_h=I1, w=0.3)
    with pytest.raises(ValueError, match="positive definite"):
        HmpcConfig(N=4, Q=np.diag([1.0, 0.0]), R=I1, T_e=I2, S_e=I1, T_h=I2, S_h=I1, w=0.3)


def test_short_horizon_warns(double_integrator):
    model, cons = double_integrator
    I2, I1 = np.eye(2), np.eye(1)
    cfg = HmpcConfig(N=1, Q=I2, R=I1, T_e=I2, S_e=I1, T_h=I2, S_h=I1, w=0.3)
    with pytest.warns(UserWarning, match="controllability index"):
        build(model, cons, cfg)


def test_problem_dimensions(di_problem, double_integrator, di_cfg):
    model, cons = double_integrator
    n_x, n_u, n_y, N = model.n_x, model.n_u, cons.n_y, di_cfg.N
    d = di_problem.dimensions()
    assert d["variables"] == N * (n_x + n_u) + 3 * (n_x + n_u)
    # init + dynamics + merged terminal row + artificial dynamics equalities
    assert d["equalities"] == n_x * (N + 4)
    assert d["cones"] == 2 * n_y
    assert d["box_rows"] == N * n_y


def test_dimensions_independent_of_frequency(double_integrator, di_cfg):
    from dataclasses import replace

    model, cons = double_integrator
    a = build(model, cons, replace(di_cfg, w=np.pi / 16))
    b = build(model, cons, replace(di_cfg, w=np.pi / 512))
    da, db = a.dimensions(), b.dimensions()
    assert da == db  # includes the sparsity fingerprint


def test_solve_on_reference_zero_cost(di_problem, di_reference, di_cfg):
    w = di_cfg.w
    x0 = evaluate(di_reference.xr, w, 0)
    sol = di_problem.solve(x0, di_reference)
    assert sol.status == "solved"
    assert sol.objective <= 1e-6
    assert np.abs(sol.u0 - evaluate(di_reference.ur, w, 0)).max() <= 1e-4
    stage_err = sol.states - evaluate(sol.xH, w, np.arange(di_cfg.N))
    assert np.abs(stage_err).max() <= 1e-4


def test_solve_perturbed_positive_objective(di_problem, di_reference, di_cfg):
    w = di_cfg.w
    x0 = evaluate(di_reference.xr, w, 0) + np.array([0.05, -0.03])
    sol = di_problem.solve(x0, di_reference)
    assert sol.status == "solved"
    assert sol.objective > 1e-4
    xN = step(di_problem.model, sol.states[-1], sol.inputs[-1])
    assert np.abs(xN - evaluate(sol.xH, w, di_cfg.N)).max() <= 1e-6
    assert np.abs(sol.states[0] - x0).max() <= 1e-9


def test_solve_matches_oracle(di_problem, di_reference):
    x0 = evaluate(di_reference.xr, di_problem.cfg.w, 0) + np.array([0.3, -0.2])
    sol = di_problem.solve(x0, di_reference)
    o = oracle_solve(di_problem.instance_program(x0, di_reference))
    assert abs(sol.objective - o.objective) <= 1e-4 * (1 + abs(o.objective))


def test_solution_invariants_on_random_states(di_problem, di_reference, di_cfg):
    model, cons = di_problem.model, di_problem.constraints
    rng = np.random.default_rng(21)
    for _ in range(10):
        x0 = evaluate(di_reference.xr, di_cfg.w, 0) + rng.normal(scale=0.2, size=2)
        sol = di_problem.solve(x0, di_reference)
        assert sol.status == "solved"
        xN = step(model, sol.states[-1], sol.inputs[-1])
        assert np.abs(xN - evaluate(sol.xH, di_cfg.w, di_cfg.N)).max() <= 1e-6
        assert dynamics_residual(sol.xH, sol.uH, model, di_cfg.w) <= 1e-6
        assert cone_margins(sol.xH, sol.uH, cons, di_cfg.sigma).min_margin >= -1e-6


def test_shift_solution_feasible_at_tight_tolerance(di_problem, di_reference, di_cfg):
    """Candidates built from accurately solved problems satisfy every
    constraint at the successor state."""
    model, cons = di_problem.model, di_problem.constraints
    rng = np.random.default_rng(22)
    for _ in range(8):
        x0 = evaluate(di_reference.xr, di_cfg.w, 0) + rng.normal(scale=0.25, size=2)
        sol = di_problem.solve(x0, di_reference, tol=1e-10)
        cand = shift_solution(sol, model, di_cfg)
        x1 = step(model, x0, sol.u0)
        res = candidate_residuals(model, cons, di_cfg, cand, x1)
        assert res["max"] <= 1e-8, res


def test_shift_solution_closes_artificial_dynamics(di_problem, di_reference, di_cfg):
    model = di_problem.model
    x0 = evaluate(di_reference.xr, di_cfg.w, 0)
    sol = di_problem.solve(x0, di_reference, tol=1e-9)
    before = dynamics_residual(sol.xH, sol.uH, model, di_cfg.w)
    cand = shift_solution(sol, model, di_cfg)
    after = dynamics_residual(cand.xH, cand.uH, model, di_cfg.w)
    assert after <= before + 1e-12


def test_shift_solution_matches_next_optimum_in_steady_regime(di_problem, di_reference, di_cfg):
    w = di_cfg.w
    x0 = evaluate(di_reference.xr, w, 0)
    sol = di_problem.solve(x0, di_reference, tol=1e-9)
    cand = shift_solution(sol, di_problem.model, di_cfg)
    x1 = step(di_problem.model, x0, sol.u0)
    nxt = di_problem.solve(x1, advance(di_reference, w), tol=1e-9)
    assert np.abs(cand.states - nxt.states).max() <= 1e-4
    assert np.abs(cand.inputs - nxt.inputs).max() <= 1e-4
    assert np.abs(cand.xH.stacked() - nxt.xH.stacked()).max() <= 1e-4


def test_optimal_artificial_reference_identity_when_admissible(
        double_integrator, di_cfg, di_reference):
    model, cons = double_integrator
    xH, uH = optimal_artificial_reference(model, cons, di_cfg, di_reference)
    assert np.abs(xH.stacked() - di_reference.xr.stacked()).max() <= 1e-6
    assert np.abs(uH.stacked() - di_reference.ur.stacked()).max() <= 1e-6


def test_optimal_artificial_reference_center_pulled_to_boundary(double_integrator, di_cfg):
    model, cons = double_integrator
    # constant reference centered far outside the position box [-5, 5]
    ref = ReferenceParams(
        HarmonicParams([8.0, 0.0], [0.0, 0.0], [0.0, 0.0]),
        HarmonicParams([0.0], [0.0], [0.0]),
    )
    art = ArtificialReferenceProblem(model, cons, di_cfg)
    xH, uH, sol = art.solve(ref)
    assert sol.status == "solved"
    assert xH.center[0] == pytest.approx(5.0 - di_cfg.sigma, abs=1e-4)
    o = oracle_solve(art.instance_program(ref))
    assert abs(sol.objective - o.objective) <= 1e-4 * (1 + abs(o.objective))


def test_artificial_reference_rotation_equivariance(double_integrator, di_cfg):
    model, cons = double_integrator
    art = ArtificialReferenceProblem(model, cons, di_cfg)
    rng = np.random.default_rng(23)
    for _ in range(5):
        ref = ReferenceParams(
            HarmonicParams(rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)),
            HarmonicParams(rng.normal(scale=0.3, size=1), rng.normal(scale=0.3, size=1),
                           rng.normal(scale=0.3, size=1)),
        )
        x1, u1, _ = art.solve(ref)
        x2, u2, _ = art.solve(advance(ref, di_cfg.w))
        assert np.abs(x2.stacked() - rotate(x1, di_cfg.w).stacked()).max() <= 1e-6
        assert np.abs(u2.stacked() - rotate(u1, di_cfg.w).stacked()).max() <= 1e-6


def test_offset_cost_zero_at_reference(di_cfg, di_reference):
    assert offset_cost(di_reference.xr, di_reference.ur, di_reference, di_cfg) == 0.0


def test_offset_cost_rotation_invariance(di_cfg, di_reference):
    rng = np.random.default_rng(24)
    xH = HarmonicParams(rng.normal(size=2), rng.normal(size=2), rng.normal(size=2))
    uH = HarmonicParams(rng.normal(size=1), rng.normal(size=1), rng.normal(size=1))
    v1 = offset_cost(xH, uH, di_reference, di_cfg)
    rref = advance(di_reference, di_cfg.w)
    v2 = offset_cost(rotate(xH, di_cfg.w), rotate(uH, di_cfg.w), rref, di_cfg)
    assert v2 == pytest.approx(v1, rel=1e-12)


def test_offset_cost_case_study_unit_error(ball_and_plate, case_study_cfg):
    # one unit of center error in the first state times T_e = 50 Q with Q[0,0] = 10
    ref = ReferenceParams(HarmonicParams.zeros(8), HarmonicParams.zeros(2))
    xH = HarmonicParams(np.eye(8)[0], np.zeros(8), np.zeros(8))
    uH = HarmonicParams.zeros(2)
    assert offset_cost(xH, uH, ref, case_study_cfg) == pytest.approx(500.0)


def test_lyapunov_value(di_problem, double_integrator, di_cfg, di_reference):
    model, cons = double_integrator
    w = di_cfg.w
    x0 = evaluate(di_reference.xr, w, 0)
    sol = di_problem.solve(x0, di_reference)
    W0 = lyapunov_value(sol.objective, model, cons, di_cfg, di_reference)
    assert abs(W0) <= 1e-6  # zero at convergence
    sol2 = di_problem.solve(x0 + np.array([0.2, 0.1]), di_reference)
    W2 = lyapunov_value(sol2.objective, model, cons, di_cfg, di_reference)
    assert W2 > 1e-3


def test_uniqueness_proxy_two_warm_starts_agree(di_problem, di_reference, di_cfg):
    x0 = evaluate(di_reference.xr, di_cfg.w, 0) + np.array([0.2, -0.1])
    rng = np.random.default_rng(25)
    a = di_problem.solve(x0, di_reference, tol=1e-6)
    warm = rng.normal(size=di_problem.n_vars)
    b_sol = di_problem.solver.solve(
        q=di_problem.linear_cost(di_reference)[0], g=di_problem.rhs(x0),
        warm=warm, tol=1e-6)
    assert np.abs(a.solution.z - b_sol.z).max() <= 1e-4
