import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonic_mpc.socp import (
    STATUS_SOLVED,
    AdmmNumericalError,
    AdmmSolver,
    ConicProgram,
    SolverConfig,
    admm_solve,
    kkt_residuals,
    oracle_solve,
    project_soc,
    project_soc_polar,
)
from harmonic_mpc.socp.admm import HAVE_KERNEL
from harmonic_mpc.verify import random_conic_program

triple = st.lists(st.floats(min_value=-50, max_value=50), min_size=3, max_size=3)


def test_project_soc_interior_fixed():
    y = np.array([2.0, 1.0, 0.0])
    assert np.allclose(project_soc(y), y)


def test_project_soc_polar_to_apex():
    assert np.allclose(project_soc([-2.0, 1.0, 0.0]), [0.0, 0.0, 0.0])


def test_project_soc_boundary_case_numeric_oracle():
    y = np.array([0.0, 2.0, 0.0])
    p = project_soc(y)
    assert np.allclose(p, [1.0, 1.0, 0.0])
    # brute-force: no cone point is closer than the projection
    best = np.inf
    for t in np.linspace(0.0, 3.0, 301):
        for r in np.linspace(0.0, t, 61):
            best = min(best, t * t + (2.0 - r) ** 2)
    assert np.linalg.norm(p - y) ** 2 <= best + 1e-4


@given(y=triple)
@settings(max_examples=300, deadline=None)
def test_project_soc_idempotent(y):
    p = project_soc(y)
    assert np.allclose(project_soc(p), p, atol=1e-12)


@given(a=triple, b=triple)
@settings(max_examples=300, deadline=None)
def test_project_soc_nonexpansive(a, b):
    a, b = np.asarray(a), np.asarray(b)
    d = np.linalg.norm(a - b)
    assert np.linalg.norm(project_soc(a) - project_soc(b)) <= d + 1e-9


@given(y=triple)
@settings(max_examples=300, deadline=None)
def test_moreau_decomposition(y):
    y = np.asarray(y)
    assert np.allclose(project_soc(y) + project_soc_polar(y), y, atol=1e-12)


def test_projection_sample_battery():
    rng = np.random.default_rng(11)
    ys = rng.normal(scale=5.0, size=(10000, 3))
    for y in ys:
        p = project_soc(y)
        assert np.hypot(p[1], p[2]) <= p[0] + 1e-12
        assert np.allclose(project_soc(p), p, atol=1e-12)
        assert np.allclose(p + project_soc_polar(y), y, atol=1e-12)


def test_admm_unconstrained():
    P = np.array([[4.0, 1.0], [1.0, 3.0]])
    q = np.array([1.0, -2.0])
    sol = admm_solve(ConicProgram(P=P, q=q))
    assert sol.status == STATUS_SOLVED
    assert np.abs(sol.z - (-np.linalg.solve(P, q))).max() < 1e-8


def test_admm_active_box_matches_oracle():
    P = np.array([[4.0, 1.0], [1.0, 3.0]])
    q = np.array([1.0, -2.0])
    prog = ConicProgram(P=P, q=q, M_box=np.eye(2), l=[-0.1, -0.1], u=[0.1, 0.1])
    s = admm_solve(prog, SolverConfig(rho=5.0, tol=1e-6))
    o = oracle_solve(prog)
    assert abs(s.objective - o.objective) <= 1e-4 * (1 + abs(o.objective))
    assert np.abs(s.z - o.z).max() < 1e-4


def test_admm_solved_status_implies_residuals_within_tol():
    rng = np.random.default_rng(2)
    cfg = SolverConfig(rho=5.0, tol=1e-5)
    for _ in range(5):
        prog = random_conic_program(rng, max_vars=30)
        s = admm_solve(prog, cfg)
        assert s.status == STATUS_SOLVED
        assert max(s.primal_res, s.dual_res) <= cfg.tol
        primal, dual = kkt_residuals(prog, s)
        assert primal <= 10 * cfg.tol
        assert dual <= 10 * cfg.tol


def test_kkt_residuals_zero_vector_unconstrained():
    prog = ConicProgram(P=np.eye(1), q=np.array([2.0]))
    sol = admm_solve(prog)
    from harmonic_mpc.socp import Solution

    zero = Solution(z=np.zeros(1), nu=np.zeros(0), mu=np.zeros(0), s=np.zeros(0),
                    primal_res=0, dual_res=0, iterations=0, status="solved",
                    objective=0.0)
    primal, dual = kkt_residuals(prog, zero)
    assert primal == 0.0
    assert dual == pytest.approx(2.0)  # equals the norm of q
    assert np.abs(sol.z - (-2.0)).max() < 1e-8


def test_admm_objective_never_much_below_oracle():
    rng = np.random.default_rng(7)
    cfg = SolverConfig(rho=5.0, tol=1e-4)
    for _ in range(25):
        prog = random_conic_program(rng, max_vars=40)
        s = admm_solve(prog, cfg)
        o = oracle_solve(prog)
        assert s.objective >= o.objective - 1e-4 * (1 + abs(o.objective))


def test_warm_start_reduces_iterations():
    rng = np.random.default_rng(5)
    prog = random_conic_program(rng, max_vars=40)
    solver = AdmmSolver(prog, SolverConfig(rho=5.0, tol=1e-6))
    cold = solver.solve()
    q2 = prog.q + 1e-3 * rng.normal(size=prog.n)
    recold = solver.solve(q=q2)
    warm = solver.solve(q=q2, warm=cold)
    assert warm.status == STATUS_SOLVED
    assert warm.iterations < recold.iterations


def test_nan_detection_raises():
    prog = ConicProgram(P=np.eye(2), q=np.array([np.nan, 0.0]),
                        M_box=np.eye(2), l=[-1, -1], u=[1, 1])
    with pytest.raises(AdmmNumericalError):
        admm_solve(prog)


def test_infeasible_instance_does_not_report_solved():
    # equality z = 1 conflicts with the box z in [0, 0]
    prog = ConicProgram(P=np.eye(1), q=np.zeros(1), G=np.eye(1), g=np.array([1.0]),
                        M_box=np.eye(1), l=[0.0], u=[0.0])
    sol = admm_solve(prog, SolverConfig(tol=1e-6, max_iter=500))
    assert sol.status != STATUS_SOLVED


@pytest.mark.skipif(not HAVE_KERNEL, reason="compiled kernel not built")
def test_backend_parity():
    rng = np.random.default_rng(9)
    for _ in range(10):
        prog = random_conic_program(rng, max_vars=30)
        a = admm_solve(prog, SolverConfig(rho=5.0, tol=1e-6), backend="cython")
        b = admm_solve(prog, SolverConfig(rho=5.0, tol=1e-6), backend="numpy")
        assert a.iterations == b.iterations
        assert np.abs(a.z - b.z).max() < 1e-10


def test_sparse_dense_parity():
    rng = np.random.default_rng(10)
    prog = random_conic_program(rng, max_vars=50)
    d = admm_solve(prog, SolverConfig(rho=5.0, tol=1e-7, method="dense"))
    s = admm_solve(prog, SolverConfig(rho=5.0, tol=1e-7, method="sparse"))
    assert d.status == s.status == STATUS_SOLVED
    assert np.abs(d.z - s.z).max() < 1e-6


def test_program_validation():
    with pytest.raises(ValueError, match="symmetric"):
        ConicProgram(P=np.array([[1.0, 2.0], [0.0, 1.0]]), q=np.zeros(2))
    with pytest.raises(ValueError, match="l <= u"):
        ConicProgram(P=np.eye(1), q=np.zeros(1), M_box=np.eye(1), l=[1.0], u=[-1.0])
    with pytest.raises(ValueError, match="triples"):
        ConicProgram(P=np.eye(2), q=np.zeros(2), M_cone=np.ones((2, 2)), d_cone=np.zeros(2))


def test_oracle_equality_only_matches_closed_form():
    rng = np.random.default_rng(12)
    n, m = 8, 3
    A = rng.normal(size=(n, n))
    P = A @ A.T + np.eye(n)
    q = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    g = rng.normal(size=m)
    prog = ConicProgram(P=P, q=q, G=G, g=g)
    K = np.block([[P, G.T], [G, np.zeros((m, m))]])
    z_exact = np.linalg.solve(K, np.concatenate([-q, g]))[:n]
    o = oracle_solve(prog)
    assert np.abs(o.z - z_exact).max() < 1e-10
    # the cached-factorization path solves this class in one iteration
    s = admm_solve(prog)
    assert s.iterations == 1
    assert np.abs(s.z - z_exact).max() < 1e-10


def test_oracle_cone_active_toy():
    prog = ConicProgram(P=2 * np.eye(3), q=np.array([0.0, -4.0, 0.0]),
                        M_cone=np.eye(3), d_cone=np.zeros(3), c0=4.0)
    o = oracle_solve(prog)
    assert np.abs(o.z - np.array([1.0, 1.0, 0.0])).max() < 1e-8
    primal, dual = kkt_residuals(prog, o)
    assert primal <= 1e-6 and dual <= 1e-6


def test_oracle_kkt_residuals_small_on_random_instances():
    rng = np.random.default_rng(13)
    for _ in range(10):
        prog = random_conic_program(rng, max_vars=30)
        o = oracle_solve(prog)
        assert o.status == STATUS_SOLVED
        primal, dual = kkt_residuals(prog, o)
        assert primal <= 1e-6
        assert dual <= 1e-6


def test_oracle_dimension_bound():
    n = 201
    with pytest.raises(ValueError, match="at most"):
        oracle_solve(ConicProgram(P=np.eye(n), q=np.zeros(n)))
