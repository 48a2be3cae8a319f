"""Property-check battery shared by the CLI verify command and the test suite.

Each check returns (passed, detail). The checks are deterministic: every
random draw uses a fixed seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonic import HarmonicParams, cone_margins, dynamics_residual, evaluate, rotate, rotation_matrix
from .hmpc import (
    ArtificialReferenceProblem,
    HmpcConfig,
    ReferenceParams,
    offset_cost,
)
from .model import make_ball_and_plate, make_double_integrator
from .reference import advance, make_admissible_harmonic, random_reference_in_sets, StateShapeHint
from .socp import ConicProgram, SolverConfig, admm_solve, oracle_solve, project_soc, project_soc_polar


@dataclass
class VerifyOptions:
    tol: float = 1e-4
    backend: str | None = None
    quick: bool = False


def section_v_config(w: float = np.pi / 16) -> HmpcConfig:
    """The case-study controller tuning at a given frequency."""
    Q = np.diag([10.0, 5.0, 5.0, 5.0, 10.0, 5.0, 5.0, 5.0])
    T_e = 50.0 * Q
    S_e = 10.0 * np.eye(2)
    return HmpcConfig(N=8, Q=Q, R=0.5 * np.eye(2), T_e=T_e, S_e=S_e,
                      T_h=0.1 * T_e, S_h=0.5 * S_e, w=w, sigma=1e-3)


def random_conic_program(rng: np.random.Generator, max_vars: int = 60) -> ConicProgram:
    """Feasible, strictly convex random instance (strict interior guaranteed)."""
    n = int(rng.integers(4, max_vars + 1))
    n_eq = int(rng.integers(0, max(1, n // 3) + 1))
    n_box = int(rng.integers(0, n + 1))
    n_cones = int(rng.integers(0, 6))
    A = rng.normal(size=(n, n))
    P = A @ A.T / n + np.eye(n) * rng.uniform(0.5, 2.0)
    q = rng.normal(size=n)
    z_feas = rng.normal(size=n)
    G = rng.normal(size=(n_eq, n)) if n_eq else None
    g = G @ z_feas if n_eq else None
    if n_box:
        M_box = rng.normal(size=(n_box, n))
        y = M_box @ z_feas
        l = y - rng.uniform(0.1, 2.0, size=n_box)
        u = y + rng.uniform(0.1, 2.0, size=n_box)
    else:
        M_box = l = u = None
    if n_cones:
        M_cone = rng.normal(size=(3 * n_cones, n))
        d = rng.normal(size=3 * n_cones)
        y = M_cone @ z_feas + d
        for j in range(n_cones):
            need = np.hypot(y[3 * j + 1], y[3 * j + 2]) + rng.uniform(0.1, 1.0)
            d[3 * j] += need - y[3 * j]
    else:
        M_cone = d = None
    return ConicProgram(P=P, q=q, G=G, g=g, M_box=M_box, l=l, u=u,
                        M_cone=M_cone, d_cone=d, c0=float(rng.normal()))


# -- individual checks --------------------------------------------------------


def check_rotation_orthogonality(opts: VerifyOptions):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 6))
        w = float(rng.uniform(0.01, 3.0))
        T = rotation_matrix(w, m)
        worst = max(worst, float(np.abs(T.T @ T - np.eye(2 * m)).max()))
        p = HarmonicParams(rng.normal(size=m), rng.normal(size=m), rng.normal(size=m))
        r = rotate(p, w)
        before = np.linalg.norm(p.sine) ** 2 + np.linalg.norm(p.cosine) ** 2
        after = np.linalg.norm(r.sine) ** 2 + np.linalg.norm(r.cosine) ** 2
        worst = max(worst, abs(before - after))
    return worst <= 1e-12, f"max orthogonality defect {worst:.2e} (tol 1e-12)"


def check_time_shift_identity(opts: VerifyOptions):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 5))
        w = float(rng.uniform(0.01, 3.0))
        p = HarmonicParams(rng.normal(size=m), rng.normal(size=m), rng.normal(size=m))
        ks = np.arange(-5, 20)
        lhs = evaluate(rotate(p, w), w, ks)
        rhs = evaluate(p, w, ks + 1)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst <= 1e-12, f"max shift defect {worst:.2e} (tol 1e-12)"


def check_projection_properties(opts: VerifyOptions):
    rng = np.random.default_rng(3)
    n = 1000 if opts.quick else 10000
    ys = rng.normal(scale=3.0, size=(n, 3))
    worst_idem = worst_moreau = 0.0
    worst_exp = 1.0
    for y in ys:
        py = project_soc(y)
        worst_idem = max(worst_idem, float(np.abs(project_soc(py) - py).max()))
        worst_moreau = max(worst_moreau, float(np.abs(py + project_soc_polar(y) - y).max()))
    for i in range(0, n - 1, 2):
        a, b = ys[i], ys[i + 1]
        d = np.linalg.norm(a - b)
        if d > 1e-12:
            worst_exp = max(worst_exp, float(np.linalg.norm(project_soc(a) - project_soc(b)) / d))
    ok = worst_idem <= 1e-12 and worst_moreau <= 1e-12 and worst_exp <= 1.0 + 1e-12
    return ok, (f"idempotency {worst_idem:.2e}, moreau {worst_moreau:.2e}, "
                f"expansiveness {worst_exp:.12f}")


def check_admissibility_oracle(opts: VerifyOptions, samples: int | None = None,
                               steps: int = 1000):
    """Members of the two parameter sets satisfy dynamics and constraints on a
    dense time grid (brute-force check of the set conditions)."""
    model, cons = make_ball_and_plate()
    sigma = 1e-3
    w = np.pi / 16
    rng = np.random.default_rng(4)
    n = samples if samples is not None else (20 if opts.quick else 50)
    worst_dyn = 0.0
    worst_slack = np.inf
    ts = np.arange(steps)
    for _ in range(n):
        ref = random_reference_in_sets(model, cons, w, sigma, rng)
        worst_dyn = max(worst_dyn, dynamics_residual(ref.xr, ref.ur, model, w))
        x = evaluate(ref.xr, w, ts)
        u = evaluate(ref.ur, w, ts)
        x_next = evaluate(ref.xr, w, ts + 1)
        worst_dyn = max(worst_dyn, float(np.abs(x_next - (x @ model.A.T + u @ model.B.T)).max()))
        y = x @ cons.E.T + u @ cons.F.T
        slack = min(float((y - cons.y_lo[None, :]).min()), float((cons.y_hi[None, :] - y).min()))
        worst_slack = min(worst_slack, slack)
    ok = worst_dyn <= 1e-9 and worst_slack >= sigma - 1e-9
    return ok, (f"{n} members: max dynamics residual {worst_dyn:.2e} (tol 1e-9), "
                f"min time-domain slack {worst_slack:.6f} (needs >= {sigma - 1e-9:.6f})")


def check_solver_vs_oracle(opts: VerifyOptions, instances: int | None = None):
    rng = np.random.default_rng(5)
    n = instances if instances is not None else (20 if opts.quick else 40)
    cfg = SolverConfig(rho=5.0, tol=opts.tol, max_iter=20000)
    worst = 0.0
    for _ in range(n):
        prog = random_conic_program(rng)
        s = admm_solve(prog, cfg, backend=opts.backend)
        o = oracle_solve(prog)
        if s.status != "solved" or o.status != "solved":
            return False, f"solver status {s.status}, oracle status {o.status}"
        worst = max(worst, abs(s.objective - o.objective) / (1.0 + abs(o.objective)))
    return worst <= 1e-4, f"{n} instances: worst relative objective gap {worst:.2e} (tol 1e-4)"


def check_shifted_solution_feasibility(opts: VerifyOptions, steps: int = 24):
    from .sim import HarmonicReferenceProvider, HmpcController, Scenario, feasibility_audit, run_closed_loop

    model, cons = make_ball_and_plate()
    cfg = section_v_config()
    ref = make_admissible_harmonic(model, cons, cfg.w,
                                   StateShapeHint((0, 4), [0.0, 0.0], [0.5, 0.0], [0.0, 0.5]),
                                   cfg.sigma)
    x0 = evaluate(ref.xr, cfg.w, 0) + np.array([0.2, 0, 0, 0, -0.2, 0, 0, 0])
    ctrl = HmpcController(model, cons, cfg, backend=opts.backend)
    log = run_closed_loop(Scenario(model, cons, ctrl, HarmonicReferenceProvider(ref, cfg.w),
                                   x0, steps, name="verify-shift"))
    if log.aborted:
        return False, f"run aborted: {log.aborted}"
    rep = feasibility_audit(log, model, cons, cfg)
    return rep.max_residual <= 1e-8, f"max shifted-candidate residual {rep.max_residual:.2e} (tol 1e-8)"


def check_lemma1_equivariance(opts: VerifyOptions, refs: int = 5):
    model, cons = make_double_integrator()
    cfg = HmpcConfig(N=4, Q=np.eye(2), R=np.eye(1), T_e=50 * np.eye(2), S_e=10 * np.eye(1),
                     T_h=5 * np.eye(2), S_h=np.eye(1), w=np.pi / 16, sigma=1e-3)
    art = ArtificialReferenceProblem(model, cons, cfg, backend=opts.backend)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(refs):
        ref = ReferenceParams(
            HarmonicParams(rng.normal(size=2), rng.normal(scale=0.8, size=2), rng.normal(scale=0.8, size=2)),
            HarmonicParams(rng.normal(scale=0.3, size=1), rng.normal(scale=0.3, size=1), rng.normal(scale=0.3, size=1)),
        )
        x1, u1, _ = art.solve(ref)
        x2, u2, _ = art.solve(advance(ref, cfg.w))
        worst = max(
            worst,
            float(np.abs(x2.stacked() - rotate(x1, cfg.w).stacked()).max()),
            float(np.abs(u2.stacked() - rotate(u1, cfg.w).stacked()).max()),
        )
    return worst <= 1e-6, f"{refs} references: worst rotation mismatch {worst:.2e} (tol 1e-6)"


def check_lyapunov_descent(opts: VerifyOptions, steps: int = 32):
    from .sim import HarmonicReferenceProvider, HmpcController, Scenario, lyapunov_audit, run_closed_loop

    model, cons = make_ball_and_plate()
    cfg = section_v_config()
    ref = make_admissible_harmonic(model, cons, cfg.w,
                                   StateShapeHint((0, 4), [0.0, 0.0], [0.6, 0.0], [0.0, 0.6]),
                                   cfg.sigma)
    x0 = evaluate(ref.xr, cfg.w, 0) + np.array([0.25, 0, 0, 0, -0.25, 0, 0, 0])
    ctrl = HmpcController(model, cons, cfg, backend=opts.backend)
    log = run_closed_loop(Scenario(model, cons, ctrl, HarmonicReferenceProvider(ref, cfg.w),
                                   x0, steps, name="verify-lyapunov"))
    if log.aborted:
        return False, f"run aborted: {log.aborted}"
    rep = lyapunov_audit(log)
    detail = f"W(0)={rep.w_values[0]:.3e}, W(end)={rep.w_values[-1]:.3e}, increases flagged: {len(rep.flags)}"
    return rep.ok, detail


ALL_CHECKS = [
    ("rotation-orthogonality", check_rotation_orthogonality),
    ("time-shift-identity", check_time_shift_identity),
    ("projection-properties", check_projection_properties),
    ("admissibility-oracle", check_admissibility_oracle),
    ("solver-vs-oracle", check_solver_vs_oracle),
    ("shifted-solution-feasibility", check_shifted_solution_feasibility),
    ("lemma1-equivariance", check_lemma1_equivariance),
    ("lyapunov-descent", check_lyapunov_descent),
]


def run_all(opts: VerifyOptions | None = None, report=print) -> bool:
    opts = opts or VerifyOptions()
    all_ok = True
    width = max(len(name) for name, _ in ALL_CHECKS)
    for name, fn in ALL_CHECKS:
        ok, detail = fn(opts)
        all_ok &= ok
        report(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    return all_ok
