import numpy as np
import pytest

from harmonic_mpc.harmonic import HarmonicParams, cone_margins, dynamics_residual, evaluate, rotate
from harmonic_mpc.hmpc import ReferenceParams
from harmonic_mpc.model import constraint_margin
from harmonic_mpc.reference import (
    LocalFitResult,
    ReferenceInfeasibleError,
    StateShapeHint,
    advance,
    equilibrium_at,
    local_harmonic_approx,
    make_admissible_harmonic,
    make_dynamics_consistent_harmonic,
    make_multi_harmonic,
    random_reference_in_sets,
)


def test_advance_full_period_is_identity(double_integrator, di_cfg):
    model, cons = double_integrator
    ref = make_admissible_harmonic(model, cons, np.pi / 16,
                                   StateShapeHint((0,), [0.3], [1.0], [0.0]))
    out = ref
    for _ in range(32):
        out = advance(out, np.pi / 16)
    assert np.abs(out.xr.stacked() - ref.xr.stacked()).max() < 1e-12
    assert np.abs(out.ur.stacked() - ref.ur.stacked()).max() < 1e-12


def test_advance_eval_consistency(double_integrator):
    model, cons = double_integrator
    w = 0.37
    ref = make_admissible_harmonic(model, cons, w, StateShapeHint((0,), [0.0], [0.8], [0.4]))
    ks = np.arange(0, 10)
    assert np.allclose(evaluate(advance(ref, w).xr, w, ks), evaluate(ref.xr, w, ks + 1))


def test_advance_modular_arithmetic(ball_and_plate):
    # advancing 64 steps equals advancing 64 mod 32 steps at the base frequency
    model, cons = ball_and_plate
    w = np.pi / 16
    ref = make_admissible_harmonic(model, cons, w,
                                   StateShapeHint((0, 4), [0.0, 0.0], [0.5, 0.0], [0.0, 0.5]))
    a = ref
    for _ in range(64):
        a = advance(a, w)
    assert np.abs(a.xr.stacked() - ref.xr.stacked()).max() < 1e-12


def test_make_admissible_zero_hint_gives_origin(ball_and_plate):
    model, cons = ball_and_plate
    ref = make_admissible_harmonic(model, cons, np.pi / 16)
    assert np.abs(ref.xr.stacked()).max() == 0.0
    assert np.abs(ref.ur.stacked()).max() == 0.0


def test_make_admissible_contract(ball_and_plate):
    model, cons = ball_and_plate
    w = np.pi / 16
    ref = make_admissible_harmonic(model, cons, w,
                                   StateShapeHint((0, 4), [0.1, -0.1], [0.5, 0.1], [0.0, 0.4]),
                                   sigma=1e-3)
    assert dynamics_residual(ref.xr, ref.ur, model, w) <= 1e-9
    assert cone_margins(ref.xr, ref.ur, cons, 1e-3).min_margin >= 0.0


def test_admissibility_flips_at_bisection_scale(ball_and_plate):
    model, cons = ball_and_plate
    w = np.pi / 16
    sigma = 1e-3

    def margin(scale):
        ref = make_dynamics_consistent_harmonic(
            model, w, StateShapeHint((0, 4), [0.0, 0.0], [scale, 0.0], [0.0, scale]))
        return cone_margins(ref.xr, ref.ur, cons, sigma).min_margin

    lo, hi = 0.1, 5.0
    assert margin(lo) > 0 and margin(hi) < 0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0:
            lo = mid
        else:
            hi = mid
    flip = 0.5 * (lo + hi)
    hint_ok = StateShapeHint((0, 4), [0.0, 0.0], [flip * 0.999, 0.0], [0.0, flip * 0.999])
    hint_bad = StateShapeHint((0, 4), [0.0, 0.0], [flip * 1.001, 0.0], [0.0, flip * 1.001])
    make_admissible_harmonic(model, cons, w, hint_ok, sigma)
    with pytest.raises(ReferenceInfeasibleError) as err:
        make_admissible_harmonic(model, cons, w, hint_bad, sigma)
    assert err.value.row >= 0


def test_equilibrium_at(ball_and_plate):
    model, _ = ball_and_plate
    target = np.zeros(8)
    target[0], target[4] = 0.4, -0.3
    x_e, u_e = equilibrium_at(model, target)
    assert np.abs(model.A @ x_e + model.B @ u_e - x_e).max() < 1e-12
    assert x_e[0] == pytest.approx(0.4)
    assert x_e[4] == pytest.approx(-0.3)


def test_multi_harmonic_single_reduces_to_harmonic(double_integrator):
    model, _ = double_integrator
    traj = make_multi_harmonic(model, 0.3, 1, seed=0, amplitude=0.5)
    assert traj.harmonics == 1
    xH = HarmonicParams(traj.x_center, traj.x_sine[0], traj.x_cosine[0])
    uH = HarmonicParams(traj.u_center, traj.u_sine[0], traj.u_cosine[0])
    assert dynamics_residual(xH, uH, model, 0.3) <= 1e-10


def test_multi_harmonic_case_study_dynamics_identity(ball_and_plate):
    model, _ = ball_and_plate
    traj = make_multi_harmonic(model, np.pi / 32, 6, seed=7, amplitude=0.55,
                               position_indices=(0, 4))
    assert traj.period == pytest.approx(64.0)
    assert traj.dynamics_residual_sampled(model, np.arange(200)) <= 1e-9
    sel = np.abs(np.stack([traj.state_at(t) for t in range(64)])[:, [0, 4]])
    assert sel.max() == pytest.approx(0.55, rel=1e-2)


def test_multi_harmonic_superposition(double_integrator):
    model, _ = double_integrator
    a = make_multi_harmonic(model, 0.2, 3, seed=1, amplitude=0.3)
    b = make_multi_harmonic(model, 0.2, 5, seed=2, amplitude=0.2)
    c = a + b
    assert c.harmonics == 5
    assert c.dynamics_residual_sampled(model, np.arange(100)) <= 1e-9
    t = 17
    assert np.allclose(c.state_at(t), a.state_at(t) + b.state_at(t))


def test_multi_harmonic_shift_preserves_dynamics(ball_and_plate):
    model, _ = ball_and_plate
    traj = make_multi_harmonic(model, np.pi / 32, 4, seed=3, amplitude=0.4,
                               position_indices=(0, 4))
    shifted = traj.shifted(np.array([0.5, 0, 0, 0, 0, 0, 0, 0.0]))
    # a position offset is an equilibrium direction, so the identity survives
    assert shifted.dynamics_residual_sampled(model, np.arange(100)) <= 1e-9


def test_local_approx_recovers_pure_harmonic(double_integrator):
    model, cons = double_integrator
    w = 0.3254
    N = 8
    ref = make_admissible_harmonic(model, cons, w, StateShapeHint((0,), [0.2], [0.7], [-0.3]))
    t = 11
    ks = np.arange(t - 1, t + N + 2)
    xw = evaluate(ref.xr, w, ks)
    uw = evaluate(ref.ur, w, ks)
    fit = local_harmonic_approx(xw, uw, w, N)
    ref_t = ref
    for _ in range(t):
        ref_t = advance(ref_t, w)
    assert np.abs(fit.params.xr.stacked() - ref_t.xr.stacked()).max() <= 1e-8
    assert np.abs(fit.params.ur.stacked() - ref_t.ur.stacked()).max() <= 1e-8
    assert fit.x_residual <= 1e-10


def test_local_approx_constant_reference():
    w, N = 0.3254, 8
    xw = np.tile([1.5, -0.5], (N + 3, 1))
    uw = np.tile([0.25], (N + 3, 1))
    fit = local_harmonic_approx(xw, uw, w, N)
    assert np.allclose(fit.params.xr.center, [1.5, -0.5], atol=1e-12)
    assert np.abs(fit.params.xr.sine).max() <= 1e-12
    assert np.abs(fit.params.xr.cosine).max() <= 1e-12


def test_local_approx_least_squares_optimality(ball_and_plate):
    model, _ = ball_and_plate
    w, N, t = 0.3254, 8, 20
    traj = make_multi_harmonic(model, np.pi / 32, 6, seed=7, amplitude=0.55,
                               position_indices=(0, 4))
    xw, uw = traj.window(t - 1, N + 3)
    fit = local_harmonic_approx(xw, uw, w, N)
    assert np.isfinite(fit.x_residual)

    sw, sN, cN = np.sin(w), np.sin(w * N), np.cos(w * N)
    A4 = np.array([[1, 0, 1], [0, sw, 0], [1, sN, cN], [0, sw * cN, -sw * sN]])
    rhs = np.stack([xw[1], 0.5 * (xw[2] - xw[0]), xw[N + 1], 0.5 * (xw[N + 2] - xw[N])])
    base = np.stack([fit.params.xr.center, fit.params.xr.sine, fit.params.xr.cosine])
    rng = np.random.default_rng(4)
    for _ in range(200):
        other = base + rng.normal(scale=0.05, size=base.shape)
        assert np.linalg.norm(A4 @ other - rhs) >= fit.x_residual - 1e-12


def test_local_approx_shift_equivariance(double_integrator):
    model, cons = double_integrator
    w, N = 0.4, 6
    ref = make_admissible_harmonic(model, cons, w, StateShapeHint((0,), [0.0], [0.9], [0.2]))
    t = 5
    ks = np.arange(t - 1, t + N + 2)
    fit_t = local_harmonic_approx(evaluate(ref.xr, w, ks), evaluate(ref.ur, w, ks), w, N)
    ks1 = ks + 1
    fit_t1 = local_harmonic_approx(evaluate(ref.xr, w, ks1), evaluate(ref.ur, w, ks1), w, N)
    expected = advance(fit_t.params, w)
    assert np.abs(fit_t1.params.xr.stacked() - expected.xr.stacked()).max() <= 1e-8


def test_local_approx_window_validation():
    with pytest.raises(ValueError, match="N\\+3"):
        local_harmonic_approx(np.zeros((5, 2)), np.zeros((5, 1)), 0.3, 8)


def test_random_reference_in_sets(ball_and_plate):
    model, cons = ball_and_plate
    rng = np.random.default_rng(5)
    for _ in range(10):
        ref = random_reference_in_sets(model, cons, np.pi / 16, 1e-3, rng)
        assert dynamics_residual(ref.xr, ref.ur, model, np.pi / 16) <= 1e-9
        assert cone_margins(ref.xr, ref.ur, cons, 1e-3).min_margin >= 0.0


def test_constructed_references_dynamics_identity_sampled(ball_and_plate):
    model, cons = ball_and_plate
    w = np.pi / 16
    ref = make_admissible_harmonic(model, cons, w,
                                   StateShapeHint((0, 4), [0.1, 0.0], [0.4, 0.0], [0.0, 0.5]))
    ts = np.arange(200)
    x = evaluate(ref.xr, w, ts)
    u = evaluate(ref.ur, w, ts)
    x_next = evaluate(ref.xr, w, ts + 1)
    assert np.abs(x_next - (x @ model.A.T + u @ model.B.T)).max() <= 1e-9
