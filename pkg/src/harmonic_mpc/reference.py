"""Construction of reference trajectories consistent with the plant dynamics.

Provides single-harmonic references (with admissibility certification),
multi-harmonic references built from superposed harmonics of a base
frequency, and the local harmonic approximation used to track arbitrary
references with a single-frequency controller.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .harmonic import HarmonicParams, cone_margins, dynamics_residual, evaluate, rotate
from .hmpc import ReferenceParams
from .model import LtiModel, OutputConstraint


class ReferenceInfeasibleError(ValueError):
    """Requested reference shape cannot satisfy the cone margins."""

    def __init__(self, row: int, side: str, margin: float):
        self.row, self.side, self.margin = row, side, margin
        super().__init__(
            f"cone margin violated at constraint row {row} ({side} side): {margin:.3e}"
        )


def advance(ref: ReferenceParams, w: float) -> ReferenceParams:
    """Advance the reference parameters one sample in time."""
    return ReferenceParams(rotate(ref.xr, w), rotate(ref.ur, w))


def shape_response(model: LtiModel, w: float) -> np.ndarray:
    """Map from stacked (u_sine, u_cosine) to the stacked (x_sine, x_cosine)
    satisfying the harmonic dynamics equalities at frequency w."""
    A, B = model.A, model.B
    n_x = model.n_x
    cw, sw = np.cos(w), np.sin(w)
    S = np.block([
        [cw * np.eye(n_x) - A, -sw * np.eye(n_x)],
        [sw * np.eye(n_x), cw * np.eye(n_x) - A],
    ])
    rhs = scipy.linalg.block_diag(B, B)
    return np.linalg.solve(S, rhs)


def equilibrium_basis(model: LtiModel) -> np.ndarray:
    """Orthonormal basis of the (x_e, u_e) pairs with x_e = A x_e + B u_e."""
    n_x = model.n_x
    return scipy.linalg.null_space(
        np.hstack([np.eye(n_x) - model.A, -model.B])
    )


def equilibrium_at(model: LtiModel, target_state) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares closest equilibrium pair to a target state."""
    target = np.asarray(target_state, dtype=float).ravel()
    V = equilibrium_basis(model)
    Vx, Vu = V[: model.n_x], V[model.n_x :]
    alpha, *_ = np.linalg.lstsq(Vx, target, rcond=None)
    return Vx @ alpha, Vu @ alpha


@dataclass(frozen=True)
class StateShapeHint:
    """Desired center/sine/cosine values on a subset of state components."""

    indices: tuple
    center: np.ndarray
    sine: np.ndarray
    cosine: np.ndarray

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        for name in ("center", "sine", "cosine"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if v.shape[0] != len(idx):
                raise ValueError(f"{name} must have one entry per hinted component")
            object.__setattr__(self, name, v)


def make_dynamics_consistent_harmonic(
    model: LtiModel, w: float, hint: StateShapeHint | None = None,
) -> ReferenceParams:
    """A harmonic pair in the dynamics set matching the hint in least squares.

    No constraint check is performed, so the result may be non-admissible.
    """
    n_x, n_u = model.n_x, model.n_u
    if hint is None:
        hint = StateShapeHint((), np.zeros(0), np.zeros(0), np.zeros(0))
    idx = list(hint.indices)
    if idx and not all(0 <= i < n_x for i in idx):
        raise ValueError(f"hint indices {idx} out of range for {n_x} states")

    x_e, u_e = np.zeros(n_x), np.zeros(n_u)
    if idx:
        V = equilibrium_basis(model)
        Vx, Vu = V[:n_x], V[n_x:]
        alpha, *_ = np.linalg.lstsq(Vx[idx], hint.center, rcond=None)
        x_e, u_e = Vx @ alpha, Vu @ alpha

    L = shape_response(model, w)
    if idx:
        sel = np.concatenate([idx, [n_x + i for i in idx]])
        target = np.concatenate([hint.sine, hint.cosine])
        u_sc, *_ = np.linalg.lstsq(L[sel], target, rcond=None)
    else:
        u_sc = np.zeros(2 * n_u)
    x_sc = L @ u_sc

    xr = HarmonicParams(x_e, x_sc[:n_x], x_sc[n_x:])
    ur = HarmonicParams(u_e, u_sc[:n_u], u_sc[n_u:])
    return ReferenceParams(xr, ur)


def make_admissible_harmonic(
    model: LtiModel,
    constraints: OutputConstraint,
    w: float,
    hint: StateShapeHint | None = None,
    sigma: float = 1e-3,
) -> ReferenceParams:
    """A reference in the dynamics set matching the hint in least squares.

    The returned parameters satisfy the harmonic dynamics equalities to
    machine precision and lie strictly inside the sigma-tightened cone set;
    if the hint cannot meet the margins the worst row is reported.
    """
    ref = make_dynamics_consistent_harmonic(model, w, hint)
    report = cone_margins(ref.xr, ref.ur, constraints, sigma)
    if not report.ok:
        row, side, margin = report.worst_row()
        raise ReferenceInfeasibleError(row, side, margin)
    return ref


def random_reference_in_sets(
    model: LtiModel,
    constraints: OutputConstraint,
    w: float,
    sigma: float,
    rng: np.random.Generator,
    scale_range: tuple = (0.2, 0.98),
) -> ReferenceParams:
    """Random harmonic pair in the dynamics set and the sigma cone set.

    A random dynamics-consistent member is scaled toward the origin
    equilibrium until its cone margins are positive (the margins are concave
    in the scaling, so bisection finds the boundary scale).
    """
    n_x, n_u = model.n_x, model.n_u
    V = equilibrium_basis(model)
    alpha = rng.normal(size=V.shape[1])
    x_e, u_e = V[:n_x] @ alpha, V[n_x:] @ alpha
    u_sc = rng.normal(size=2 * n_u)
    x_sc = shape_response(model, w) @ u_sc

    def member(lam: float) -> ReferenceParams:
        return ReferenceParams(
            HarmonicParams(lam * x_e, lam * x_sc[:n_x], lam * x_sc[n_x:]),
            HarmonicParams(lam * u_e, lam * u_sc[:n_u], lam * u_sc[n_u:]),
        )

    def margin(lam: float) -> float:
        ref = member(lam)
        return cone_margins(ref.xr, ref.ur, constraints, sigma).min_margin

    if margin(0.0) <= 0.0:
        raise ValueError("origin equilibrium is not strictly inside the cone set")
    hi = 1.0
    if margin(hi) > 0.0:
        while margin(hi) > 0.0 and hi < 1e3:
            hi *= 2.0
    lo = 0.0
    for _ in range(60):  # largest scale with nonnegative margin
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = float(rng.uniform(*scale_range)) * lo
    return member(lam)


@dataclass(frozen=True)
class MultiHarmonicReference:
    """Superposition of harmonics at multiples of a base frequency, built to
    satisfy x(t+1) = A x(t) + B u(t) for all t."""

    w_base: float
    x_center: np.ndarray
    u_center: np.ndarray
    x_sine: np.ndarray  # (p, n_x)
    x_cosine: np.ndarray
    u_sine: np.ndarray  # (p, n_u)
    u_cosine: np.ndarray

    @property
    def harmonics(self) -> int:
        return self.x_sine.shape[0]

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.w_base

    def state_at(self, t) -> np.ndarray:
        return _multi_eval(self.x_center, self.x_sine, self.x_cosine, self.w_base, t)

    def input_at(self, t) -> np.ndarray:
        return _multi_eval(self.u_center, self.u_sine, self.u_cosine, self.w_base, t)

    def window(self, t0: int, length: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.arange(t0, t0 + length)
        return self.state_at(ts), self.input_at(ts)

    def dynamics_residual_sampled(self, model: LtiModel, ts) -> float:
        ts = np.asarray(ts)
        x = self.state_at(ts)
        u = self.input_at(ts)
        x_next = self.state_at(ts + 1)
        pred = x @ model.A.T + u @ model.B.T
        return float(np.abs(x_next - pred).max())

    def shifted(self, state_offset) -> "MultiHarmonicReference":
        """Shift the center by a state offset (may break admissibility)."""
        return MultiHarmonicReference(
            self.w_base, self.x_center + np.asarray(state_offset, dtype=float),
            self.u_center, self.x_sine, self.x_cosine, self.u_sine, self.u_cosine,
        )

    def __add__(self, other: "MultiHarmonicReference") -> "MultiHarmonicReference":
        if not np.isclose(self.w_base, other.w_base):
            raise ValueError("can only superpose references with one base frequency")
        p = max(self.harmonics, other.harmonics)

        def _pad(a, rows):
            out = np.zeros((p, a.shape[1]))
            out[: a.shape[0]] = a
            return out

        return MultiHarmonicReference(
            self.w_base,
            self.x_center + other.x_center,
            self.u_center + other.u_center,
            _pad(self.x_sine, p) + _pad(other.x_sine, p),
            _pad(self.x_cosine, p) + _pad(other.x_cosine, p),
            _pad(self.u_sine, p) + _pad(other.u_sine, p),
            _pad(self.u_cosine, p) + _pad(other.u_cosine, p),
        )


def _multi_eval(center, sines, cosines, w_base, t):
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    i = np.arange(1, sines.shape[0] + 1)
    phase = np.outer(t, i) * w_base  # (T, p)
    out = center[None, :] + np.sin(phase) @ sines + np.cos(phase) @ cosines
    return out[0] if scalar else out


def make_multi_harmonic(
    model: LtiModel,
    w_base: float,
    count: int,
    seed: int,
    amplitude: float,
    center_state=None,
    position_indices=None,
) -> MultiHarmonicReference:
    """Random dynamics-consistent multi-harmonic reference.

    For each harmonic i, random input shape parameters are drawn and the state
    shape is obtained from the harmonic dynamics equalities at frequency
    i*w_base; the whole shape is then rescaled jointly so the peak deviation
    of the selected components over one period equals `amplitude`.
    """
    if count < 1:
        raise ValueError("need at least one harmonic")
    n_x, n_u = model.n_x, model.n_u
    rng = np.random.default_rng(seed)

    x_s = np.zeros((count, n_x))
    x_c = np.zeros((count, n_x))
    u_s = np.zeros((count, n_u))
    u_c = np.zeros((count, n_u))
    for i in range(1, count + 1):
        u_sc = rng.normal(size=2 * n_u) / i
        x_sc = shape_response(model, i * w_base) @ u_sc
        u_s[i - 1], u_c[i - 1] = u_sc[:n_u], u_sc[n_u:]
        x_s[i - 1], x_c[i - 1] = x_sc[:n_x], x_sc[n_x:]

    if center_state is None:
        x_e, u_e = np.zeros(n_x), np.zeros(n_u)
    else:
        x_e, u_e = equilibrium_at(model, center_state)

    sel = list(position_indices) if position_indices is not None else list(range(n_x))
    ts = np.linspace(0.0, 2.0 * np.pi / w_base, 512)
    dev = _multi_eval(np.zeros(n_x), x_s, x_c, w_base, ts)[:, sel]
    peak = float(np.abs(dev).max())
    scale = amplitude / peak if peak > 0 else 1.0
    return MultiHarmonicReference(
        w_base, x_e, u_e, scale * x_s, scale * x_c, scale * u_s, scale * u_c
    )


@dataclass(frozen=True)
class LocalFitResult:
    params: ReferenceParams
    x_residual: float
    u_residual: float


def local_harmonic_approx(x_window: np.ndarray, u_window: np.ndarray,
                          w: float, N: int) -> LocalFitResult:
    """Single-harmonic fit matching value and discrete derivative of a
    reference at the current time and at the horizon end.

    The windows cover samples t-1 .. t+N+1 (N+3 rows); derivatives are
    central differences, applied identically to the data and to the harmonic
    model so a pure harmonic at frequency w is recovered exactly. The four
    conditions per component are resolved by least squares; the returned
    residuals quantify how far the window is from a single harmonic.
    """
    x_window = np.atleast_2d(np.asarray(x_window, dtype=float))
    u_window = np.atleast_2d(np.asarray(u_window, dtype=float))
    if x_window.shape[0] != N + 3 or u_window.shape[0] != N + 3:
        raise ValueError(f"windows must have N+3 = {N + 3} rows")

    sw = np.sin(w)
    sN, cN = np.sin(w * N), np.cos(w * N)
    A4 = np.array([
        [1.0, 0.0, 1.0],
        [0.0, sw, 0.0],
        [1.0, sN, cN],
        [0.0, sw * cN, -sw * sN],
    ])

    def _fit(window):
        rhs = np.stack([
            window[1],
            0.5 * (window[2] - window[0]),
            window[N + 1],
            0.5 * (window[N + 2] - window[N]),
        ])
        params, *_ = np.linalg.lstsq(A4, rhs, rcond=None)
        residual = float(np.linalg.norm(A4 @ params - rhs))
        return HarmonicParams(params[0], params[1], params[2]), residual

    xr, rx = _fit(x_window)
    ur, ru = _fit(u_window)
    return LocalFitResult(ReferenceParams(xr, ur), rx, ru)
