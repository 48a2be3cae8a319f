"""Discrete-time LTI plant models and polytopic output constraints.

Two concrete plants are provided: a double integrator used as a small test
instance, and a surrogate ball-and-plate system (8 states, 2 inputs) used by
the case-study scenarios.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LtiModel:
    """x(t+1) = A x(t) + B u(t)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.ndim == 1:
            B = _frozen(B.reshape(-1, 1))
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class OutputConstraint:
    """Row-wise bounds y_lo <= E x + F u <= y_hi."""

    E: np.ndarray
    F: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray

    def __post_init__(self):
        E = _frozen(self.E)
        F = _frozen(self.F)
        lo = _frozen(self.y_lo).ravel()
        hi = _frozen(self.y_hi).ravel()
        if E.ndim != 2 or F.ndim != 2:
            raise ValueError("E and F must be matrices")
        if E.shape[0] != F.shape[0]:
            raise ValueError("E and F must have the same number of rows")
        if lo.shape[0] != E.shape[0] or hi.shape[0] != E.shape[0]:
            raise ValueError("bounds must have one entry per constraint row")
        if not np.all(lo < hi):
            raise ValueError("y_lo < y_hi must hold componentwise")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "y_lo", _frozen(lo))
        object.__setattr__(self, "y_hi", _frozen(hi))

    @property
    def n_y(self) -> int:
        return self.E.shape[0]


def step(model: LtiModel, x, u) -> np.ndarray:
    """One exact plant step A x + B u (no noise)."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if x.shape[0] != model.n_x:
        raise ValueError(f"state has length {x.shape[0]}, expected {model.n_x}")
    if u.shape[0] != model.n_u:
        raise ValueError(f"input has length {u.shape[0]}, expected {model.n_u}")
    return model.A @ x + model.B @ u


def constraint_value(c: OutputConstraint, x, u) -> np.ndarray:
    """E x + F u for one (x, u) pair."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if x.shape[0] != c.E.shape[1]:
        raise ValueError(f"state has length {x.shape[0]}, expected {c.E.shape[1]}")
    if u.shape[0] != c.F.shape[1]:
        raise ValueError(f"input has length {u.shape[0]}, expected {c.F.shape[1]}")
    return c.E @ x + c.F @ u


def constraint_margin(c: OutputConstraint, x, u) -> float:
    """Smallest slack to either bound; nonnegative iff (x, u) satisfies the rows."""
    y = constraint_value(c, x, u)
    return float(min(np.min(y - c.y_lo), np.min(c.y_hi - y)))


def constraint_satisfied(c: OutputConstraint, x, u, slack: float = 0.0) -> bool:
    """True iff y_lo - slack <= E x + F u <= y_hi + slack."""
    return constraint_margin(c, x, u) >= -slack


def controllability_matrix(model: LtiModel) -> np.ndarray:
    blocks = []
    Ak_B = model.B
    for _ in range(model.n_x):
        blocks.append(Ak_B)
        Ak_B = model.A @ Ak_B
    return np.hstack(blocks)


def controllability_index(model: LtiModel) -> int:
    """Smallest k with rank [B, AB, ..., A^{k-1} B] = n_x.

    Raises ValueError for an uncontrollable pair.
    """
    blocks = []
    Ak_B = model.B
    for k in range(1, model.n_x + 1):
        blocks.append(Ak_B)
        if np.linalg.matrix_rank(np.hstack(blocks)) == model.n_x:
            return k
        Ak_B = model.A @ Ak_B
    raise ValueError("(A, B) is not controllable")


# Surrogate ball-and-plate constants. Per axis the state is
# (position, velocity, plate angle, angular rate) with continuous dynamics
# pos'' = (5 g / 7) * angle (solid ball rolling without slipping) and
# angle'' = u, discretized by zero-order hold.
GRAVITY = 9.81
BALL_GAIN = 5.0 * GRAVITY / 7.0
SAMPLE_TIME = 0.2
INPUT_SCALE = 50.0
HEXAGON_RADIUS = 1.0  # vertex distance from the origin, meters
ANGLE_LIMIT = 0.2618  # rad, 15 degrees
RATE_LIMIT = 0.5  # rad/s
INPUT_LIMIT = 1.0  # after input scaling


def _ball_axis_matrices() -> tuple[np.ndarray, np.ndarray]:
    h = SAMPLE_TIME
    g = BALL_GAIN
    A = np.array(
        [
            [1.0, h, g * h**2 / 2.0, g * h**3 / 6.0],
            [0.0, 1.0, g * h, g * h**2 / 2.0],
            [0.0, 0.0, 1.0, h],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    B = np.array([g * h**4 / 24.0, g * h**3 / 6.0, h**2 / 2.0, h])
    return A, B * INPUT_SCALE


def hexagon_rows(radius: float = HEXAGON_RADIUS) -> tuple[np.ndarray, np.ndarray]:
    """Half-plane representation of the regular position hexagon.

    Three two-sided rows with normals at 30/90/150 degrees and symmetric
    bounds +-cos(30)*radius give the six edges; vertices sit at `radius`.
    Returns (normals, bound) with normals of shape (3, 2).
    """
    angles = np.deg2rad([30.0, 90.0, 150.0])
    normals = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return normals, float(np.cos(np.pi / 6.0) * radius)


def make_ball_and_plate() -> tuple[LtiModel, OutputConstraint]:
    """Surrogate ball-and-plate: two decoupled axes, inputs pre-scaled by 50.

    Constraint rows: the two (scaled) input boxes, plate angle and angular
    rate boxes per axis, and the hexagonal ball-position constraint.
    """
    A1, B1 = _ball_axis_matrices()
    A = np.block([[A1, np.zeros((4, 4))], [np.zeros((4, 4)), A1]])
    B = np.zeros((8, 2))
    B[:4, 0] = B1
    B[4:, 1] = B1
    model = LtiModel(A, B)

    n_y = 2 + 4 + 3
    E = np.zeros((n_y, 8))
    F = np.zeros((n_y, 2))
    lo = np.zeros(n_y)
    hi = np.zeros(n_y)
    # input boxes
    F[0, 0] = 1.0
    F[1, 1] = 1.0
    lo[:2], hi[:2] = -INPUT_LIMIT, INPUT_LIMIT
    # plate angle / angular rate boxes, both axes
    for row, (idx, lim) in enumerate(
        [(2, ANGLE_LIMIT), (3, RATE_LIMIT), (6, ANGLE_LIMIT), (7, RATE_LIMIT)], start=2
    ):
        E[row, idx] = 1.0
        lo[row], hi[row] = -lim, lim
    # hexagon on the two position states
    normals, bound = hexagon_rows()
    E[6:9, 0] = normals[:, 0]
    E[6:9, 4] = normals[:, 1]
    lo[6:9], hi[6:9] = -bound, bound

    return model, OutputConstraint(E, F, lo, hi)


def make_double_integrator() -> tuple[LtiModel, OutputConstraint]:
    """Unit-sample-time discrete double integrator with symmetric boxes."""
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.5], [1.0]])  # exact ZOH of x'' = u at h = 1
    E = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    F = np.array([[0.0], [0.0], [1.0]])
    lo = np.array([-5.0, -2.0, -1.0])
    hi = np.array([5.0, 2.0, 1.0])
    return LtiModel(A, B), OutputConstraint(E, F, lo, hi)
