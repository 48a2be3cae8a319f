"""Harmonic-signal algebra.

A harmonic signal of dimension m is v(k) = center + sine*sin(w k) + cosine*cos(w k).
This module evaluates such signals, advances their parameters one sample in
time (a block rotation of the sine/cosine pair), and checks the two
admissibility conditions used by the controller:

* the linear equalities tying a state/input parameter pair to the plant
  dynamics for all time (``dynamics_residual``), and
* per-row second-order-cone margins guaranteeing the output constraints for
  all time with slack sigma (``cone_margins``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LtiModel, OutputConstraint

#: membership tolerance for the dynamics equalities
TOL_DYNAMICS = 1e-9


@dataclass(frozen=True)
class Frequency:
    """Frequency in radians per sample; strictly positive."""

    w: float

    def __post_init__(self):
        if not self.w > 0.0:
            raise ValueError(f"frequency must be positive, got {self.w}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.w


def _vec(a) -> np.ndarray:
    v = np.asarray(a, dtype=float).ravel()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class HarmonicParams:
    """The (center, sine, cosine) triple parameterizing a harmonic signal."""

    center: np.ndarray
    sine: np.ndarray
    cosine: np.ndarray

    def __post_init__(self):
        c, s, co = _vec(self.center), _vec(self.sine), _vec(self.cosine)
        if not (c.shape == s.shape == co.shape):
            raise ValueError("center, sine and cosine must share one length")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "sine", s)
        object.__setattr__(self, "cosine", co)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @classmethod
    def zeros(cls, m: int) -> "HarmonicParams":
        return cls(np.zeros(m), np.zeros(m), np.zeros(m))

    @classmethod
    def constant(cls, value) -> "HarmonicParams":
        v = np.asarray(value, dtype=float).ravel()
        return cls(v, np.zeros_like(v), np.zeros_like(v))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.center, self.sine, self.cosine])

    @classmethod
    def from_stacked(cls, v) -> "HarmonicParams":
        v = np.asarray(v, dtype=float).ravel()
        m = v.shape[0] // 3
        return cls(v[:m], v[m : 2 * m], v[2 * m :])


def evaluate(p: HarmonicParams, w: float | Frequency, k) -> np.ndarray:
    """Signal value(s) at relative time k (scalar or array)."""
    w = w.w if isinstance(w, Frequency) else float(w)
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        return p.center + p.sine * np.sin(w * k) + p.cosine * np.cos(w * k)
    return (
        p.center[None, :]
        + np.outer(np.sin(w * k), p.sine)
        + np.outer(np.cos(w * k), p.cosine)
    )


def rotation_matrix(w: float, m: int) -> np.ndarray:
    """The orthogonal 2m x 2m block rotation acting on stacked (sine, cosine)."""
    I = np.eye(m)
    cw, sw = np.cos(w), np.sin(w)
    return np.block([[cw * I, -sw * I], [sw * I, cw * I]])


def rotate(p: HarmonicParams, w: float | Frequency) -> HarmonicParams:
    """Advance the parameters one sample: evaluate(rotate(p), w, k) == evaluate(p, w, k+1)."""
    w = w.w if isinstance(w, Frequency) else float(w)
    cw, sw = np.cos(w), np.sin(w)
    return HarmonicParams(
        p.center,
        cw * p.sine - sw * p.cosine,
        sw * p.sine + cw * p.cosine,
    )


def dynamics_residual(
    xH: HarmonicParams, uH: HarmonicParams, model: LtiModel, w: float | Frequency
) -> float:
    """Max-norm residual of the three equalities tying (xH, uH) to the plant.

    Zero iff the harmonic state/input pair satisfies x(t+1) = A x(t) + B u(t)
    for all t.
    """
    w = w.w if isinstance(w, Frequency) else float(w)
    if xH.dim != model.n_x or uH.dim != model.n_u:
        raise ValueError("parameter dimensions do not match the model")
    A, B = model.A, model.B
    cw, sw = np.cos(w), np.sin(w)
    r_e = xH.center - A @ xH.center - B @ uH.center
    r_s = cw * xH.sine - sw * xH.cosine - A @ xH.sine - B @ uH.sine
    r_c = sw * xH.sine + cw * xH.cosine - A @ xH.cosine - B @ uH.cosine
    return float(max(np.abs(r_e).max(), np.abs(r_s).max(), np.abs(r_c).max()))


@dataclass(frozen=True)
class ConeMarginReport:
    """Per-row cone margins; all nonnegative iff the pair lies in the sigma-set.

    upper[i] = y_hi[i] - sigma - y_e[i] - ||(y_s[i], y_c[i])||
    lower[i] = y_e[i] - y_lo[i] - sigma - ||(y_s[i], y_c[i])||
    """

    upper: np.ndarray
    lower: np.ndarray
    y_center: np.ndarray
    y_sine: np.ndarray
    y_cosine: np.ndarray
    sigma: float

    @property
    def min_margin(self) -> float:
        return float(min(self.upper.min(), self.lower.min()))

    @property
    def ok(self) -> bool:
        return self.min_margin >= 0.0

    def worst_row(self) -> tuple[int, str, float]:
        iu, il = int(np.argmin(self.upper)), int(np.argmin(self.lower))
        if self.upper[iu] <= self.lower[il]:
            return iu, "upper", float(self.upper[iu])
        return il, "lower", float(self.lower[il])


def cone_margins(
    xH: HarmonicParams,
    uH: HarmonicParams,
    c: OutputConstraint,
    sigma: float = 0.0,
) -> ConeMarginReport:
    """Second-order-cone margins of the constraint rows for a harmonic pair."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    y_e = c.E @ xH.center + c.F @ uH.center
    y_s = c.E @ xH.sine + c.F @ uH.sine
    y_c = c.E @ xH.cosine + c.F @ uH.cosine
    amp = np.hypot(y_s, y_c)
    upper = c.y_hi - sigma - y_e - amp
    lower = y_e - c.y_lo - sigma - amp
    return ConeMarginReport(upper, lower, y_e, y_s, y_c, float(sigma))


def is_admissible(
    xH: HarmonicParams,
    uH: HarmonicParams,
    model: LtiModel,
    c: OutputConstraint,
    w: float | Frequency,
    sigma: float = 0.0,
    tol_dynamics: float = TOL_DYNAMICS,
) -> bool:
    """True iff (xH, uH) satisfies the dynamics equalities and all cone margins.

    With sigma > 0 the certified constraint satisfaction is strict.
    """
    if dynamics_residual(xH, uH, model, w) > tol_dynamics:
        return False
    return cone_margins(xH, uH, c, sigma).ok
