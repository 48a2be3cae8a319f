"""Problem and solution containers for the conic solver.

A :class:`ConicProgram` is a convex quadratic program

    minimize    0.5 z' P z + q' z + c0
    subject to  G z = g
                l <= M_box z <= u
                (M_cone z + d_cone)[3j : 3j+3] in SOC3  for each cone j

where SOC3 = {(y0, y1, y2) : ||(y1, y2)|| <= y0}. Matrices may be dense or
scipy.sparse; the solver densifies small problems and keeps large ones sparse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

STATUS_SOLVED = "solved"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE_SUSPECT = "infeasible_suspect"


def _as_matrix(a, n_cols_hint=None):
    if a is None:
        a = np.zeros((0, n_cols_hint if n_cols_hint else 0))
    if sp.issparse(a):
        return sp.csr_matrix(a)
    return np.atleast_2d(np.asarray(a, dtype=float))


def _as_vector(a, length=0):
    if a is None:
        return np.zeros(length)
    return np.asarray(a, dtype=float).ravel()


@dataclass
class ConicProgram:
    P: object
    q: np.ndarray
    G: object = None
    g: np.ndarray = None
    M_box: object = None
    l: np.ndarray = None
    u: np.ndarray = None
    M_cone: object = None
    d_cone: np.ndarray = None
    c0: float = 0.0

    def __post_init__(self):
        self.P = _as_matrix(self.P)
        self.q = _as_vector(self.q)
        n = self.q.shape[0]
        if self.P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {self.P.shape}")
        if sp.issparse(self.P):
            diff = (self.P - self.P.T).tocoo()
            if diff.nnz and np.abs(diff.data).max() > 1e-10:
                raise ValueError("P must be symmetric")
        elif not np.allclose(self.P, self.P.T, atol=1e-10):
            raise ValueError("P must be symmetric")
        self.G = _as_matrix(self.G, n)
        self.g = _as_vector(self.g, self.G.shape[0])
        self.M_box = _as_matrix(self.M_box, n)
        m_box = self.M_box.shape[0]
        self.l = _as_vector(self.l, m_box)
        self.u = _as_vector(self.u, m_box)
        self.M_cone = _as_matrix(self.M_cone, n)
        self.d_cone = _as_vector(self.d_cone, self.M_cone.shape[0])
        for name, M, v in [("G", self.G, self.g), ("M_box", self.M_box, self.l),
                           ("M_cone", self.M_cone, self.d_cone)]:
            if M.shape[0] and M.shape[1] != n:
                raise ValueError(f"{name} must have {n} columns, got {M.shape[1]}")
            if v.shape[0] != M.shape[0]:
                raise ValueError(f"{name} right-hand side has wrong length")
        if self.l.shape[0] != m_box or self.u.shape[0] != m_box:
            raise ValueError("box bounds must have one entry per box row")
        if not np.all(self.l <= self.u):
            raise ValueError("box bounds must satisfy l <= u")
        if self.M_cone.shape[0] % 3 != 0:
            raise ValueError("cone rows must come in (y0, y1, y2) triples")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def n_eq(self) -> int:
        return self.G.shape[0]

    @property
    def n_box(self) -> int:
        return self.M_box.shape[0]

    @property
    def n_cones(self) -> int:
        return self.M_cone.shape[0] // 3

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float).ravel()
        Pz = self.P @ z
        return float(0.5 * z @ Pz + self.q @ z + self.c0)

    def dimension_fingerprint(self) -> str:
        """Hash of shapes and sparsity patterns; equal iff the problem structure is."""
        import hashlib

        h = hashlib.sha256()
        for M in (self.P, self.G, self.M_box, self.M_cone):
            Ms = sp.csr_matrix(M)
            h.update(np.asarray(Ms.shape, dtype=np.int64).tobytes())
            h.update(Ms.indptr.astype(np.int64).tobytes())
            h.update(Ms.indices.astype(np.int64).tobytes())
        h.update(np.asarray([self.n_box, self.n_cones], dtype=np.int64).tobytes())
        return h.hexdigest()


@dataclass
class SolverConfig:
    """ADMM settings: penalty rho, absolute residual tolerance, iteration cap."""

    rho: float = 150.0
    tol: float = 1e-4
    max_iter: int = 20000
    method: str = "auto"  # auto | dense | sparse

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.method not in ("auto", "dense", "sparse"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Solution:
    z: np.ndarray
    nu: np.ndarray  # equality multipliers
    mu: np.ndarray  # multipliers for the stacked box/cone rows
    s: np.ndarray  # slack value of the stacked rows
    primal_res: float
    dual_res: float
    iterations: int
    status: str
    objective: float
    solve_time: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status == STATUS_SOLVED


def project_soc(y) -> np.ndarray:
    """Euclidean projection of a 3-vector onto {(y0, y1, y2): ||(y1,y2)|| <= y0}."""
    y = np.asarray(y, dtype=float).ravel()
    t = float(np.hypot(y[1], y[2]))
    if t <= y[0]:
        return y.copy()
    if t <= -y[0]:
        return np.zeros(3)
    alpha = 0.5 * (y[0] + t)
    return np.array([alpha, alpha * y[1] / t, alpha * y[2] / t])


def project_soc_polar(y) -> np.ndarray:
    """Projection onto the polar cone; Moreau: project_soc(y) + project_soc_polar(y) = y."""
    y = np.asarray(y, dtype=float).ravel()
    return y - project_soc(y)


def project_rows(prog: ConicProgram, v: np.ndarray) -> np.ndarray:
    """Project a stacked (box rows, cone triples) vector onto the constraint set."""
    out = v.copy()
    nb = prog.n_box
    np.clip(out[:nb], prog.l, prog.u, out=out[:nb])
    for j in range(prog.n_cones):
        i = nb + 3 * j
        out[i : i + 3] = project_soc(out[i : i + 3])
    return out


def constraint_violation(prog: ConicProgram, z) -> float:
    """Worst violation of equalities, boxes and cones at z (max-norm)."""
    z = np.asarray(z, dtype=float).ravel()
    worst = 0.0
    if prog.n_eq:
        worst = max(worst, float(np.abs(prog.G @ z - prog.g).max()))
    if prog.n_box:
        y = prog.M_box @ z
        worst = max(worst, float(np.maximum(prog.l - y, 0.0).max()))
        worst = max(worst, float(np.maximum(y - prog.u, 0.0).max()))
    if prog.n_cones:
        y = prog.M_cone @ z + prog.d_cone
        for j in range(prog.n_cones):
            y0, y1, y2 = y[3 * j : 3 * j + 3]
            worst = max(worst, max(0.0, float(np.hypot(y1, y2) - y0)))
    return worst


def kkt_residuals(prog: ConicProgram, sol: Solution) -> tuple[float, float]:
    """(primal, dual) max-norm KKT residuals of a candidate solution.

    primal: worst constraint violation of z. dual: stationarity residual
    ||P z + q + G' nu + M' mu||_inf with M the stacked box/cone rows.
    """
    z = np.asarray(sol.z, dtype=float).ravel()
    primal = constraint_violation(prog, z)
    grad = prog.P @ z + prog.q
    if prog.n_eq:
        grad = grad + prog.G.T @ sol.nu
    nb = prog.n_box
    if nb:
        grad = grad + prog.M_box.T @ sol.mu[:nb]
    if prog.n_cones:
        grad = grad + prog.M_cone.T @ sol.mu[nb:]
    dual = float(np.abs(grad).max()) if grad.size else 0.0
    return primal, dual
