"""Baseline controllers: periodic MPC-for-tracking and standard MPC.

Both are plain QPs (no cones) solved by the same ADMM layer as the harmonic
controller. The periodic formulation carries an artificial periodic
trajectory of the full reference period as decision variables, so its problem
size grows linearly with the period; that growth is the property the
period-sweep benchmark measures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import LtiModel, OutputConstraint
from .socp import AdmmSolver, ConicProgram, Solution, SolverConfig


def dare_solve(A, B, Q, R, tol: float = 1e-13, max_iter: int = 100000) -> np.ndarray:
    """Fixed point of the discrete Riccati iteration.

    Iterates P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA from P = Q until the
    update stalls below `tol`; raises if the iteration does not settle.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    for _ in range(max_iter):
        APB = A.T @ P @ B
        P_next = Q + A.T @ P @ A - APB @ np.linalg.solve(R + B.T @ P @ B, APB.T)
        P_next = 0.5 * (P_next + P_next.T)
        if np.abs(P_next - P).max() <= tol * max(1.0, np.abs(P_next).max()):
            return P_next
        P = P_next
    raise RuntimeError("Riccati iteration did not converge")


def riccati_residual(A, B, Q, R, P) -> float:
    APB = A.T @ P @ B
    P_next = Q + A.T @ P @ A - APB @ np.linalg.solve(R + B.T @ P @ B, APB.T)
    return float(np.abs(P_next - P).max())


@dataclass
class MpctConfig:
    """Periodic tracking MPC: period T, horizon N, stage and offset weights."""

    T: int
    N: int
    Q: np.ndarray
    R: np.ndarray
    T_e: np.ndarray
    S_e: np.ndarray
    sigma: float = 1e-3  # tightening of the artificial-trajectory constraints

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("period T must be at least 2")
        if self.N < 1:
            raise ValueError("horizon N must be at least 1")
        for name in ("Q", "R", "T_e", "S_e"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))


@dataclass
class StdMpcConfig:
    """Standard trajectory-tracking MPC with a terminal cost matrix."""

    N: int
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon N must be at least 1")
        for name in ("Q", "R", "P"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if np.linalg.eigvalsh(self.P).min() <= 0:
            raise ValueError("terminal matrix P must be positive definite")


class _SparseBuilder:
    def __init__(self, shape):
        self.shape = shape
        self.rows, self.cols, self.vals = [], [], []

    def add(self, row_idx, col_idx, block):
        block = np.atleast_2d(np.asarray(block, dtype=float))
        r = np.repeat(np.asarray(row_idx), len(col_idx))
        c = np.tile(np.asarray(col_idx), len(row_idx))
        self.rows.append(r)
        self.cols.append(c)
        self.vals.append(block.ravel())

    def build(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix(self.shape)
        return sp.csr_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=self.shape,
        )


@dataclass
class MpctSolution:
    states: np.ndarray
    inputs: np.ndarray
    art_states: np.ndarray  # (T, n_x)
    art_inputs: np.ndarray  # (T, n_u)
    objective: float
    solution: Solution

    @property
    def u0(self) -> np.ndarray:
        return self.inputs[0]

    @property
    def status(self) -> str:
        return self.solution.status


class MpctProblem:
    """Periodic MPCT assembled sparsely; decision count (N+T)(n_x+n_u)."""

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: MpctConfig,
                 solver: SolverConfig | None = None, backend: str | None = None):
        self.model, self.constraints, self.cfg = model, constraints, cfg
        n_x, n_u, n_y = model.n_x, model.n_u, constraints.n_y
        N, T = cfg.N, cfg.T
        n = (N + T) * (n_x + n_u)
        self.n_vars = n

        self._ix = [np.arange(k * n_x, (k + 1) * n_x) for k in range(N)]
        off = N * n_x
        self._iu = [np.arange(off + k * n_u, off + (k + 1) * n_u) for k in range(N)]
        off = N * (n_x + n_u)
        self._ia = [np.arange(off + j * n_x, off + (j + 1) * n_x) for j in range(T)]
        off += T * n_x
        self._ib = [np.arange(off + j * n_u, off + (j + 1) * n_u) for j in range(T)]

        A, B, E, F = model.A, model.B, constraints.E, constraints.F
        Pb = _SparseBuilder((n, n))
        for k in range(N):
            j = k % T
            for (vi, va), W in [((self._ix[k], self._ia[j]), cfg.Q),
                                ((self._iu[k], self._ib[j]), cfg.R)]:
                Pb.add(vi, vi, 2.0 * W)
                Pb.add(va, va, 2.0 * W)
                Pb.add(vi, va, -2.0 * W)
                Pb.add(va, vi, -2.0 * W)
        for j in range(T):
            Pb.add(self._ia[j], self._ia[j], 2.0 * cfg.T_e)
            Pb.add(self._ib[j], self._ib[j], 2.0 * cfg.S_e)

        n_eq = n_x * (N + T + 1)
        Gb = _SparseBuilder((n_eq, n))
        row = 0
        Gb.add(np.arange(n_x), self._ix[0], np.eye(n_x))
        row += n_x
        for k in range(N - 1):
            r = np.arange(row, row + n_x)
            Gb.add(r, self._ix[k], -A)
            Gb.add(r, self._iu[k], -B)
            Gb.add(r, self._ix[k + 1], np.eye(n_x))
            row += n_x
        r = np.arange(row, row + n_x)  # terminal equality to the artificial trajectory
        Gb.add(r, self._ix[N - 1], A)
        Gb.add(r, self._iu[N - 1], B)
        Gb.add(r, self._ia[N % T], -np.eye(n_x))
        row += n_x
        for j in range(T):  # cyclic artificial dynamics
            r = np.arange(row, row + n_x)
            Gb.add(r, self._ia[j], -A)
            Gb.add(r, self._ib[j], -B)
            Gb.add(r, self._ia[(j + 1) % T], np.eye(n_x))
            row += n_x

        m_box = (N + T) * n_y
        Mb = _SparseBuilder((m_box, n))
        lo = np.empty(m_box)
        hi = np.empty(m_box)
        for k in range(N):
            r = np.arange(k * n_y, (k + 1) * n_y)
            Mb.add(r, self._ix[k], E)
            Mb.add(r, self._iu[k], F)
            lo[r], hi[r] = constraints.y_lo, constraints.y_hi
        for j in range(T):
            r = np.arange((N + j) * n_y, (N + j + 1) * n_y)
            Mb.add(r, self._ia[j], E)
            Mb.add(r, self._ib[j], F)
            lo[r] = constraints.y_lo + cfg.sigma
            hi[r] = constraints.y_hi - cfg.sigma

        self.prog = ConicProgram(P=Pb.build(), q=np.zeros(n), G=Gb.build(),
                                 g=np.zeros(n_eq), M_box=Mb.build(), l=lo, u=hi)
        self.solver = AdmmSolver(self.prog, solver if solver is not None else SolverConfig(),
                                 backend=backend)

    def _instance(self, x0, x_ref, u_ref):
        cfg = self.cfg
        T = cfg.T
        x_ref = np.atleast_2d(np.asarray(x_ref, dtype=float))
        u_ref = np.atleast_2d(np.asarray(u_ref, dtype=float))
        if x_ref.shape != (T, self.model.n_x) or u_ref.shape != (T, self.model.n_u):
            raise ValueError(f"reference must provide {T} samples")
        q = np.zeros(self.n_vars)
        c0 = 0.0
        for j in range(T):
            q[self._ia[j]] = -2.0 * cfg.T_e @ x_ref[j]
            q[self._ib[j]] = -2.0 * cfg.S_e @ u_ref[j]
            c0 += float(x_ref[j] @ cfg.T_e @ x_ref[j] + u_ref[j] @ cfg.S_e @ u_ref[j])
        g = np.zeros(self.prog.n_eq)
        g[: self.model.n_x] = np.asarray(x0, dtype=float).ravel()
        return q, g, c0

    def instance_program(self, x0, x_ref, u_ref) -> ConicProgram:
        q, g, c0 = self._instance(x0, x_ref, u_ref)
        p = self.prog
        return ConicProgram(P=p.P, q=q, G=p.G, g=g, M_box=p.M_box, l=p.l, u=p.u, c0=c0)

    def solve(self, x0, x_ref: np.ndarray, u_ref: np.ndarray, warm=None) -> MpctSolution:
        """x_ref, u_ref: T reference samples starting at the current time."""
        q, g, c0 = self._instance(x0, x_ref, u_ref)
        if isinstance(warm, MpctSolution):
            warm = self.warm_candidate(warm)
        sol = self.solver.solve(q=q, g=g, c0=c0, warm=warm)
        z = sol.z
        states = np.stack([z[i] for i in self._ix])
        inputs = np.stack([z[i] for i in self._iu])
        art_x = np.stack([z[i] for i in self._ia])
        art_u = np.stack([z[i] for i in self._ib])
        return MpctSolution(states, inputs, art_x, art_u, sol.objective, sol)

    def warm_candidate(self, prev: MpctSolution) -> np.ndarray:
        """Shift the previous solution one sample (artificial trajectory rolls)."""
        N, T = self.cfg.N, self.cfg.T
        art_x = np.roll(prev.art_states, -1, axis=0)
        art_u = np.roll(prev.art_inputs, -1, axis=0)
        states = np.vstack([prev.states[1:], prev.art_states[N % T][None, :]])
        inputs = np.vstack([prev.inputs[1:], prev.art_inputs[N % T][None, :]])
        z = np.zeros(self.n_vars)
        for k in range(N):
            z[self._ix[k]] = states[k]
            z[self._iu[k]] = inputs[k]
        for j in range(T):
            z[self._ia[j]] = art_x[j]
            z[self._ib[j]] = art_u[j]
        return z

    def dimensions(self) -> dict:
        return {
            "variables": self.prog.n,
            "equalities": self.prog.n_eq,
            "box_rows": self.prog.n_box,
            "cones": self.prog.n_cones,
            "fingerprint": self.prog.dimension_fingerprint(),
        }


@dataclass
class StdMpcSolution:
    states: np.ndarray  # (N+1, n_x)
    inputs: np.ndarray  # (N, n_u)
    objective: float
    solution: Solution

    @property
    def u0(self) -> np.ndarray:
        return self.inputs[0]

    @property
    def status(self) -> str:
        return self.solution.status


class StdMpcProblem:
    """Standard MPC against a reference trajectory window; no terminal set."""

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: StdMpcConfig,
                 solver: SolverConfig | None = None, backend: str | None = None):
        self.model, self.constraints, self.cfg = model, constraints, cfg
        n_x, n_u, n_y = model.n_x, model.n_u, constraints.n_y
        N = cfg.N
        n = (N + 1) * n_x + N * n_u
        self.n_vars = n
        self._ix = [np.arange(k * n_x, (k + 1) * n_x) for k in range(N + 1)]
        off = (N + 1) * n_x
        self._iu = [np.arange(off + k * n_u, off + (k + 1) * n_u) for k in range(N)]

        A, B, E, F = model.A, model.B, constraints.E, constraints.F
        Pb = _SparseBuilder((n, n))
        for k in range(N):
            Pb.add(self._ix[k], self._ix[k], 2.0 * cfg.Q)
            Pb.add(self._iu[k], self._iu[k], 2.0 * cfg.R)
        Pb.add(self._ix[N], self._ix[N], 2.0 * cfg.P)

        n_eq = n_x * (N + 1)
        Gb = _SparseBuilder((n_eq, n))
        Gb.add(np.arange(n_x), self._ix[0], np.eye(n_x))
        row = n_x
        for k in range(N):
            r = np.arange(row, row + n_x)
            Gb.add(r, self._ix[k], -A)
            Gb.add(r, self._iu[k], -B)
            Gb.add(r, self._ix[k + 1], np.eye(n_x))
            row += n_x

        Mb = _SparseBuilder((N * n_y, n))
        for k in range(N):
            r = np.arange(k * n_y, (k + 1) * n_y)
            Mb.add(r, self._ix[k], E)
            Mb.add(r, self._iu[k], F)
        lo = np.tile(constraints.y_lo, N)
        hi = np.tile(constraints.y_hi, N)

        self.prog = ConicProgram(P=Pb.build(), q=np.zeros(n), G=Gb.build(),
                                 g=np.zeros(n_eq), M_box=Mb.build(), l=lo, u=hi)
        self.solver = AdmmSolver(self.prog, solver if solver is not None else SolverConfig(),
                                 backend=backend)

    def _instance(self, x0, x_ref, u_ref):
        cfg = self.cfg
        N = cfg.N
        x_ref = np.atleast_2d(np.asarray(x_ref, dtype=float))
        u_ref = np.atleast_2d(np.asarray(u_ref, dtype=float))
        if x_ref.shape[0] != N + 1 or u_ref.shape[0] != N:
            raise ValueError(f"need {N + 1} state and {N} input reference samples")
        q = np.zeros(self.n_vars)
        c0 = 0.0
        for k in range(N):
            q[self._ix[k]] = -2.0 * cfg.Q @ x_ref[k]
            q[self._iu[k]] = -2.0 * cfg.R @ u_ref[k]
            c0 += float(x_ref[k] @ cfg.Q @ x_ref[k] + u_ref[k] @ cfg.R @ u_ref[k])
        q[self._ix[N]] = -2.0 * cfg.P @ x_ref[N]
        c0 += float(x_ref[N] @ cfg.P @ x_ref[N])
        g = np.zeros(self.prog.n_eq)
        g[: self.model.n_x] = np.asarray(x0, dtype=float).ravel()
        return q, g, c0

    def instance_program(self, x0, x_ref, u_ref) -> ConicProgram:
        q, g, c0 = self._instance(x0, x_ref, u_ref)
        p = self.prog
        return ConicProgram(P=p.P, q=q, G=p.G, g=g, M_box=p.M_box, l=p.l, u=p.u, c0=c0)

    def solve(self, x0, x_ref: np.ndarray, u_ref: np.ndarray, warm=None) -> StdMpcSolution:
        """x_ref: N+1 state reference samples; u_ref: N input samples."""
        q, g, c0 = self._instance(x0, x_ref, u_ref)
        N = self.cfg.N
        if isinstance(warm, StdMpcSolution):
            z = np.zeros(self.n_vars)
            for k in range(N):
                z[self._ix[k]] = warm.states[min(k + 1, N)]
                z[self._iu[k]] = warm.inputs[min(k + 1, N - 1)]
            z[self._ix[N]] = warm.states[N]
            warm = z
        sol = self.solver.solve(q=q, g=g, c0=c0, warm=warm)
        states = np.stack([sol.z[i] for i in self._ix])
        inputs = np.stack([sol.z[i] for i in self._iu])
        return StdMpcSolution(states, inputs, sol.objective, sol)
