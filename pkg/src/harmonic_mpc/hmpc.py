"""Harmonic MPC: tracking of harmonic references with a harmonic artificial
reference as decision variable.

The controller solves, at each sample time,

    minimize    V_h(artificial params; reference params)
                + sum_k ||x^k - xh^k||_Q^2 + ||u^k - uh^k||_R^2
    subject to  x^0 = x(t), plant dynamics, output box constraints,
                terminal equality to the artificial harmonic at k = N,
                dynamics equalities on the artificial params,
                cone margins on the artificial params (slack sigma)

over the predicted trajectory (x^0..x^{N-1}, u^0..u^{N-1}) and the artificial
parameter triples. The Hessian is constant; the reference enters the linear
term and constant offset only, and the problem dimensions are independent of
the reference period.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .harmonic import Frequency, HarmonicParams, cone_margins, dynamics_residual, evaluate, rotate
from .model import LtiModel, OutputConstraint, controllability_index, step
from .socp import AdmmSolver, ConicProgram, Solution, SolverConfig


def _check_pd(name: str, M: np.ndarray, dim: int):
    M = np.asarray(M, dtype=float)
    if M.shape != (dim, dim):
        raise ValueError(f"{name} must be {dim}x{dim}, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return M


def _check_pd_diagonal(name: str, M: np.ndarray, dim: int):
    M = _check_pd(name, M, dim)
    if not np.allclose(M, np.diag(np.diag(M)), atol=1e-12):
        raise ValueError(f"{name} must be diagonal")
    return M


@dataclass
class HmpcConfig:
    """Horizon, cost matrices, frequency and cone slack of the controller.

    The shape weights T_h, S_h must be diagonal (rotation invariance of the
    offset cost relies on it); sigma must be strictly positive.
    """

    N: int
    Q: np.ndarray
    R: np.ndarray
    T_e: np.ndarray
    S_e: np.ndarray
    T_h: np.ndarray
    S_h: np.ndarray
    w: float
    sigma: float = 1e-3

    def __post_init__(self):
        if isinstance(self.w, Frequency):
            self.w = self.w.w
        if not self.w > 0:
            raise ValueError("frequency w must be positive")
        if self.N < 1:
            raise ValueError("horizon N must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be strictly positive")
        n_x = np.asarray(self.Q).shape[0]
        n_u = np.asarray(self.R).shape[0]
        self.Q = _check_pd("Q", self.Q, n_x)
        self.R = _check_pd("R", self.R, n_u)
        self.T_e = _check_pd("T_e", self.T_e, n_x)
        self.S_e = _check_pd("S_e", self.S_e, n_u)
        self.T_h = _check_pd_diagonal("T_h", self.T_h, n_x)
        self.S_h = _check_pd_diagonal("S_h", self.S_h, n_u)


@dataclass(frozen=True)
class ReferenceParams:
    """Harmonic reference parameter pair (state triple, input triple)."""

    xr: HarmonicParams
    ur: HarmonicParams


@dataclass(frozen=True)
class CandidateSolution:
    """A (not necessarily optimal) candidate for the tracking problem."""

    states: np.ndarray  # (N, n_x)
    inputs: np.ndarray  # (N, n_u)
    xH: HarmonicParams
    uH: HarmonicParams


@dataclass
class HmpcSolution:
    states: np.ndarray  # (N, n_x), states[0] is the measured state
    inputs: np.ndarray  # (N, n_u)
    xH: HarmonicParams
    uH: HarmonicParams
    objective: float
    solution: Solution
    x0: np.ndarray
    ref: ReferenceParams

    @property
    def u0(self) -> np.ndarray:
        """The applied control input: first move in the optimal sequence."""
        return self.inputs[0]

    @property
    def status(self) -> str:
        return self.solution.status

    def candidate(self) -> CandidateSolution:
        return CandidateSolution(self.states, self.inputs, self.xH, self.uH)


class HmpcProblem:
    """Assembled problem cache; the KKT factorization is reused across solves."""

    def __init__(
        self,
        model: LtiModel,
        constraints: OutputConstraint,
        cfg: HmpcConfig,
        solver: SolverConfig | None = None,
        backend: str | None = None,
    ):
        if np.asarray(cfg.Q).shape[0] != model.n_x or np.asarray(cfg.R).shape[0] != model.n_u:
            raise ValueError("cost matrices do not match the model dimensions")
        try:
            ctrb_index = controllability_index(model)
        except ValueError:
            ctrb_index = None
        if ctrb_index is not None and cfg.N < ctrb_index:
            warnings.warn(
                f"horizon N={cfg.N} is below the controllability index "
                f"{ctrb_index}; the stability guarantee does not apply",
                stacklevel=2,
            )
        self.model = model
        self.constraints = constraints
        self.cfg = cfg
        n_x, n_u, N = model.n_x, model.n_u, cfg.N
        self.n_vars = N * (n_x + n_u) + 3 * (n_x + n_u)

        # variable layout: x^0..x^{N-1} | u^0..u^{N-1} | x_e x_s x_c | u_e u_s u_c
        self._ix = [np.arange(k * n_x, (k + 1) * n_x) for k in range(N)]
        off = N * n_x
        self._iu = [np.arange(off + k * n_u, off + (k + 1) * n_u) for k in range(N)]
        off = N * (n_x + n_u)
        self._ixe = np.arange(off, off + n_x)
        self._ixs = self._ixe + n_x
        self._ixc = self._ixs + n_x
        off += 3 * n_x
        self._iue = np.arange(off, off + n_u)
        self._ius = self._iue + n_u
        self._iuc = self._ius + n_u

        prog = self._assemble()
        self.prog = prog
        self.solver = AdmmSolver(prog, solver if solver is not None else SolverConfig(),
                                 backend=backend)

    # -- assembly -----------------------------------------------------------

    def _assemble(self) -> ConicProgram:
        model, c, cfg = self.model, self.constraints, self.cfg
        A, B = model.A, model.B
        n_x, n_u, n_y, N = model.n_x, model.n_u, c.n_y, cfg.N
        w = cfg.w
        n = self.n_vars
        sinw, cosw = np.sin(w), np.cos(w)
        sinN, cosN = np.sin(w * N), np.cos(w * N)

        P = np.zeros((n, n))
        for k in range(N):
            sk, ck = np.sin(w * k), np.cos(w * k)
            for blocks, W in [((self._ix[k], self._ixe, self._ixs, self._ixc), cfg.Q),
                              ((self._iu[k], self._iue, self._ius, self._iuc), cfg.R)]:
                coef = (1.0, -1.0, -sk, -ck)
                for a, bi in zip(coef, blocks):
                    for b_, bj in zip(coef, blocks):
                        P[np.ix_(bi, bj)] += 2.0 * a * b_ * W
        for idx, W in [(self._ixe, cfg.T_e), (self._ixs, cfg.T_h), (self._ixc, cfg.T_h),
                       (self._iue, cfg.S_e), (self._ius, cfg.S_h), (self._iuc, cfg.S_h)]:
            P[np.ix_(idx, idx)] += 2.0 * W

        n_eq = n_x * (N + 4)
        G = np.zeros((n_eq, n))
        row = 0
        G[np.ix_(np.arange(n_x), self._ix[0])] = np.eye(n_x)  # x^0 = x(t)
        row += n_x
        for k in range(N - 1):  # x^{k+1} = A x^k + B u^k
            r = np.arange(row, row + n_x)
            G[np.ix_(r, self._ix[k])] = -A
            G[np.ix_(r, self._iu[k])] = -B
            G[np.ix_(r, self._ix[k + 1])] = np.eye(n_x)
            row += n_x
        # terminal: A x^{N-1} + B u^{N-1} = x_e + x_s sin(wN) + x_c cos(wN)
        r = np.arange(row, row + n_x)
        G[np.ix_(r, self._ix[N - 1])] = A
        G[np.ix_(r, self._iu[N - 1])] = B
        G[np.ix_(r, self._ixe)] = -np.eye(n_x)
        G[np.ix_(r, self._ixs)] = -sinN * np.eye(n_x)
        G[np.ix_(r, self._ixc)] = -cosN * np.eye(n_x)
        row += n_x
        # artificial reference dynamics equalities
        r = np.arange(row, row + n_x)
        G[np.ix_(r, self._ixe)] = np.eye(n_x) - A
        G[np.ix_(r, self._iue)] = -B
        row += n_x
        r = np.arange(row, row + n_x)
        G[np.ix_(r, self._ixs)] = cosw * np.eye(n_x) - A
        G[np.ix_(r, self._ixc)] = -sinw * np.eye(n_x)
        G[np.ix_(r, self._ius)] = -B
        row += n_x
        r = np.arange(row, row + n_x)
        G[np.ix_(r, self._ixs)] = sinw * np.eye(n_x)
        G[np.ix_(r, self._ixc)] = cosw * np.eye(n_x) - A
        G[np.ix_(r, self._iuc)] = -B

        M_box = np.zeros((N * n_y, n))
        for k in range(N):
            r = np.arange(k * n_y, (k + 1) * n_y)
            M_box[np.ix_(r, self._ix[k])] = c.E
            M_box[np.ix_(r, self._iu[k])] = c.F
        l = np.tile(c.y_lo, N)
        u = np.tile(c.y_hi, N)

        M_cone, d_cone = _cone_rows(c, cfg.sigma, n, self._ixe, self._ixs, self._ixc,
                                    self._iue, self._ius, self._iuc)

        return ConicProgram(P=P, q=np.zeros(n), G=G, g=np.zeros(n_eq),
                            M_box=M_box, l=l, u=u, M_cone=M_cone, d_cone=d_cone)

    def linear_cost(self, ref: ReferenceParams) -> tuple[np.ndarray, float]:
        """Linear term and constant offset induced by the reference parameters."""
        cfg = self.cfg
        q = np.zeros(self.n_vars)
        c0 = 0.0
        for idx, W, r in [
            (self._ixe, cfg.T_e, ref.xr.center), (self._ixs, cfg.T_h, ref.xr.sine),
            (self._ixc, cfg.T_h, ref.xr.cosine), (self._iue, cfg.S_e, ref.ur.center),
            (self._ius, cfg.S_h, ref.ur.sine), (self._iuc, cfg.S_h, ref.ur.cosine),
        ]:
            Wr = W @ r
            q[idx] = -2.0 * Wr
            c0 += float(r @ Wr)
        return q, c0

    def rhs(self, x0: np.ndarray) -> np.ndarray:
        g = np.zeros(self.prog.n_eq)
        g[: self.model.n_x] = x0
        return g

    # -- solve / decode ------------------------------------------------------

    def solve(self, x0, ref: ReferenceParams, warm=None,
              tol: float | None = None, max_iter: int | None = None) -> HmpcSolution:
        x0 = np.asarray(x0, dtype=float).ravel()
        if x0.shape[0] != self.model.n_x:
            raise ValueError("initial state has wrong dimension")
        q, c0 = self.linear_cost(ref)
        if isinstance(warm, CandidateSolution):
            warm = self.encode(warm)
        elif isinstance(warm, HmpcSolution):
            warm = (self.encode(warm.candidate()), warm.solution.mu)
        sol = self.solver.solve(q=q, g=self.rhs(x0), c0=c0, warm=warm,
                                tol=tol, max_iter=max_iter)
        states, inputs, xH, uH = self.decode(sol.z)
        return HmpcSolution(states=states, inputs=inputs, xH=xH, uH=uH,
                            objective=sol.objective, solution=sol, x0=x0, ref=ref)

    def decode(self, z: np.ndarray):
        N = self.cfg.N
        states = np.stack([z[idx] for idx in self._ix])
        inputs = np.stack([z[idx] for idx in self._iu])
        xH = HarmonicParams(z[self._ixe], z[self._ixs], z[self._ixc])
        uH = HarmonicParams(z[self._iue], z[self._ius], z[self._iuc])
        return states, inputs, xH, uH

    def encode(self, cand: CandidateSolution) -> np.ndarray:
        z = np.zeros(self.n_vars)
        for k, idx in enumerate(self._ix):
            z[idx] = cand.states[k]
        for k, idx in enumerate(self._iu):
            z[idx] = cand.inputs[k]
        z[self._ixe], z[self._ixs], z[self._ixc] = cand.xH.center, cand.xH.sine, cand.xH.cosine
        z[self._iue], z[self._ius], z[self._iuc] = cand.uH.center, cand.uH.sine, cand.uH.cosine
        return z

    def dimensions(self) -> dict:
        return {
            "variables": self.prog.n,
            "equalities": self.prog.n_eq,
            "box_rows": self.prog.n_box,
            "cones": self.prog.n_cones,
            "fingerprint": self.prog.dimension_fingerprint(),
        }

    def instance_program(self, x0, ref: ReferenceParams) -> ConicProgram:
        """Standalone program for one (state, reference) instance."""
        q, c0 = self.linear_cost(ref)
        p = self.prog
        return ConicProgram(P=p.P, q=q, G=p.G, g=self.rhs(np.asarray(x0, dtype=float).ravel()),
                            M_box=p.M_box, l=p.l, u=p.u,
                            M_cone=p.M_cone, d_cone=p.d_cone, c0=c0)

    def constraint_residuals(self, cand: CandidateSolution, x0) -> dict[str, float]:
        """Residuals of every problem constraint for a candidate at state x0."""
        return candidate_residuals(self.model, self.constraints, self.cfg, cand, x0)


def _cone_rows(c: OutputConstraint, sigma: float, n: int,
               ixe, ixs, ixc, iue, ius, iuc) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower cone triples per output row (2 n_y cones)."""
    n_y = c.n_y
    M = np.zeros((6 * n_y, n))
    d = np.zeros(6 * n_y)
    for i in range(n_y):
        Ei, Fi = c.E[i], c.F[i]
        r = 6 * i
        # upper: (y_hi - sigma - y_e, y_s, y_c) in SOC
        M[r, ixe], M[r, iue] = -Ei, -Fi
        d[r] = c.y_hi[i] - sigma
        M[r + 1, ixs], M[r + 1, ius] = Ei, Fi
        M[r + 2, ixc], M[r + 2, iuc] = Ei, Fi
        # lower: (y_e - y_lo - sigma, y_s, y_c) in SOC
        M[r + 3, ixe], M[r + 3, iue] = Ei, Fi
        d[r + 3] = -c.y_lo[i] - sigma
        M[r + 4, ixs], M[r + 4, ius] = Ei, Fi
        M[r + 5, ixc], M[r + 5, iuc] = Ei, Fi
    return M, d


def build(model: LtiModel, constraints: OutputConstraint, cfg: HmpcConfig,
          solver: SolverConfig | None = None, backend: str | None = None) -> HmpcProblem:
    """Assemble the problem cache for repeated solves."""
    return HmpcProblem(model, constraints, cfg, solver=solver, backend=backend)


def candidate_residuals(model: LtiModel, constraints: OutputConstraint, cfg: HmpcConfig,
                        cand: CandidateSolution, x0) -> dict[str, float]:
    """Residuals of every tracking-problem constraint for a candidate at x0."""
    c = constraints
    N, w = cfg.N, cfg.w
    x0 = np.asarray(x0, dtype=float).ravel()
    res = {"init": float(np.abs(cand.states[0] - x0).max())}
    dyn = 0.0
    box = 0.0
    for k in range(N):
        if k < N - 1:
            pred = model.A @ cand.states[k] + model.B @ cand.inputs[k]
            dyn = max(dyn, float(np.abs(cand.states[k + 1] - pred).max()))
        y = c.E @ cand.states[k] + c.F @ cand.inputs[k]
        box = max(box, float(np.maximum(c.y_lo - y, 0.0).max()),
                  float(np.maximum(y - c.y_hi, 0.0).max()))
    res["dynamics"] = dyn
    res["box"] = box
    xN = model.A @ cand.states[N - 1] + model.B @ cand.inputs[N - 1]
    res["terminal"] = float(np.abs(xN - evaluate(cand.xH, w, N)).max())
    res["artificial_dynamics"] = dynamics_residual(cand.xH, cand.uH, model, w)
    margins = cone_margins(cand.xH, cand.uH, c, cfg.sigma)
    res["cones"] = max(0.0, -margins.min_margin)
    res["max"] = max(res.values())
    return res


def shift_solution(sol: HmpcSolution | CandidateSolution, model: LtiModel,
                   cfg: HmpcConfig) -> CandidateSolution:
    """The successor-time feasible candidate built from a feasible solution.

    Inputs shift by one sample with the artificial harmonic value appended at
    the end; states roll forward under the plant dynamics from the successor
    state; the artificial input parameters rotate one sample and the state
    parameters are pushed through the plant map.
    """
    N, w = cfg.N, cfg.w
    states, inputs, xH, uH = sol.states, sol.inputs, sol.xH, sol.uH
    new_inputs = np.empty_like(inputs)
    new_inputs[: N - 1] = inputs[1:]
    new_inputs[N - 1] = evaluate(uH, w, N)
    new_states = np.empty_like(states)
    new_states[0] = step(model, states[0], inputs[0])
    for k in range(N - 1):
        new_states[k + 1] = step(model, new_states[k], new_inputs[k])
    new_xH = HarmonicParams(
        model.A @ xH.center + model.B @ uH.center,
        model.A @ xH.sine + model.B @ uH.sine,
        model.A @ xH.cosine + model.B @ uH.cosine,
    )
    new_uH = rotate(uH, w)
    return CandidateSolution(new_states, new_inputs, new_xH, new_uH)


class ArtificialReferenceProblem:
    """Cache for the optimal-artificial-reference problem (offset cost over
    the admissible harmonic parameter set)."""

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: HmpcConfig,
                 tol: float = 1e-6, backend: str | None = None):
        self.model = model
        self.constraints = constraints
        self.cfg = cfg
        self.tol = tol
        n_x, n_u = model.n_x, model.n_u
        n = 3 * (n_x + n_u)
        ixe = np.arange(n_x)
        ixs, ixc = ixe + n_x, ixe + 2 * n_x
        iue = np.arange(3 * n_x, 3 * n_x + n_u)
        ius, iuc = iue + n_u, iue + 2 * n_u
        self._idx = (ixe, ixs, ixc, iue, ius, iuc)

        P = np.zeros((n, n))
        for idx, W in zip(self._idx, (cfg.T_e, cfg.T_h, cfg.T_h, cfg.S_e, cfg.S_h, cfg.S_h)):
            P[np.ix_(idx, idx)] = 2.0 * W

        A, B = model.A, model.B
        cw, sw = np.cos(cfg.w), np.sin(cfg.w)
        G = np.zeros((3 * n_x, n))
        r = np.arange(n_x)
        G[np.ix_(r, ixe)] = np.eye(n_x) - A
        G[np.ix_(r, iue)] = -B
        r = r + n_x
        G[np.ix_(r, ixs)] = cw * np.eye(n_x) - A
        G[np.ix_(r, ixc)] = -sw * np.eye(n_x)
        G[np.ix_(r, ius)] = -B
        r = r + n_x
        G[np.ix_(r, ixs)] = sw * np.eye(n_x)
        G[np.ix_(r, ixc)] = cw * np.eye(n_x) - A
        G[np.ix_(r, iuc)] = -B

        M_cone, d_cone = _cone_rows(constraints, cfg.sigma, n, *self._idx)
        self.prog = ConicProgram(P=P, q=np.zeros(n), G=G, g=np.zeros(3 * n_x),
                                 M_cone=M_cone, d_cone=d_cone)
        self.solver = AdmmSolver(self.prog, SolverConfig(tol=tol), backend=backend)

    def linear_cost(self, ref: ReferenceParams) -> tuple[np.ndarray, float]:
        cfg = self.cfg
        q = np.zeros(self.prog.n)
        c0 = 0.0
        for idx, W, r in zip(
            self._idx,
            (cfg.T_e, cfg.T_h, cfg.T_h, cfg.S_e, cfg.S_h, cfg.S_h),
            (ref.xr.center, ref.xr.sine, ref.xr.cosine,
             ref.ur.center, ref.ur.sine, ref.ur.cosine),
        ):
            Wr = W @ np.asarray(r, dtype=float)
            q[idx] = -2.0 * Wr
            c0 += float(np.asarray(r) @ Wr)
        return q, c0

    def instance_program(self, ref: ReferenceParams) -> ConicProgram:
        q, c0 = self.linear_cost(ref)
        p = self.prog
        return ConicProgram(P=p.P, q=q, G=p.G, g=p.g,
                            M_cone=p.M_cone, d_cone=p.d_cone, c0=c0)

    def solve(self, ref: ReferenceParams, warm=None) -> tuple[HarmonicParams, HarmonicParams, Solution]:
        q, c0 = self.linear_cost(ref)
        sol = self.solver.solve(q=q, c0=c0, warm=warm)
        ixe, ixs, ixc, iue, ius, iuc = self._idx
        xH = HarmonicParams(sol.z[ixe], sol.z[ixs], sol.z[ixc])
        uH = HarmonicParams(sol.z[iue], sol.z[ius], sol.z[iuc])
        return xH, uH, sol


def optimal_artificial_reference(
    model: LtiModel, constraints: OutputConstraint, cfg: HmpcConfig,
    ref: ReferenceParams, tol: float = 1e-6,
) -> tuple[HarmonicParams, HarmonicParams]:
    """Unique minimizer of the offset cost over the admissible parameter set."""
    xH, uH, sol = ArtificialReferenceProblem(model, constraints, cfg, tol=tol).solve(ref)
    if not sol.solved:
        raise RuntimeError(f"artificial reference solve failed with status {sol.status}")
    return xH, uH


def offset_cost(xH: HarmonicParams, uH: HarmonicParams, ref: ReferenceParams,
                cfg: HmpcConfig) -> float:
    """The six-term weighted distance between artificial and reference parameters."""
    def _term(v, r, W):
        d = v - r
        return float(d @ (W @ d))

    return (
        _term(xH.center, ref.xr.center, cfg.T_e)
        + _term(xH.sine, ref.xr.sine, cfg.T_h)
        + _term(xH.cosine, ref.xr.cosine, cfg.T_h)
        + _term(uH.center, ref.ur.center, cfg.S_e)
        + _term(uH.sine, ref.ur.sine, cfg.S_h)
        + _term(uH.cosine, ref.ur.cosine, cfg.S_h)
    )


def lyapunov_value(objective: float, model: LtiModel, constraints: OutputConstraint,
                   cfg: HmpcConfig, ref: ReferenceParams,
                   offset_optimum: float | None = None) -> float:
    """Optimal cost minus the offset-cost optimum; zero exactly on the optimal
    artificial harmonic trajectory, positive elsewhere (up to solver accuracy)."""
    if offset_optimum is None:
        xH, uH = optimal_artificial_reference(model, constraints, cfg, ref)
        offset_optimum = offset_cost(xH, uH, ref, cfg)
    return float(objective - offset_optimum)
