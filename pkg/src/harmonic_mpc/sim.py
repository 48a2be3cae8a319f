"""Closed-loop engine, audits, performance metric and the period-sweep benchmark.

All three controller families are driven through one interface: a controller
is bound to a reference provider, then maps (state, time) to an input plus
diagnostics. Runs are nominal (no noise) and deterministic.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import MpctConfig, MpctProblem, StdMpcConfig, StdMpcProblem
from .harmonic import HarmonicParams, evaluate
from .hmpc import (
    ArtificialReferenceProblem,
    HmpcConfig,
    HmpcProblem,
    HmpcSolution,
    ReferenceParams,
    candidate_residuals,
    offset_cost,
    shift_solution,
)
from .model import LtiModel, OutputConstraint, constraint_margin, step
from .reference import MultiHarmonicReference, advance, local_harmonic_approx
from .socp import STATUS_SOLVED, SolverConfig

CSV_SCHEMA = "harmonic-mpc-log-v1"
SUMMARY_SCHEMA = "harmonic-mpc-summary-v1"


# -- reference providers -----------------------------------------------------


class HarmonicReferenceProvider:
    """Single-harmonic reference; parameters advance by the block rotation."""

    kind = "harmonic"

    def __init__(self, ref: ReferenceParams, w: float):
        self.w = float(w)
        self._params = [ref]

    def params_at(self, t: int) -> ReferenceParams:
        while len(self._params) <= t:
            self._params.append(advance(self._params[-1], self.w))
        return self._params[t]

    def sample(self, t) -> tuple[np.ndarray, np.ndarray]:
        ref = self._params[0]
        return evaluate(ref.xr, self.w, t), evaluate(ref.ur, self.w, t)

    def window(self, t0: int, length: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.arange(t0, t0 + length)
        ref = self._params[0]
        return evaluate(ref.xr, self.w, ts), evaluate(ref.ur, self.w, ts)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.w


class TrajectoryReferenceProvider:
    """Arbitrary dynamics-consistent reference given in closed form."""

    kind = "trajectory"

    def __init__(self, traj: MultiHarmonicReference):
        self.traj = traj

    def sample(self, t) -> tuple[np.ndarray, np.ndarray]:
        return self.traj.state_at(t), self.traj.input_at(t)

    def window(self, t0: int, length: int) -> tuple[np.ndarray, np.ndarray]:
        return self.traj.window(t0, length)

    @property
    def period(self) -> float:
        return self.traj.period


# -- controllers -------------------------------------------------------------


@dataclass
class ControlStep:
    u: np.ndarray
    status: str
    objective: float | None = None
    iterations: int = 0
    solve_time: float = 0.0
    w_value: float | None = None
    xH: HarmonicParams | None = None
    uH: HarmonicParams | None = None
    ref_params: ReferenceParams | None = None
    hmpc_solution: HmpcSolution | None = None


class HmpcController:
    name = "hmpc"

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: HmpcConfig,
                 solver: SolverConfig | None = None, backend: str | None = None):
        self.model, self.constraints, self.cfg = model, constraints, cfg
        self.problem = HmpcProblem(model, constraints, cfg, solver=solver, backend=backend)
        self.art_problem = ArtificialReferenceProblem(model, constraints, cfg, backend=backend)
        self.provider = None
        self._prev: HmpcSolution | None = None
        self._offset_opt: float | None = None

    def bind(self, provider):
        """Attach a reference provider; the warm start survives (the shifted
        solution is feasible for any new reference)."""
        self.provider = provider
        self._offset_opt = None

    def _reference_at(self, t: int) -> ReferenceParams:
        if self.provider.kind == "harmonic":
            return self.provider.params_at(t)
        N = self.cfg.N
        xw, uw = self.provider.window(t - 1, N + 3)
        return local_harmonic_approx(xw, uw, self.cfg.w, N).params

    def _offset_optimum(self, ref: ReferenceParams) -> float:
        # constant along a harmonic reference segment (rotation equivariance)
        if self.provider.kind == "harmonic":
            if self._offset_opt is None:
                xh, uh, sol = self.art_problem.solve(ref)
                self._offset_opt = offset_cost(xh, uh, ref, self.cfg)
            return self._offset_opt
        xh, uh, sol = self.art_problem.solve(ref)
        return offset_cost(xh, uh, ref, self.cfg)

    def step(self, x, t: int) -> ControlStep:
        ref = self._reference_at(t)
        warm = None
        if self._prev is not None:
            cand = shift_solution(self._prev, self.model, self.cfg)
            warm = (self.problem.encode(cand), self._prev.solution.mu)
        sol = self.problem.solve(x, ref, warm=warm)
        w_value = sol.objective - self._offset_optimum(ref)
        self._prev = sol
        return ControlStep(
            u=sol.u0, status=sol.status, objective=sol.objective,
            iterations=sol.solution.iterations, solve_time=sol.solution.solve_time,
            w_value=w_value, xH=sol.xH, uH=sol.uH, ref_params=ref, hmpc_solution=sol,
        )


class MpctController:
    name = "mpct"

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: MpctConfig,
                 solver: SolverConfig | None = None, backend: str | None = None):
        self.model, self.constraints, self.cfg = model, constraints, cfg
        self.problem = MpctProblem(model, constraints, cfg, solver=solver, backend=backend)
        self.provider = None
        self._prev = None

    def bind(self, provider):
        self.provider = provider

    def step(self, x, t: int) -> ControlStep:
        xw, uw = self.provider.window(t, self.cfg.T)
        sol = self.problem.solve(x, xw, uw, warm=self._prev)
        self._prev = sol
        return ControlStep(
            u=sol.u0, status=sol.status, objective=sol.objective,
            iterations=sol.solution.iterations, solve_time=sol.solution.solve_time,
        )


class StdMpcController:
    name = "stdmpc"

    def __init__(self, model: LtiModel, constraints: OutputConstraint, cfg: StdMpcConfig,
                 solver: SolverConfig | None = None, backend: str | None = None):
        self.model, self.constraints, self.cfg = model, constraints, cfg
        self.problem = StdMpcProblem(model, constraints, cfg, solver=solver, backend=backend)
        self.provider = None
        self._prev = None

    def bind(self, provider):
        self.provider = provider

    def step(self, x, t: int) -> ControlStep:
        xw, uw = self.provider.window(t, self.cfg.N + 1)
        sol = self.problem.solve(x, xw, uw[: self.cfg.N], warm=self._prev)
        self._prev = sol
        return ControlStep(
            u=sol.u0, status=sol.status, objective=sol.objective,
            iterations=sol.solution.iterations, solve_time=sol.solution.solve_time,
        )


# -- scenario and log --------------------------------------------------------


@dataclass
class Scenario:
    model: LtiModel
    constraints: OutputConstraint
    controller: object
    reference: object
    x0: np.ndarray
    duration: int
    switch_at: int | None = None
    reference_after_switch: object = None
    name: str = "scenario"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).ravel()
        if self.duration < 1:
            raise ValueError("duration must be at least 1")
        if self.switch_at is not None and self.reference_after_switch is None:
            raise ValueError("a reference switch needs a second reference")


@dataclass
class StepRecord:
    t: int
    x: np.ndarray
    u: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray
    objective: float | None
    w_value: float | None
    iterations: int
    solve_time: float
    status: str
    min_margin: float
    segment: int
    xH: HarmonicParams | None = None
    uH: HarmonicParams | None = None
    ref_params: ReferenceParams | None = None
    hmpc_solution: HmpcSolution | None = None


@dataclass
class ClosedLoopLog:
    scenario_name: str
    controller: str
    records: list
    switch_times: list
    aborted: str | None = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def states(self) -> np.ndarray:
        return np.stack([r.x for r in self.records])

    def inputs(self) -> np.ndarray:
        return np.stack([r.u for r in self.records])

    def state_refs(self) -> np.ndarray:
        return np.stack([r.x_ref for r in self.records])

    def input_refs(self) -> np.ndarray:
        return np.stack([r.u_ref for r in self.records])

    def w_values(self) -> list:
        return [r.w_value for r in self.records]

    def min_margin(self) -> float:
        return min(r.min_margin for r in self.records)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(f"# {CSV_SCHEMA}\n")
            writer = csv.writer(f)
            writer.writerow(_csv_header(self.records[0]))
            for r in self.records:
                writer.writerow(_csv_row(r))

    def summary(self, Q=None, R=None) -> dict:
        out = {
            "schema": SUMMARY_SCHEMA,
            "scenario": self.scenario_name,
            "controller": self.controller,
            "duration": len(self.records),
            "aborted": self.aborted,
            "switch_times": list(self.switch_times),
            "min_constraint_margin": self.min_margin(),
            "solver": {
                "iterations_total": int(sum(r.iterations for r in self.records)),
                "iterations_median": float(np.median([r.iterations for r in self.records])),
                "solve_time_median": float(np.median([r.solve_time for r in self.records])),
                "time_per_iteration_median": float(
                    np.median([r.solve_time / max(r.iterations, 1) for r in self.records])
                ),
                "statuses": sorted({r.status for r in self.records}),
            },
        }
        if Q is not None and R is not None:
            out["performance"] = performance(self, Q, R)
        out.update(self.metadata)
        return out


def _flat(prefix: str, v: np.ndarray) -> list:
    return [(f"{prefix}_{i}", float(x)) for i, x in enumerate(np.asarray(v).ravel())]


def _record_columns(r: StepRecord) -> list:
    cols = [("t", r.t)]
    cols += _flat("x", r.x) + _flat("u", r.u) + _flat("xref", r.x_ref) + _flat("uref", r.u_ref)
    cols += [
        ("objective", np.nan if r.objective is None else r.objective),
        ("w_value", np.nan if r.w_value is None else r.w_value),
        ("iterations", r.iterations),
        ("solve_time", r.solve_time),
        ("status", r.status),
        ("min_margin", r.min_margin),
        ("segment", r.segment),
    ]
    if r.xH is not None:
        cols += _flat("xh_e", r.xH.center) + _flat("xh_s", r.xH.sine) + _flat("xh_c", r.xH.cosine)
        cols += _flat("uh_e", r.uH.center) + _flat("uh_s", r.uH.sine) + _flat("uh_c", r.uH.cosine)
    if r.ref_params is not None:
        rp = r.ref_params
        cols += _flat("rp_xe", rp.xr.center) + _flat("rp_xs", rp.xr.sine) + _flat("rp_xc", rp.xr.cosine)
        cols += _flat("rp_ue", rp.ur.center) + _flat("rp_us", rp.ur.sine) + _flat("rp_uc", rp.ur.cosine)
    return cols


def _csv_header(r: StepRecord) -> list:
    return [name for name, _ in _record_columns(r)]


def _csv_row(r: StepRecord) -> list:
    return [value for _, value in _record_columns(r)]


# -- closed loop -------------------------------------------------------------


def run_closed_loop(s: Scenario) -> ClosedLoopLog:
    """Simulate the scenario; aborts with a partial log on controller failure."""
    controller = s.controller
    provider = s.reference
    controller.bind(provider)
    records = []
    switch_times = []
    x = s.x0.copy()
    aborted = None
    segment = 0
    for t in range(s.duration):
        if s.switch_at is not None and t == s.switch_at:
            provider = s.reference_after_switch
            controller.bind(provider)
            switch_times.append(t)
            segment += 1
        res = controller.step(x, t)
        x_ref, u_ref = provider.sample(t)
        records.append(
            StepRecord(
                t=t, x=x.copy(), u=np.asarray(res.u, dtype=float).copy(),
                x_ref=np.asarray(x_ref, dtype=float), u_ref=np.asarray(u_ref, dtype=float),
                objective=res.objective, w_value=res.w_value,
                iterations=res.iterations, solve_time=res.solve_time,
                status=res.status,
                min_margin=constraint_margin(s.constraints, x, res.u),
                segment=segment,
                xH=res.xH, uH=res.uH, ref_params=res.ref_params,
                hmpc_solution=res.hmpc_solution,
            )
        )
        if res.status != STATUS_SOLVED:
            aborted = f"controller status {res.status} at t={t}"
            break
        x = step(s.model, x, res.u)
    return ClosedLoopLog(
        scenario_name=s.name, controller=getattr(controller, "name", "unknown"),
        records=records, switch_times=switch_times, aborted=aborted,
        metadata=dict(s.metadata),
    )


def performance(log: ClosedLoopLog, Q, R, steps: int | None = None) -> float:
    """Accumulated tracking cost sum ||x - x_ref||_Q^2 + ||u - u_ref||_R^2."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    total = 0.0
    recs = log.records if steps is None else log.records[:steps]
    for r in recs:
        dx = r.x - r.x_ref
        du = r.u - r.u_ref
        total += float(dx @ Q @ dx + du @ R @ du)
    return total


@dataclass
class LyapunovReport:
    w_values: list
    flags: list  # (t, increase) pairs beyond tolerance
    segments: list

    @property
    def ok(self) -> bool:
        return not self.flags


def lyapunov_audit(log: ClosedLoopLog, rel_tol: float = 1e-6) -> LyapunovReport:
    """Flag increases of the tracking Lyapunov value along the run.

    The audit restarts at each reference switch (the value is defined per
    reference)."""
    flags = []
    w_values = log.w_values()
    for prev, cur in zip(log.records, log.records[1:]):
        if prev.w_value is None or cur.w_value is None:
            continue
        if cur.segment != prev.segment:
            continue
        bound = prev.w_value + rel_tol * (1.0 + abs(prev.w_value))
        if cur.w_value > bound:
            flags.append((cur.t, cur.w_value - prev.w_value))
    return LyapunovReport(w_values, flags, sorted({r.segment for r in log.records}))


@dataclass
class FeasibilityReport:
    max_residual: float
    per_step: list  # (t, residual dict)
    failures: int

    @property
    def ok(self) -> bool:
        return self.failures == 0


def feasibility_audit(log: ClosedLoopLog, model: LtiModel,
                      constraints: OutputConstraint, cfg: HmpcConfig,
                      tol: float = 1e-8) -> FeasibilityReport:
    """Check the stored solutions' shifted candidates against all constraints
    at the successor state (the recursive-feasibility certificate)."""
    per_step = []
    worst = 0.0
    failures = 0
    for r in log.records:
        if r.hmpc_solution is None:
            continue
        cand = shift_solution(r.hmpc_solution, model, cfg)
        x_next = step(model, r.x, r.u)
        res = candidate_residuals(model, constraints, cfg, cand, x_next)
        per_step.append((r.t, res))
        worst = max(worst, res["max"])
        if res["max"] > tol:
            failures += 1
    return FeasibilityReport(worst, per_step, failures)


# -- period sweep ------------------------------------------------------------


@dataclass
class SweepRow:
    period: int
    w: float
    hmpc_variables: int
    hmpc_fingerprint: str
    hmpc_time_per_iter: float
    hmpc_iterations: float
    mpct_variables: int
    mpct_time_per_iter: float
    mpct_iterations: float


@dataclass
class SweepResult:
    rows: list

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(f"# {CSV_SCHEMA}-sweep\n")
            writer = csv.writer(f)
            writer.writerow([
                "period", "w", "hmpc_variables", "hmpc_fingerprint",
                "hmpc_time_per_iter", "hmpc_iterations",
                "mpct_variables", "mpct_time_per_iter", "mpct_iterations",
            ])
            for r in self.rows:
                writer.writerow([
                    r.period, r.w, r.hmpc_variables, r.hmpc_fingerprint,
                    r.hmpc_time_per_iter, r.hmpc_iterations,
                    r.mpct_variables, r.mpct_time_per_iter, r.mpct_iterations,
                ])

    def hmpc_dimension_constant(self) -> bool:
        return len({r.hmpc_fingerprint for r in self.rows}) == 1

    def mpct_variables_increasing(self) -> bool:
        v = [r.mpct_variables for r in self.rows]
        return all(a < b for a, b in zip(v, v[1:]))


def _median_time_per_iter(log: ClosedLoopLog) -> tuple[float, float]:
    per_iter = [r.solve_time / max(r.iterations, 1) for r in log.records]
    iters = [r.iterations for r in log.records]
    return float(np.median(per_iter)), float(np.median(iters))


def period_sweep(
    model: LtiModel,
    constraints: OutputConstraint,
    hmpc_cfg: HmpcConfig,
    mpct_cfg: MpctConfig,
    periods,
    make_reference,
    make_x0,
    steps: int = 10,
    solver: SolverConfig | None = None,
    repeats: int = 3,
) -> SweepResult:
    """Per-iteration solve times of both formulations as the period grows.

    `make_reference(w)` must return the harmonic ReferenceParams for the
    given frequency and `make_x0(ref, w)` the initial state of the timing
    run. Each run is repeated and the fastest median is kept, which filters
    wall-clock noise; iterate sequences are identical across repeats.
    """
    from dataclasses import replace

    rows = []
    for T in periods:
        if T < 2:
            raise ValueError("periods must be at least 2")
        w = 2.0 * np.pi / T
        ref = make_reference(w)
        x0 = make_x0(ref, w)

        h_cfg = replace(hmpc_cfg, w=w)
        h_ctrl = HmpcController(model, constraints, h_cfg, solver=solver)
        m_cfg = replace(mpct_cfg, T=int(T))
        m_ctrl = MpctController(model, constraints, m_cfg, solver=solver)

        h_time = m_time = np.inf
        h_iters = m_iters = 0.0
        for _ in range(max(repeats, 1)):
            h_ctrl._prev = None
            h_log = run_closed_loop(Scenario(
                model, constraints, h_ctrl, HarmonicReferenceProvider(ref, w),
                x0, steps, name=f"sweep-hmpc-T{T}"))
            t, h_iters = _median_time_per_iter(h_log)
            h_time = min(h_time, t)

            m_ctrl._prev = None
            m_log = run_closed_loop(Scenario(
                model, constraints, m_ctrl, HarmonicReferenceProvider(ref, w),
                x0, steps, name=f"sweep-mpct-T{T}"))
            t, m_iters = _median_time_per_iter(m_log)
            m_time = min(m_time, t)

        dims = h_ctrl.problem.dimensions()
        rows.append(SweepRow(
            period=int(T), w=w,
            hmpc_variables=dims["variables"], hmpc_fingerprint=dims["fingerprint"],
            hmpc_time_per_iter=h_time, hmpc_iterations=h_iters,
            mpct_variables=m_ctrl.problem.n_vars,
            mpct_time_per_iter=m_time, mpct_iterations=m_iters,
        ))
    return SweepResult(rows)
