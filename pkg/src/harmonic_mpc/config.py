"""Scenario configuration files (TOML) and their translation into scenarios.

One file describes one closed-loop experiment: plant, controller, reference,
initial state and duration, plus optional solver overrides and a mid-run
reference switch. Validation errors carry the offending field path.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .baselines import MpctConfig, StdMpcConfig, dare_solve
from .harmonic import evaluate
from .hmpc import HmpcConfig
from .model import make_ball_and_plate, make_double_integrator
from .reference import (
    StateShapeHint,
    make_admissible_harmonic,
    make_dynamics_consistent_harmonic,
    make_multi_harmonic,
)
from .sim import (
    HarmonicReferenceProvider,
    HmpcController,
    MpctController,
    Scenario,
    StdMpcController,
    TrajectoryReferenceProvider,
)
from .socp import SolverConfig

SCENARIO_SCHEMA = "harmonic-mpc-scenario-v1"
SWEEP_SCHEMA = "harmonic-mpc-sweep-v1"

MODELS = {
    "ball_and_plate": make_ball_and_plate,
    "double_integrator": make_double_integrator,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the field path."""


def _matrix(table: dict, key: str, path: str):
    v = _get(table, key, path, kind=list)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: expected a matrix as list of rows ({exc})") from None
    if arr.ndim != 2:
        raise ConfigError(f"{path}.{key}: expected a matrix as list of rows")
    return arr


def _load_model(raw: dict):
    table = raw.get("model", {})
    kind = _get(table, "kind", "model", str, choices=set(MODELS) | {"custom"})
    if kind != "custom":
        model, constraints = MODELS[kind]()
        return kind, model, constraints
    from .model import LtiModel, OutputConstraint

    A = _matrix(table, "A", "model")
    B = _matrix(table, "B", "model")
    ct = _get(table, "constraints", "model", dict)
    E = _matrix(ct, "E", "model.constraints")
    F = _matrix(ct, "F", "model.constraints")
    try:
        model = LtiModel(A, B)
        constraints = OutputConstraint(
            E, F,
            _vector(ct, "y_lo", "model.constraints", E.shape[0]),
            _vector(ct, "y_hi", "model.constraints", E.shape[0]),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    return kind, model, constraints


def model_config_dict(model, constraints) -> dict:
    """Serialize a model instance into the scenario [model] table form."""
    return {
        "kind": "custom",
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "constraints": {
            "E": constraints.E.tolist(),
            "F": constraints.F.tolist(),
            "y_lo": constraints.y_lo.tolist(),
            "y_hi": constraints.y_hi.tolist(),
        },
    }


def _get(table: dict, key: str, path: str, kind=None, default=..., choices=None):
    if key not in table:
        if default is not ...:
            return default
        raise ConfigError(f"{path}.{key}: required field missing")
    value = table[key]
    if kind is not None:
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        elif kind is int and isinstance(value, int) and not isinstance(value, bool):
            value = int(value)
        elif not isinstance(value, kind):
            raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path}.{key}: must be one of {sorted(choices)}")
    return value


def _vector(table: dict, key: str, path: str, length: int | None = None, default=...):
    v = _get(table, key, path, kind=list, default=default)
    if v is default and default is not ...:
        return v
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: expected a list of numbers ({exc})") from None
    if arr.ndim != 1:
        raise ConfigError(f"{path}.{key}: expected a flat list of numbers")
    if length is not None and arr.shape[0] != length:
        raise ConfigError(f"{path}.{key}: expected {length} entries, got {arr.shape[0]}")
    return arr


def config_hash(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


@dataclass
class LoadedScenario:
    scenario: Scenario
    raw: dict
    hash: str
    solver: SolverConfig
    controller_kind: str
    hmpc_cfg: HmpcConfig | None
    position_indices: list


def _solver_config(raw: dict, tol_override: float | None) -> SolverConfig:
    table = raw.get("solver", {})
    cfg = SolverConfig(
        rho=_get(table, "rho", "solver", float, default=150.0),
        tol=_get(table, "tol", "solver", float, default=1e-4),
        max_iter=_get(table, "max_iter", "solver", int, default=20000),
        method=_get(table, "method", "solver", str, default="auto",
                    choices={"auto", "dense", "sparse"}),
    )
    if tol_override is not None:
        cfg.tol = float(tol_override)
    return cfg


def _diag(table, key, path, length):
    return np.diag(_vector(table, key, path, length))


def _load_reference(table: dict, path: str, model, constraints, w_hint, seed_override):
    kind = _get(table, "kind", path, str, choices={"harmonic", "multi_harmonic"})
    if kind == "harmonic":
        idx = [int(i) for i in _get(table, "position_indices", path, list)]
        hint = StateShapeHint(
            tuple(idx),
            _vector(table, "center", path, len(idx)),
            _vector(table, "sine", path, len(idx)),
            _vector(table, "cosine", path, len(idx)),
        )
        w = _get(table, "w", path, float, default=w_hint)
        if w is None:
            raise ConfigError(f"{path}.w: required for a harmonic reference")
        sigma = _get(table, "sigma", path, float, default=1e-3)
        if _get(table, "require_admissible", path, bool, default=True):
            ref = make_admissible_harmonic(model, constraints, w, hint, sigma)
        else:
            ref = make_dynamics_consistent_harmonic(model, w, hint)
        return HarmonicReferenceProvider(ref, w), idx
    # multi-harmonic trajectory
    seed = seed_override if seed_override is not None else _get(table, "seed", path, int, default=0)
    idx = [int(i) for i in _get(table, "position_indices", path, list)]
    traj = make_multi_harmonic(
        model,
        w_base=_get(table, "w_base", path, float),
        count=_get(table, "harmonics", path, int),
        seed=seed,
        amplitude=_get(table, "amplitude", path, float),
        center_state=_vector(table, "center_state", path, model.n_x, default=None),
        position_indices=idx,
    )
    shift = _vector(table, "center_shift", path, model.n_x, default=None)
    if shift is not None:
        traj = traj.shifted(shift)
    return TrajectoryReferenceProvider(traj), idx


def load_scenario(path, tol_override: float | None = None,
                  seed_override: int | None = None,
                  backend: str | None = None) -> LoadedScenario:
    with open(path, "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"not valid TOML: {exc}") from None
    schema = _get(raw, "schema", "", str, default=SCENARIO_SCHEMA)
    if schema != SCENARIO_SCHEMA:
        raise ConfigError(f"schema: expected {SCENARIO_SCHEMA!r}, got {schema!r}")
    name = _get(raw, "name", "", str, default="scenario")

    model_kind, model, constraints = _load_model(raw)
    n_x, n_u = model.n_x, model.n_u

    ctable = raw.get("controller", {})
    ckind = _get(ctable, "kind", "controller", str, choices={"hmpc", "mpct", "stdmpc"})
    solver = _solver_config(raw, tol_override)

    hmpc_cfg = None
    w_hint = None
    if ckind == "hmpc":
        hmpc_cfg = HmpcConfig(
            N=_get(ctable, "N", "controller", int),
            Q=_diag(ctable, "Q_diag", "controller", n_x),
            R=_diag(ctable, "R_diag", "controller", n_u),
            T_e=_diag(ctable, "Te_diag", "controller", n_x),
            S_e=_diag(ctable, "Se_diag", "controller", n_u),
            T_h=_diag(ctable, "Th_diag", "controller", n_x),
            S_h=_diag(ctable, "Sh_diag", "controller", n_u),
            w=_get(ctable, "w", "controller", float),
            sigma=_get(ctable, "sigma", "controller", float, default=1e-3),
        )
        controller = HmpcController(model, constraints, hmpc_cfg, solver=solver, backend=backend)
        w_hint = hmpc_cfg.w
    elif ckind == "mpct":
        cfg = MpctConfig(
            T=_get(ctable, "T", "controller", int),
            N=_get(ctable, "N", "controller", int),
            Q=_diag(ctable, "Q_diag", "controller", n_x),
            R=_diag(ctable, "R_diag", "controller", n_u),
            T_e=_diag(ctable, "Te_diag", "controller", n_x),
            S_e=_diag(ctable, "Se_diag", "controller", n_u),
            sigma=_get(ctable, "sigma", "controller", float, default=1e-3),
        )
        controller = MpctController(model, constraints, cfg, solver=solver, backend=backend)
    else:
        Q = _diag(ctable, "Q_diag", "controller", n_x)
        R = _diag(ctable, "R_diag", "controller", n_u)
        cfg = StdMpcConfig(
            N=_get(ctable, "N", "controller", int),
            Q=Q, R=R, P=dare_solve(model.A, model.B, Q, R),
        )
        controller = StdMpcController(model, constraints, cfg, solver=solver, backend=backend)

    provider, position_indices = _load_reference(
        raw.get("reference", {}), "reference", model, constraints, w_hint, seed_override)

    stable = raw.get("simulation", {})
    duration = _get(stable, "duration", "simulation", int)
    if duration < 1:
        raise ConfigError("simulation.duration: must be at least 1")
    x0_mode = _get(stable, "x0_mode", "simulation", str, default="on_reference",
                   choices={"on_reference", "offset", "explicit"})
    x_start, _ = provider.sample(0)
    if x0_mode == "on_reference":
        x0 = np.asarray(x_start, dtype=float)
    elif x0_mode == "offset":
        x0 = np.asarray(x_start, dtype=float) + _vector(stable, "x0_offset", "simulation", n_x)
    else:
        x0 = _vector(stable, "x0", "simulation", n_x)

    switch_at = None
    provider2 = None
    if "switch" in raw:
        swt = raw["switch"]
        switch_at = _get(swt, "at", "switch", int)
        if not 0 < switch_at < duration:
            raise ConfigError("switch.at: must lie strictly inside the run")
        provider2, _ = _load_reference(
            _get(swt, "reference", "switch", dict), "switch.reference",
            model, constraints, w_hint, seed_override)

    scenario = Scenario(
        model=model, constraints=constraints, controller=controller,
        reference=provider, x0=x0, duration=duration,
        switch_at=switch_at, reference_after_switch=provider2,
        name=name,
        metadata={"model": model_kind, "controller_kind": ckind},
    )
    return LoadedScenario(
        scenario=scenario, raw=raw, hash=config_hash(path), solver=solver,
        controller_kind=ckind, hmpc_cfg=hmpc_cfg, position_indices=position_indices,
    )


@dataclass
class LoadedSweep:
    model_kind: str
    hmpc_cfg: HmpcConfig
    mpct_cfg: MpctConfig
    solver: SolverConfig
    periods: list
    steps: int
    repeats: int
    hint: StateShapeHint
    x0_offset: np.ndarray
    raw: dict
    hash: str
    name: str


def load_sweep(path, backend: str | None = None) -> LoadedSweep:
    with open(path, "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"not valid TOML: {exc}") from None
    schema = _get(raw, "schema", "", str, default=SWEEP_SCHEMA)
    if schema != SWEEP_SCHEMA:
        raise ConfigError(f"schema: expected {SWEEP_SCHEMA!r}, got {schema!r}")
    model_kind = _get(raw.get("model", {}), "kind", "model", str, choices=set(MODELS))
    model, constraints = MODELS[model_kind]()
    n_x, n_u = model.n_x, model.n_u

    htable = _get(raw, "hmpc", "", dict)
    hmpc_cfg = HmpcConfig(
        N=_get(htable, "N", "hmpc", int),
        Q=_diag(htable, "Q_diag", "hmpc", n_x),
        R=_diag(htable, "R_diag", "hmpc", n_u),
        T_e=_diag(htable, "Te_diag", "hmpc", n_x),
        S_e=_diag(htable, "Se_diag", "hmpc", n_u),
        T_h=_diag(htable, "Th_diag", "hmpc", n_x),
        S_h=_diag(htable, "Sh_diag", "hmpc", n_u),
        w=_get(htable, "w", "hmpc", float, default=np.pi / 16),
        sigma=_get(htable, "sigma", "hmpc", float, default=1e-3),
    )
    mtable = _get(raw, "mpct", "", dict)
    mpct_cfg = MpctConfig(
        T=32, N=_get(mtable, "N", "mpct", int),
        Q=_diag(mtable, "Q_diag", "mpct", n_x),
        R=_diag(mtable, "R_diag", "mpct", n_u),
        T_e=_diag(mtable, "Te_diag", "mpct", n_x),
        S_e=_diag(mtable, "Se_diag", "mpct", n_u),
        sigma=_get(mtable, "sigma", "mpct", float, default=1e-3),
    )
    wtable = _get(raw, "sweep", "", dict)
    periods = [int(p) for p in _get(wtable, "periods", "sweep", list)]
    if any(p < 2 for p in periods):
        raise ConfigError("sweep.periods: all periods must be at least 2")
    steps = _get(wtable, "steps", "sweep", int, default=10)
    repeats = _get(wtable, "repeats", "sweep", int, default=3)
    rtable = _get(wtable, "reference", "sweep", dict)
    idx = [int(i) for i in _get(rtable, "position_indices", "sweep.reference", list)]
    hint = StateShapeHint(
        tuple(idx),
        _vector(rtable, "center", "sweep.reference", len(idx)),
        _vector(rtable, "sine", "sweep.reference", len(idx)),
        _vector(rtable, "cosine", "sweep.reference", len(idx)),
    )
    x0_offset = _vector(wtable, "x0_offset", "sweep", n_x,
                        default=np.zeros(n_x))
    return LoadedSweep(
        model_kind=model_kind, hmpc_cfg=hmpc_cfg, mpct_cfg=mpct_cfg,
        solver=_solver_config(raw, None), periods=periods, steps=steps, repeats=repeats,
        hint=hint, x0_offset=np.asarray(x0_offset, dtype=float),
        raw=raw, hash=config_hash(path), name=_get(raw, "name", "", str, default="sweep"),
    )


def constraint_geometry(constraints, position_indices) -> dict:
    """Serializable constraint description for the plotting scripts."""
    return {
        "rows": [
            {
                "e": [float(v) for v in constraints.E[i]],
                "f": [float(v) for v in constraints.F[i]],
                "lo": float(constraints.y_lo[i]),
                "hi": float(constraints.y_hi[i]),
            }
            for i in range(constraints.n_y)
        ],
        "position_columns": [f"x_{i}" for i in position_indices],
        "position_indices": [int(i) for i in position_indices],
    }
