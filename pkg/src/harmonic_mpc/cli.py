"""Command-line front end: closed-loop runs, the period-sweep benchmark and
the property-verification battery.

Scenario files are TOML; outputs are a per-step CSV log plus a JSON summary
carrying the config hash, metrics, audit flags and timings.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .config import (
    ConfigError,
    LoadedScenario,
    constraint_geometry,
    load_scenario,
    load_sweep,
)
from .harmonic import evaluate
from .reference import make_admissible_harmonic
from .sim import feasibility_audit, lyapunov_audit, performance, period_sweep, run_closed_loop


def _resolve_config(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = resources.files("harmonic_mpc") / "configs" / f"{name_or_path}.toml"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config not found: {name_or_path!r} (no such file or bundled name)")


def bundled_config_names() -> list:
    folder = resources.files("harmonic_mpc") / "configs"
    return sorted(f.name[: -len(".toml")] for f in folder.iterdir() if f.name.endswith(".toml"))


def cmd_run(args) -> int:
    path = _resolve_config(args.config)
    loaded = load_scenario(path, tol_override=args.tol, seed_override=args.seed,
                           backend=args.backend)
    s = loaded.scenario
    log = run_closed_loop(s)

    summary = log.summary()
    summary["config_hash"] = loaded.hash
    summary["csv_schema"] = "harmonic-mpc-log-v1"
    summary["constraint_geometry"] = constraint_geometry(s.constraints, loaded.position_indices)
    if loaded.hmpc_cfg is not None:
        summary["frequency"] = loaded.hmpc_cfg.w
        summary["horizon"] = loaded.hmpc_cfg.N
    ctable = loaded.raw.get("controller", {})
    if "Q_diag" in ctable and "R_diag" in ctable:
        summary["performance"] = performance(
            log, np.diag(ctable["Q_diag"]), np.diag(ctable["R_diag"]))
    if loaded.controller_kind == "hmpc":
        harmonic_only = s.reference.kind == "harmonic" and (
            s.reference_after_switch is None or s.reference_after_switch.kind == "harmonic")
        fa = feasibility_audit(log, s.model, s.constraints, loaded.hmpc_cfg)
        summary["audits"] = {
            "feasibility": {"max_residual": fa.max_residual, "failures": fa.failures, "ok": fa.ok},
        }
        if harmonic_only:
            la = lyapunov_audit(log)
            summary["audits"]["lyapunov"] = {
                "applicable": True, "flags": len(la.flags), "ok": la.ok,
            }
        else:
            summary["audits"]["lyapunov"] = {"applicable": False}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{s.name}.csv"
    json_path = out / f"{s.name}.summary.json"
    log.write_csv(csv_path)
    with open(json_path, "w") as f:
        json.dump(summary, f, indent=2, default=float)

    print(f"wrote {csv_path} and {json_path}")
    print(f"steps: {len(log)}  aborted: {log.aborted}  min margin: {log.min_margin():.3e}")
    if "performance" in summary:
        print(f"performance: {summary['performance']:.4f}")
    if log.aborted:
        return 3
    return 0


def cmd_sweep(args) -> int:
    path = _resolve_config(args.config)
    loaded = load_sweep(path, backend=args.backend)
    from .config import MODELS

    model, constraints = MODELS[loaded.model_kind]()

    def make_ref(w):
        return make_admissible_harmonic(model, constraints, w, loaded.hint,
                                        loaded.hmpc_cfg.sigma)

    def make_x0(ref, w):
        return evaluate(ref.xr, w, 0) + loaded.x0_offset

    result = period_sweep(model, constraints, loaded.hmpc_cfg, loaded.mpct_cfg,
                          loaded.periods, make_ref, make_x0, steps=loaded.steps,
                          solver=loaded.solver, repeats=loaded.repeats)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{loaded.name}.csv"
    result.write_csv(csv_path)

    dims_constant = result.hmpc_dimension_constant()
    vars_increasing = result.mpct_variables_increasing()
    summary = {
        "schema": "harmonic-mpc-sweep-summary-v1",
        "config_hash": loaded.hash,
        "periods": loaded.periods,
        "hmpc_dimensions_constant": dims_constant,
        "mpct_variables_increasing": vars_increasing,
        "hmpc_time_per_iter": [r.hmpc_time_per_iter for r in result.rows],
        "mpct_time_per_iter": [r.mpct_time_per_iter for r in result.rows],
    }
    with open(out / f"{loaded.name}.summary.json", "w") as f:
        json.dump(summary, f, indent=2, default=float)

    print(f"wrote {csv_path}")
    for r in result.rows:
        print(f"T={r.period:4d}  hmpc {r.hmpc_time_per_iter * 1e6:9.2f} us/iter "
              f"({r.hmpc_variables} vars)  mpct {r.mpct_time_per_iter * 1e6:9.2f} us/iter "
              f"({r.mpct_variables} vars)")
    print(f"hmpc problem dimensions constant across periods: {dims_constant}")
    print(f"mpct variable count strictly increasing: {vars_increasing}")
    return 0 if (dims_constant and vars_increasing) else 1


def cmd_verify(args) -> int:
    opts = verify_mod.VerifyOptions(
        tol=args.tol if args.tol is not None else 1e-4,
        backend=args.backend,
        quick=args.quick,
    )
    ok = verify_mod.run_all(opts)
    print("all checks passed" if ok else "FAILURES present")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmonic-mpc",
        description="Harmonic MPC closed-loop experiments and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario config, write CSV log + JSON summary")
    p_run.add_argument("config", help="path to a scenario TOML or a bundled config name")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--tol", type=float, default=None, help="solver tolerance override")
    p_run.add_argument("--seed", type=int, default=None, help="seed override for generated references")
    p_run.add_argument("--backend", choices=("cython", "numpy"), default=None)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="period-sweep benchmark, write table CSV")
    p_sweep.add_argument("config", help="path to a sweep TOML or a bundled config name")
    p_sweep.add_argument("--out", default="out", help="output directory")
    p_sweep.add_argument("--backend", choices=("cython", "numpy"), default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the property-check battery")
    p_verify.add_argument("--tol", type=float, default=None, help="solver tolerance override")
    p_verify.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p_verify.add_argument("--backend", choices=("cython", "numpy"), default=None)
    p_verify.set_defaults(fn=cmd_verify)

    p_list = sub.add_parser("configs", help="list bundled scenario configs")
    p_list.set_defaults(fn=lambda args: (print("\n".join(bundled_config_names())), 0)[1])

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # invalid controller/reference parameters
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
