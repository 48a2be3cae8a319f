"""Benchmark: compiled ADMM kernel versus the pure-numpy fallback.

Runs the same problems through both backends and reports per-iteration times.
Usage: python benchmarks/kernel_benchmark.py [--repeats N]
"""
import argparse
import time

import numpy as np

from harmonic_mpc.hmpc import HmpcProblem
from harmonic_mpc.model import make_ball_and_plate
from harmonic_mpc.reference import StateShapeHint, make_admissible_harmonic
from harmonic_mpc.harmonic import evaluate
from harmonic_mpc.socp import AdmmSolver, SolverConfig
from harmonic_mpc.socp.admm import HAVE_KERNEL
from harmonic_mpc.verify import random_conic_program, section_v_config


def time_backend(solver: AdmmSolver, q, g, repeats: int) -> tuple[float, int]:
    best = np.inf
    iters = 0
    for _ in range(repeats):
        sol = solver.solve(q=q, g=g)
        iters = sol.iterations
        best = min(best, sol.solve_time / max(sol.iterations, 1))
    return best, iters


def bench_case_study(repeats: int):
    model, cons = make_ball_and_plate()
    cfg = section_v_config()
    ref = make_admissible_harmonic(model, cons, cfg.w,
                                   StateShapeHint((0, 4), [0.0, 0.0], [0.6, 0.0], [0.0, 0.6]),
                                   cfg.sigma)
    x0 = evaluate(ref.xr, cfg.w, 0) + np.array([0.25, 0, 0, 0, -0.25, 0, 0, 0])
    rows = []
    for backend in ("cython", "numpy"):
        if backend == "cython" and not HAVE_KERNEL:
            continue
        prob = HmpcProblem(model, cons, cfg, backend=backend)
        q, c0 = prob.linear_cost(ref)
        per_iter, iters = time_backend(prob.solver, q, prob.rhs(x0), repeats)
        rows.append((f"tracking problem ({prob.prog.n} vars)", backend, per_iter, iters))
    return rows


def bench_random(repeats: int):
    rng = np.random.default_rng(0)
    prog = random_conic_program(rng, max_vars=60)
    rows = []
    for backend in ("cython", "numpy"):
        if backend == "cython" and not HAVE_KERNEL:
            continue
        solver = AdmmSolver(prog, SolverConfig(rho=5.0, tol=1e-6), backend=backend)
        per_iter, iters = time_backend(solver, prog.q, prog.g, repeats)
        rows.append((f"random conic ({prog.n} vars)", backend, per_iter, iters))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if not HAVE_KERNEL:
        print("compiled kernel not available; timing the numpy fallback only")

    rows = bench_case_study(args.repeats) + bench_random(args.repeats)
    print(f"{'problem':<30} {'backend':<8} {'us/iteration':>14} {'iterations':>11}")
    for name, backend, per_iter, iters in rows:
        print(f"{name:<30} {backend:<8} {per_iter * 1e6:>14.2f} {iters:>11}")

    by_problem = {}
    for name, backend, per_iter, _ in rows:
        by_problem.setdefault(name, {})[backend] = per_iter
    for name, d in by_problem.items():
        if "cython" in d and "numpy" in d:
            print(f"{name}: compiled kernel speedup {d['numpy'] / d['cython']:.2f}x")


if __name__ == "__main__":
    main()
