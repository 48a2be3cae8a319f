"""High-accuracy dense oracle for verification.

Solves the same program class with an independent second-order (interior
point) method, via the Clarabel solver. Used only by tests and audits; the
production path is the ADMM solver.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

import clarabel

from .program import (
    STATUS_INFEASIBLE_SUSPECT,
    STATUS_MAX_ITER,
    STATUS_SOLVED,
    ConicProgram,
    Solution,
    constraint_violation,
)

#: documented small-problem bound for the oracle
ORACLE_MAX_VARIABLES = 200


def oracle_solve(prog: ConicProgram, accuracy: float = 1e-10) -> Solution:
    """Solve a small program to high accuracy with an interior-point method."""
    if prog.n > ORACLE_MAX_VARIABLES:
        raise ValueError(
            f"oracle accepts at most {ORACLE_MAX_VARIABLES} variables, got {prog.n}"
        )

    P = sp.triu(sp.csc_matrix(prog.P), format="csc")
    blocks, rhs, cones = [], [], []
    if prog.n_eq:
        blocks.append(sp.csc_matrix(prog.G))
        rhs.append(prog.g)
        cones.append(clarabel.ZeroConeT(prog.n_eq))
    if prog.n_box:
        Mb = sp.csc_matrix(prog.M_box)
        blocks.extend([Mb, -Mb])
        rhs.extend([prog.u, -prog.l])
        cones.append(clarabel.NonnegativeConeT(2 * prog.n_box))
    if prog.n_cones:
        blocks.append(-sp.csc_matrix(prog.M_cone))
        rhs.append(prog.d_cone)
        cones.extend([clarabel.SecondOrderConeT(3)] * prog.n_cones)
    if blocks:
        A = sp.vstack(blocks, format="csc")
        b = np.concatenate(rhs)
    else:
        A = sp.csc_matrix((0, prog.n))
        b = np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = accuracy
    settings.tol_gap_rel = accuracy
    settings.tol_feas = accuracy
    solver = clarabel.DefaultSolver(P, prog.q, A, b, cones, settings)
    res = solver.solve()

    status = _map_status(res.status)
    z = np.asarray(res.x, dtype=float)
    dual = np.asarray(res.z, dtype=float)
    nu = dual[: prog.n_eq]
    off = prog.n_eq
    if prog.n_box:
        mu_box = dual[off : off + prog.n_box] - dual[off + prog.n_box : off + 2 * prog.n_box]
        off += 2 * prog.n_box
    else:
        mu_box = np.zeros(0)
    mu_cone = -dual[off:]
    mu = np.concatenate([mu_box, mu_cone])

    s_rows = np.concatenate(
        [
            prog.M_box @ z if prog.n_box else np.zeros(0),
            (prog.M_cone @ z + prog.d_cone) if prog.n_cones else np.zeros(0),
        ]
    )
    grad = prog.P @ z + prog.q
    if prog.n_eq:
        grad = grad + prog.G.T @ nu
    if prog.n_box:
        grad = grad + prog.M_box.T @ mu_box
    if prog.n_cones:
        grad = grad + prog.M_cone.T @ mu_cone
    return Solution(
        z=z,
        nu=nu,
        mu=mu,
        s=s_rows,
        primal_res=constraint_violation(prog, z),
        dual_res=float(np.abs(grad).max()) if grad.size else 0.0,
        iterations=int(res.iterations),
        status=status,
        objective=prog.objective(z),
        solve_time=float(res.solve_time),
    )


def _map_status(status) -> str:
    name = str(status)
    if "Solved" in name and "Almost" not in name:
        return STATUS_SOLVED
    if "MaxIter" in name or "MaxTime" in name or "Almost" in name:
        return STATUS_MAX_ITER
    return STATUS_INFEASIBLE_SUSPECT
