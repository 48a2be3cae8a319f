"""ADMM solver with a cached KKT factorization.

The equality constraints are folded into a KKT system

    [[P + rho M'M, G'], [G, 0]]

that is factorized once per program; boxes and second-order cones are handled
by projection. Small problems run against a dense LU factor, driven either by
the compiled kernel (preferred) or the numpy fallback; large problems use a
sparse LU with the Python loop.
"""
from __future__ import annotations

import os
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from . import pyloop
from .program import (
    STATUS_INFEASIBLE_SUSPECT,
    STATUS_MAX_ITER,
    STATUS_SOLVED,
    ConicProgram,
    Solution,
    SolverConfig,
    project_rows,
)

try:
    from . import _kernel

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - depends on the build environment
    _kernel = None
    HAVE_KERNEL = False

#: KKT dimension above which the auto method switches to the sparse path
DENSE_LIMIT = 600

_CODE_TO_STATUS = {
    pyloop.OK: STATUS_SOLVED,
    pyloop.HIT_MAX_ITER: STATUS_MAX_ITER,
    pyloop.DIVERGED: STATUS_INFEASIBLE_SUSPECT,
}


class AdmmNumericalError(RuntimeError):
    """Raised when the iterates contain NaNs."""


def default_backend() -> str:
    env = os.environ.get("HARMONIC_MPC_BACKEND", "").strip().lower()
    if env in ("cython", "numpy"):
        return env
    return "cython" if HAVE_KERNEL else "numpy"


class AdmmSolver:
    """Reusable solver for one program structure.

    The factorization depends only on (P, G, M, rho), so repeated solves with
    updated linear terms `q`, `g` (and objective offset `c0`) reuse it.
    """

    def __init__(self, prog: ConicProgram, cfg: SolverConfig | None = None,
                 backend: str | None = None):
        self.prog = prog
        self.cfg = cfg if cfg is not None else SolverConfig()
        backend = backend if backend is not None else default_backend()
        if backend == "cython" and not HAVE_KERNEL:
            raise RuntimeError("compiled kernel requested but not available")
        if backend not in ("cython", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")

        n = prog.n
        Mb = sp.csr_matrix(prog.M_box)
        Mc = sp.csr_matrix(prog.M_cone)
        M = sp.vstack([Mb, Mc], format="csr") if (Mb.shape[0] + Mc.shape[0]) else sp.csr_matrix((0, n))
        self.m0 = np.concatenate([np.zeros(prog.n_box), prog.d_cone])

        G = sp.csr_matrix(prog.G)
        n_eq = G.shape[0]
        K11 = sp.csr_matrix(prog.P) + self.cfg.rho * (M.T @ M)
        if n_eq:
            K = sp.bmat([[K11, G.T], [G, None]], format="csc")
        else:
            K = sp.csc_matrix(K11)

        kdim = n + n_eq
        method = self.cfg.method
        if method == "auto":
            method = "dense" if kdim <= DENSE_LIMIT else "sparse"
        self.method = method

        if method == "dense":
            Kd = np.asfortranarray(K.toarray())
            lu, piv, info = lapack.dgetrf(Kd)
            if info != 0:
                raise RuntimeError(f"KKT factorization failed (dgetrf info={info})")
            self._lu, self._piv = lu, piv
            self._piv1 = (piv + 1).astype(np.int32)
            self._M = np.asfortranarray(M.toarray())
            self.backend = backend
        else:
            self._splu = spla.splu(K)
            self._M = M
            self.backend = "numpy"  # sparse path always runs the Python loop

    def solve(
        self,
        q: np.ndarray | None = None,
        g: np.ndarray | None = None,
        c0: float | None = None,
        warm=None,
        tol: float | None = None,
        max_iter: int | None = None,
    ) -> Solution:
        prog = self.prog
        q = prog.q if q is None else np.asarray(q, dtype=float).ravel()
        g = prog.g if g is None else np.asarray(g, dtype=float).ravel()
        c0 = prog.c0 if c0 is None else float(c0)
        tol = self.cfg.tol if tol is None else float(tol)
        max_iter = self.cfg.max_iter if max_iter is None else int(max_iter)
        rho = self.cfg.rho

        z0, s0, lam0 = self._initial_point(warm)

        start = time.perf_counter()
        if self.method == "dense" and self.backend == "cython":
            z, nu, s, lam, r_p, r_d, iters, code = _kernel.run_iterations(
                self._lu, self._piv1, self._M, self.m0,
                prog.l, prog.u, prog.n_cones, rho, q, g,
                z0, s0, lam0, tol, max_iter,
            )
        else:
            if self.method == "dense":
                lu, piv = self._lu, self._piv

                def kkt_solve(rhs):
                    sol, info = lapack.dgetrs(lu, piv, rhs)
                    if info != 0:
                        raise RuntimeError(f"dgetrs failed with info={info}")
                    return sol

            else:
                kkt_solve = self._splu.solve
            z, nu, s, lam, r_p, r_d, iters, code = pyloop.run_iterations(
                kkt_solve, self._M, self.m0,
                prog.l, prog.u, prog.n_cones, rho, q, g,
                z0, s0, lam0, tol, max_iter,
            )
        elapsed = time.perf_counter() - start

        if code == pyloop.NAN_DETECTED:
            raise AdmmNumericalError("NaN encountered in ADMM iterates")
        z = np.asarray(z, dtype=float)
        Pz = prog.P @ z
        objective = float(0.5 * z @ Pz + q @ z + c0)
        return Solution(
            z=z,
            nu=np.asarray(nu, dtype=float),
            mu=rho * np.asarray(lam, dtype=float),
            s=np.asarray(s, dtype=float),
            primal_res=float(r_p),
            dual_res=float(r_d),
            iterations=int(iters),
            status=_CODE_TO_STATUS[code],
            objective=objective,
            solve_time=elapsed,
        )

    def _initial_point(self, warm):
        prog = self.prog
        n, m = prog.n, self._M.shape[0]
        if warm is None:
            z = np.zeros(n)
            lam = np.zeros(m)
        elif isinstance(warm, Solution):
            z = np.asarray(warm.z, dtype=float).copy()
            lam = np.asarray(warm.mu, dtype=float) / self.cfg.rho
            return z, np.asarray(warm.s, dtype=float).copy(), lam.copy()
        elif isinstance(warm, tuple):
            z = np.asarray(warm[0], dtype=float).copy()
            lam = np.asarray(warm[1], dtype=float) / self.cfg.rho
        else:
            z = np.asarray(warm, dtype=float).copy()
            lam = np.zeros(m)
        if z.shape[0] != n or lam.shape[0] != m:
            raise ValueError("warm start has wrong dimensions")
        s = project_rows(prog, self._M @ z + self.m0 + lam)
        return z, s, lam


def admm_solve(
    prog: ConicProgram,
    cfg: SolverConfig | None = None,
    warm=None,
    backend: str | None = None,
) -> Solution:
    """One-shot solve; see :class:`AdmmSolver` for the cached variant."""
    return AdmmSolver(prog, cfg, backend=backend).solve(warm=warm)
