"""Pure-Python ADMM iteration loop (fallback backend).

Mirrors the compiled kernel operation for operation; both lanes consume the
same cached KKT factorization, so results agree to rounding error. This loop
also serves the sparse path, where the factorization is a SuperLU object.
"""
from __future__ import annotations

import numpy as np

OK = 0
HIT_MAX_ITER = 1
DIVERGED = 2
NAN_DETECTED = 3

_DIVERGENCE_LIMIT = 1e12


def run_iterations(
    kkt_solve,
    M,
    m0,
    l,
    u,
    n_cones,
    rho,
    q,
    g,
    z,
    s,
    lam,
    tol,
    max_iter,
):
    """Run ADMM on the cached splitting; returns (z, nu, s, lam, r_p, r_d, iters, code).

    `kkt_solve` solves the cached system [[P + rho M'M, G'], [G, 0]] for a
    stacked right-hand side. Box rows come first in M (bounds l, u), then
    cone triples (affine offsets already folded into m0). On a non-converged
    exit the best iterate seen is returned.
    """
    n = q.shape[0]
    n_eq = g.shape[0]
    m = M.shape[0]
    n_box = m - 3 * n_cones

    rhs = np.empty(n + n_eq)
    rhs[n:] = g
    nu = np.zeros(n_eq)

    if m == 0:
        rhs[:n] = -q
        sol = kkt_solve(rhs)
        return sol[:n], sol[n:], s, lam, 0.0, 0.0, 1, OK

    best = np.inf
    best_state = None
    r_p = r_d = np.inf
    code = HIT_MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        rhs[:n] = rho * (M.T @ (s - m0 - lam)) - q
        sol = kkt_solve(rhs)
        z = sol[:n]
        nu = sol[n:]

        y = M @ z + m0
        v = y + lam
        s_prev = s
        s = _project(v, n_box, n_cones, l, u)
        lam = v - s

        r_p = float(np.abs(y - s).max())
        r_d = rho * float(np.abs(M.T @ (s - s_prev)).max())

        score = max(r_p, r_d)
        if not np.isfinite(score):
            if np.isnan(score):
                return z, nu, s, lam, r_p, r_d, it, NAN_DETECTED
            code = DIVERGED
            break
        if score < best:
            best = score
            best_state = (z, nu, s.copy(), lam.copy(), r_p, r_d, it)
        if score <= tol:
            code = OK
            break
        if float(np.abs(z).max()) > _DIVERGENCE_LIMIT:
            code = DIVERGED
            break

    if code == OK:
        return z, nu, s, lam, r_p, r_d, it, OK
    if best_state is not None:
        z, nu, s, lam, r_p, r_d, _ = best_state
    return z, nu, s, lam, r_p, r_d, it, code


def _project(v, n_box, n_cones, l, u):
    s = v.copy()
    if n_box:
        np.clip(s[:n_box], l, u, out=s[:n_box])
    for j in range(n_cones):
        i = n_box + 3 * j
        y0 = s[i]
        t = np.hypot(s[i + 1], s[i + 2])
        if t <= y0:
            continue
        if t <= -y0:
            s[i : i + 3] = 0.0
        else:
            alpha = 0.5 * (y0 + t)
            s[i] = alpha
            s[i + 1] *= alpha / t
            s[i + 2] *= alpha / t
    return s
