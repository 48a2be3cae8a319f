# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ADMM iteration loop.

Same splitting as the pure-Python loop in ``pyloop``: a back-solve against a
cached LU factorization of [[P + rho M'M, G'], [G, 0]] followed by box/cone
projections and the multiplier update. BLAS/LAPACK are reached through
scipy's Cython bindings, so no extra libraries are linked.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, hypot, isfinite, isnan
from scipy.linalg.cython_blas cimport dgemv
from scipy.linalg.cython_lapack cimport dgetrs

cnp.import_array()

OK = 0
HIT_MAX_ITER = 1
DIVERGED = 2
NAN_DETECTED = 3

cdef double DIVERGENCE_LIMIT = 1e12


def run_iterations(
    cnp.ndarray[double, ndim=2] lu,          # F-contiguous LU factor (n+n_eq square)
    cnp.ndarray[int, ndim=1] piv,            # 1-based pivots for dgetrs
    cnp.ndarray[double, ndim=2] M,           # F-contiguous stacked row matrix (m x n)
    cnp.ndarray[double, ndim=1] m0,
    cnp.ndarray[double, ndim=1] l,
    cnp.ndarray[double, ndim=1] u,
    int n_cones,
    double rho,
    cnp.ndarray[double, ndim=1] q,
    cnp.ndarray[double, ndim=1] g,
    cnp.ndarray[double, ndim=1] z0,
    cnp.ndarray[double, ndim=1] s0,
    cnp.ndarray[double, ndim=1] lam0,
    double tol,
    int max_iter,
):
    cdef int n = q.shape[0]
    cdef int n_eq = g.shape[0]
    cdef int m = M.shape[0]
    cdef int n_box = m - 3 * n_cones
    cdef int nk = n + n_eq

    cdef cnp.ndarray[double, ndim=1] rhs = np.empty(nk)
    cdef cnp.ndarray[double, ndim=1] z = np.ascontiguousarray(z0, dtype=np.float64).copy()
    cdef cnp.ndarray[double, ndim=1] nu = np.zeros(n_eq)
    cdef cnp.ndarray[double, ndim=1] s = np.ascontiguousarray(s0, dtype=np.float64).copy()
    cdef cnp.ndarray[double, ndim=1] lam = np.ascontiguousarray(lam0, dtype=np.float64).copy()
    cdef cnp.ndarray[double, ndim=1] y = np.empty(m if m else 1)
    cdef cnp.ndarray[double, ndim=1] work_m = np.empty(m if m else 1)
    cdef cnp.ndarray[double, ndim=1] work_n = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] s_prev = np.empty(m if m else 1)
    cdef cnp.ndarray[double, ndim=1] best_z = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] best_nu = np.empty(n_eq if n_eq else 1)
    cdef cnp.ndarray[double, ndim=1] best_s = np.empty(m if m else 1)
    cdef cnp.ndarray[double, ndim=1] best_lam = np.empty(m if m else 1)

    cdef int i, j, it, info, inc = 1, nrhs = 1
    cdef double one = 1.0, zero = 0.0
    cdef double y0, t, alpha, r_p, r_d, score, nan_guard
    cdef double best = np.inf
    cdef double best_rp = np.inf, best_rd = np.inf
    cdef int have_best = 0, code = HIT_MAX_ITER
    cdef char trans = b'N'
    cdef char transT = b'T'

    if nk == 0:
        return z, nu, s, lam, 0.0, 0.0, 0, OK

    for i in range(n_eq):
        rhs[n + i] = g[i]

    if m == 0:
        for i in range(n):
            rhs[i] = -q[i]
        dgetrs(&trans, &nk, &nrhs, &lu[0, 0], &nk, &piv[0], &rhs[0], &nk, &info)
        if info != 0:
            raise RuntimeError(f"dgetrs failed with info={info}")
        for i in range(n):
            z[i] = rhs[i]
        for i in range(n_eq):
            nu[i] = rhs[n + i]
        return z, nu, s, lam, 0.0, 0.0, 1, OK

    it = 0
    r_p = np.inf
    r_d = np.inf
    for it in range(1, max_iter + 1):
        # rhs_top = rho * M'(s - m0 - lam) - q
        for i in range(m):
            work_m[i] = s[i] - m0[i] - lam[i]
        dgemv(&transT, &m, &n, &rho, &M[0, 0], &m, &work_m[0], &inc, &zero, &work_n[0], &inc)
        for i in range(n):
            rhs[i] = work_n[i] - q[i]
        for i in range(n_eq):
            rhs[n + i] = g[i]

        dgetrs(&trans, &nk, &nrhs, &lu[0, 0], &nk, &piv[0], &rhs[0], &nk, &info)
        if info != 0:
            raise RuntimeError(f"dgetrs failed with info={info}")
        for i in range(n):
            z[i] = rhs[i]
        for i in range(n_eq):
            nu[i] = rhs[n + i]

        # y = M z + m0 ; v = y + lam ; s = project(v) ; lam = v - s
        dgemv(&trans, &m, &n, &one, &M[0, 0], &m, &z[0], &inc, &zero, &y[0], &inc)
        for i in range(m):
            y[i] += m0[i]
            s_prev[i] = s[i]
            s[i] = y[i] + lam[i]  # s temporarily holds v
        for i in range(n_box):
            if s[i] < l[i]:
                s[i] = l[i]
            elif s[i] > u[i]:
                s[i] = u[i]
        for j in range(n_cones):
            i = n_box + 3 * j
            y0 = s[i]
            t = hypot(s[i + 1], s[i + 2])
            if t <= y0:
                pass
            elif t <= -y0:
                s[i] = 0.0
                s[i + 1] = 0.0
                s[i + 2] = 0.0
            else:
                alpha = 0.5 * (y0 + t)
                s[i] = alpha
                s[i + 1] *= alpha / t
                s[i + 2] *= alpha / t
        r_p = 0.0
        nan_guard = 0.0  # NaN in any iterate propagates through the sum
        for i in range(m):
            lam[i] = y[i] + lam[i] - s[i]
            t = fabs(y[i] - s[i])
            nan_guard += t
            if t > r_p:
                r_p = t
            work_m[i] = s[i] - s_prev[i]

        # r_d = rho * ||M'(s - s_prev)||_inf
        dgemv(&transT, &m, &n, &rho, &M[0, 0], &m, &work_m[0], &inc, &zero, &work_n[0], &inc)
        r_d = 0.0
        for i in range(n):
            t = fabs(work_n[i])
            nan_guard += t
            if t > r_d:
                r_d = t

        if isnan(nan_guard):
            return z, nu, s, lam, r_p, r_d, it, NAN_DETECTED
        score = r_p if r_p > r_d else r_d
        if not isfinite(score):
            if isnan(score):
                return z, nu, s, lam, r_p, r_d, it, NAN_DETECTED
            code = DIVERGED
            break
        if score < best:
            best = score
            best_rp = r_p
            best_rd = r_d
            have_best = 1
            best_z[:] = z
            best_nu[: n_eq] = nu
            best_s[:] = s
            best_lam[:] = lam
        if score <= tol:
            code = OK
            break
        t = 0.0
        for i in range(n):
            if fabs(z[i]) > t:
                t = fabs(z[i])
        if t > DIVERGENCE_LIMIT:
            code = DIVERGED
            break

    if code == OK:
        return z, nu, s, lam, r_p, r_d, it, OK
    if have_best:
        return best_z, best_nu[:n_eq], best_s, best_lam, best_rp, best_rd, it, code
    return z, nu, s, lam, r_p, r_d, it, code
