# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: the sparse Bayesian EM iteration and VAR simulation.

Both functions mirror ``mvarpdc._fallback`` argument for argument; the
numpy versions are the reference and the tests hold the two to agreement.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite, HUGE_VAL

cnp.import_array()

cdef enum:
    STATUS_CONVERGED = 0
    STATUS_MAX_ITERS = 1
    STATUS_NOT_PD = 2
    STATUS_NONFINITE = 3


cdef int _cholesky(double[:, ::1] g, Py_ssize_t m) noexcept nogil:
    # In-place lower Cholesky; returns 0 on success, 1 if not positive definite.
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(m):
        s = g[j, j]
        for k in range(j):
            s -= g[j, k] * g[j, k]
        if not (s > 0.0):
            return 1
        s = sqrt(s)
        g[j, j] = s
        for i in range(j + 1, m):
            for k in range(j):
                g[i, j] -= g[i, k] * g[j, k]
            g[i, j] /= s
    return 0


cdef void _chol_solve(double[:, ::1] l, double[::1] b, double[::1] out,
                      Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * out[k]
        out[i] = s / l[i, i]
    for i in range(m - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, m):
            s -= l[k, i] * out[k]
        out[i] = s / l[i, i]


cdef void _chol_inverse(double[:, ::1] l, double[:, ::1] inv, double[::1] work,
                        double[::1] col, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    for j in range(m):
        for i in range(m):
            work[i] = 0.0
        work[j] = 1.0
        _chol_solve(l, work, col, m)
        for i in range(m):
            inv[i, j] = col[i]


def sbl_em(const double[:, ::1] phi, const double[:, ::1] outer,
           const double[::1] y, double[::1] nu, double[::1] lam,
           int max_iters, double rel_tol, double prune_threshold,
           bint isotropic):
    """Run the EM loop for one channel. ``nu`` and ``lam`` are updated in place.

    ``outer`` holds the packed upper triangle of phi_i phi_i^T per row, as
    produced by ``packed_outer``. With ``isotropic`` set, every entry of
    ``lam`` carries the same scalar precision.

    Returns ``(x, pruned, iterations, rel_change, status)``.
    """
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t m = phi.shape[1]
    cdef Py_ssize_t nq = outer.shape[1]
    cdef Py_ssize_t i, a, b, q
    cdef int it, status = STATUS_MAX_ITERS, iterations = 0
    cdef double acc, r, den, mean_den, floor, dx, nx, rel = HUGE_VAL, li

    x_arr = np.zeros(m, dtype=np.float64)
    xprev_arr = np.zeros(m, dtype=np.float64)
    pruned_arr = np.zeros(m, dtype=np.uint8)
    cdef double[::1] x = x_arr
    cdef double[::1] xprev = xprev_arr
    cdef unsigned char[::1] pruned = pruned_arr
    cdef double[:, ::1] g = np.empty((m, m), dtype=np.float64)
    cdef double[:, ::1] ginv = np.empty((m, m), dtype=np.float64)
    cdef double[::1] gpack = np.empty(nq, dtype=np.float64)
    cdef double[::1] gp = np.empty(nq, dtype=np.float64)
    cdef double[::1] rhs = np.empty(m, dtype=np.float64)
    cdef double[::1] work = np.empty(m, dtype=np.float64)
    cdef double[::1] col = np.empty(m, dtype=np.float64)
    cdef double[::1] dens = np.empty(n, dtype=np.float64)
    # sufficient statistics for the isotropic path
    cdef double[::1] ptp = np.zeros(nq, dtype=np.float64)
    cdef double[::1] pty = np.zeros(m, dtype=np.float64)
    cdef double yty = 0.0, lam_iso = lam[0] if n > 0 else 1.0

    with nogil:
        if isotropic:
            for i in range(n):
                yty += y[i] * y[i]
                for q in range(nq):
                    ptp[q] += outer[i, q]
                for a in range(m):
                    pty[a] += phi[i, a] * y[i]
        for it in range(max_iters):
            # E-step: Gamma = Phi^T Lambda Phi + diag(nu), x = Gamma^-1 Phi^T Lambda y
            if isotropic:
                for q in range(nq):
                    gpack[q] = lam_iso * ptp[q]
                for a in range(m):
                    rhs[a] = lam_iso * pty[a]
            else:
                for q in range(nq):
                    gpack[q] = 0.0
                for a in range(m):
                    rhs[a] = 0.0
                for i in range(n):
                    li = lam[i]
                    for q in range(nq):
                        gpack[q] += li * outer[i, q]
                    acc = li * y[i]
                    for a in range(m):
                        rhs[a] += phi[i, a] * acc
            q = 0
            for a in range(m):
                for b in range(a, m):
                    g[b, a] = gpack[q]
                    q += 1
            for a in range(m):
                if pruned[a]:
                    for b in range(m):
                        g[a, b] = 0.0
                        g[b, a] = 0.0
                    g[a, a] = 1.0
                    rhs[a] = 0.0
                else:
                    g[a, a] += nu[a]
            if _cholesky(g, m):
                status = STATUS_NOT_PD
                break
            for a in range(m):
                xprev[a] = x[a]
            _chol_solve(g, rhs, x, m)
            _chol_inverse(g, ginv, work, col, m)
            iterations = it + 1

            dx = 0.0
            nx = 0.0
            for a in range(m):
                if pruned[a]:
                    x[a] = 0.0
                    for b in range(m):
                        ginv[a, b] = 0.0
                        ginv[b, a] = 0.0
                if not isfinite(x[a]):
                    status = STATUS_NONFINITE
                dx += (x[a] - xprev[a]) * (x[a] - xprev[a])
                nx += x[a] * x[a]
            if status == STATUS_NONFINITE:
                break
            if nx > 0.0:
                rel = sqrt(dx / nx)
            elif dx == 0.0:
                rel = 0.0
            else:
                rel = HUGE_VAL
            if it > 0 and rel < rel_tol:
                status = STATUS_CONVERGED
                break

            # M-step: nu_jj = 1 / [x x^T + Gamma^-1]_jj
            for a in range(m):
                if pruned[a]:
                    continue
                nu[a] = 1.0 / (x[a] * x[a] + ginv[a, a])
                if nu[a] > prune_threshold:
                    pruned[a] = 1
                    x[a] = 0.0
                    for b in range(m):
                        ginv[a, b] = 0.0
                        ginv[b, a] = 0.0

            # Lambda^-1 = diag[(y - Phi x)^2 + Phi Gamma^-1 Phi^T]
            q = 0
            for a in range(m):
                gp[q] = ginv[a, a]
                q += 1
                for b in range(a + 1, m):
                    gp[q] = 2.0 * ginv[a, b]
                    q += 1
            if isotropic:
                # mean of (y - Phi x)^2 + diag(Phi Gamma^-1 Phi^T) via Phi^T Phi
                den = yty
                q = 0
                for a in range(m):
                    den -= 2.0 * x[a] * pty[a]
                    den += ptp[q] * (x[a] * x[a] + gp[q])
                    q += 1
                    for b in range(a + 1, m):
                        den += ptp[q] * (2.0 * x[a] * x[b] + gp[q])
                        q += 1
                mean_den = den / n
                if mean_den > 0.0:
                    lam_iso = 1.0 / mean_den
            else:
                mean_den = 0.0
                for i in range(n):
                    r = y[i]
                    for a in range(m):
                        r -= phi[i, a] * x[a]
                    den = r * r
                    for q in range(nq):
                        den += outer[i, q] * gp[q]
                    dens[i] = den
                    mean_den += den
                mean_den /= n
                floor = 1e-12 * mean_den
                if floor < 1e-300:
                    floor = 1e-300
                for i in range(n):
                    den = dens[i]
                    if den < floor:
                        den = floor
                    lam[i] = 1.0 / den
        if isotropic:
            for i in range(n):
                lam[i] = lam_iso

    return x_arr, pruned_arr.astype(bool), iterations, rel, status


def simulate_var(const double[:, :, ::1] coeffs, const double[:, ::1] innov):
    """Run ``s(t) = sum_p A(p) s(t-p) + e(t)`` from zero initial conditions.

    ``coeffs`` has shape (P, K, K); ``innov`` has shape (N, K).
    """
    cdef Py_ssize_t order = coeffs.shape[0]
    cdef Py_ssize_t k = coeffs.shape[1]
    cdef Py_ssize_t n = innov.shape[0]
    cdef Py_ssize_t t, p, i, j
    cdef double acc
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for t in range(n):
            for i in range(k):
                acc = innov[t, i]
                for p in range(order):
                    if t - p - 1 < 0:
                        break
                    for j in range(k):
                        acc += coeffs[p, i, j] * out[t - p - 1, j]
                out[t, i] = acc
    return out_arr
