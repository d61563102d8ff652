"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same update order, same status codes. Used when the
extension is not built or when ``MVARPDC_PURE_PYTHON=1`` is set.
"""
import numpy as np
import scipy.linalg

STATUS_CONVERGED = 0
STATUS_MAX_ITERS = 1
STATUS_NOT_PD = 2
STATUS_NONFINITE = 3


def _unpack(packed, m):
    iu = np.triu_indices(m)
    out = np.zeros((m, m))
    out[iu] = packed
    diag = np.diag(out).copy()
    out = out + out.T
    out[np.diag_indices(m)] = diag
    return out


def sbl_em(phi, outer, y, nu, lam, max_iters, rel_tol, prune_threshold, isotropic):
    n, m = phi.shape
    iu = np.triu_indices(m)
    offdiag = iu[0] != iu[1]
    eye = np.eye(m)
    x = np.zeros(m)
    pruned = np.zeros(m, dtype=bool)
    status = STATUS_MAX_ITERS
    iterations = 0
    rel = np.inf

    if isotropic:
        ptp = outer.sum(axis=0)
        ptp_full = _unpack(ptp, m)
        pty = phi.T @ y
        yty = float(y @ y)
        lam_iso = float(lam[0]) if n else 1.0

    for it in range(max_iters):
        if isotropic:
            g = _unpack(lam_iso * ptp, m)
            rhs = lam_iso * pty
        else:
            g = _unpack(lam @ outer, m)
            rhs = phi.T @ (lam * y)
        g[pruned, :] = 0.0
        g[:, pruned] = 0.0
        g[np.diag_indices(m)] += np.where(pruned, 1.0, nu)
        rhs[pruned] = 0.0
        try:
            chol = scipy.linalg.cho_factor(g, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            status = STATUS_NOT_PD
            break
        if not np.all(np.isfinite(chol[0])):
            status = STATUS_NOT_PD
            break
        xprev = x
        x = scipy.linalg.cho_solve(chol, rhs, check_finite=False)
        ginv = scipy.linalg.cho_solve(chol, eye, check_finite=False)
        iterations = it + 1

        x[pruned] = 0.0
        ginv[pruned, :] = 0.0
        ginv[:, pruned] = 0.0
        if not np.all(np.isfinite(x)):
            status = STATUS_NONFINITE
            break
        dx = float(np.sum((x - xprev) ** 2))
        nx = float(np.sum(x * x))
        if nx > 0.0:
            rel = np.sqrt(dx / nx)
        elif dx == 0.0:
            rel = 0.0
        else:
            rel = np.inf
        if it > 0 and rel < rel_tol:
            status = STATUS_CONVERGED
            break

        active = ~pruned
        nu[active] = 1.0 / (x[active] ** 2 + np.diag(ginv)[active])
        newly = active & (nu > prune_threshold)
        if newly.any():
            pruned |= newly
            x[newly] = 0.0
            ginv[newly, :] = 0.0
            ginv[:, newly] = 0.0

        if isotropic:
            sq = yty - 2.0 * float(x @ pty) + float(x @ ptp_full @ x)
            mean_den = (sq + float(np.sum(ptp_full * ginv))) / n
            if mean_den > 0.0:
                lam_iso = 1.0 / mean_den
        else:
            gp = ginv[iu]
            gp[offdiag] *= 2.0
            resid = y - phi @ x
            dens = resid * resid + outer @ gp
            mean_den = float(np.mean(dens))
            floor = max(1e-12 * mean_den, 1e-300)
            lam[:] = 1.0 / np.maximum(dens, floor)

    if isotropic:
        lam[:] = lam_iso
    return x, pruned, iterations, float(rel), status


def simulate_var(coeffs, innov):
    order, k, _ = coeffs.shape
    n = innov.shape[0]
    out = np.zeros((n, k))
    for t in range(n):
        acc = innov[t].copy()
        for p in range(min(order, t)):
            acc += coeffs[p] @ out[t - p - 1]
        out[t] = acc
    return out
