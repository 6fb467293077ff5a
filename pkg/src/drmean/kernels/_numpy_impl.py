"""Vectorized pure-numpy kernel cores.

Mirrors ``_numba_impl``: same algorithms, same status codes.  Cross products
are assembled with numpy matrix products; only the tiny p-by-p Cholesky runs
as Python loops.
"""

import numpy as np

# least_squares_core statuses
LS_OK = 0
LS_RANK_DEFICIENT = 1

# logistic_core statuses
LOGIT_CONVERGED = 0
LOGIT_MAXIT = 1
LOGIT_SEPARATED = 2
LOGIT_SINGULAR = 3
LOGIT_STALLED = 4


def expit_core(u):
    out = np.empty_like(u)
    pos = u >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _chol_factor(G, rank_tol):
    """Lower Cholesky factor with a relative pivot check.

    Returns (L, ok).  ok is False as soon as a pivot drops to or below
    rank_tol times the largest pivot seen (or below zero), which flags a
    numerically singular cross-product matrix.
    """
    p = G.shape[0]
    L = np.zeros((p, p))
    max_pivot = 0.0
    for j in range(p):
        d = G[j, j] - L[j, :j] @ L[j, :j]
        if d > max_pivot:
            max_pivot = d
        if d <= 0.0 or d <= rank_tol * max_pivot:
            return L, False
        L[j, j] = np.sqrt(d)
        if j + 1 < p:
            L[j + 1 :, j] = (G[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L, True


def _chol_solve(L, b):
    p = L.shape[0]
    x = b.astype(np.float64).copy()
    for j in range(p):
        x[j] = (x[j] - L[j, :j] @ x[:j]) / L[j, j]
    for j in range(p - 1, -1, -1):
        x[j] = (x[j] - L[j + 1 :, j] @ x[j + 1 :]) / L[j, j]
    return x


def spd_solve_core(G, b, rank_tol):
    L, ok = _chol_factor(G, rank_tol)
    if not ok:
        return np.zeros(G.shape[0]), LS_RANK_DEFICIENT
    return _chol_solve(L, b), LS_OK


def least_squares_core(X, y, w, rank_tol):
    Xw = X * w[:, None]
    G = Xw.T @ X
    c = Xw.T @ y
    L, ok = _chol_factor(G, rank_tol)
    if not ok:
        return np.zeros(X.shape[1]), LS_RANK_DEFICIENT
    return _chol_solve(L, c), LS_OK


def _deviance(eta, sign):
    # 2 * sum softplus(-sign * eta), computed without overflow
    return 2.0 * float(np.logaddexp(0.0, -sign * eta).sum())


def logistic_core(X, t, start, tol, maxit, max_halvings, divergence_bound, rank_tol, sep_dev_tol):
    n, p = X.shape
    sign = 2.0 * t - 1.0
    alpha = start.copy()

    eta = X @ alpha
    pi = expit_core(eta)
    dev = _deviance(eta, sign)
    g = X.T @ (t - pi)
    gnorm = float(np.max(np.abs(g)))

    dev_path = np.zeros(maxit + 1)
    dev_path[0] = dev
    ndev = 1
    iterations = 0
    status = LOGIT_MAXIT

    for it in range(maxit + 1):
        if dev < sep_dev_tol:
            status = LOGIT_SEPARATED
            break
        if gnorm <= tol:
            status = LOGIT_CONVERGED
            break
        if it == maxit:
            status = LOGIT_MAXIT
            break

        wgt = pi * (1.0 - pi)
        H = (X * wgt[:, None]).T @ X
        L, ok = _chol_factor(H, rank_tol)
        if not ok:
            status = LOGIT_SEPARATED if dev < sep_dev_tol else LOGIT_SINGULAR
            break
        step = _chol_solve(L, g)

        # step-halving keeps the deviance non-increasing (up to float noise);
        # a trial point that already meets the score tolerance is accepted as is
        lam = 1.0
        accepted = False
        slack = 1e-10 * (1.0 + dev)
        for _ in range(max_halvings + 1):
            trial = alpha + lam * step
            eta_t = X @ trial
            pi_t = expit_core(eta_t)
            dev_t = _deviance(eta_t, sign)
            g_t = X.T @ (t - pi_t)
            gnorm_t = float(np.max(np.abs(g_t)))
            if gnorm_t <= tol or dev_t <= dev + slack:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = LOGIT_STALLED
            break

        alpha = trial
        eta = eta_t
        pi = pi_t
        dev = dev_t
        g = g_t
        gnorm = gnorm_t
        dev_path[ndev] = dev
        ndev += 1
        iterations += 1

        if np.max(np.abs(alpha)) > divergence_bound and gnorm > tol:
            status = LOGIT_SEPARATED
            break

    return alpha, status, iterations, gnorm, dev_path, ndev
