"""Numba-jitted kernel cores.

Same algorithms and status codes as ``_numpy_impl``, written as explicit
loops so the whole Newton iteration compiles to one nopython kernel.
Results match the numpy backend up to summation-order roundoff.
"""

import math

import numpy as np
from numba import njit

LS_OK = 0
LS_RANK_DEFICIENT = 1

LOGIT_CONVERGED = 0
LOGIT_MAXIT = 1
LOGIT_SEPARATED = 2
LOGIT_SINGULAR = 3
LOGIT_STALLED = 4


@njit(cache=True)
def _expit_scalar(u):
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


@njit(cache=True)
def expit_core(u):
    out = np.empty_like(u)
    for i in range(u.shape[0]):
        out[i] = _expit_scalar(u[i])
    return out


@njit(cache=True)
def _softplus(u):
    if u > 0.0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


@njit(cache=True)
def _chol_factor(G, rank_tol, L):
    """In-place lower Cholesky with relative pivot check; returns ok flag."""
    p = G.shape[0]
    for i in range(p):
        for j in range(p):
            L[i, j] = 0.0
    max_pivot = 0.0
    for j in range(p):
        d = G[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d > max_pivot:
            max_pivot = d
        if d <= 0.0 or d <= rank_tol * max_pivot:
            return False
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, p):
            s = G[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def _chol_solve(L, b):
    p = L.shape[0]
    x = b.copy()
    for j in range(p):
        s = x[j]
        for k in range(j):
            s -= L[j, k] * x[k]
        x[j] = s / L[j, j]
    for j in range(p - 1, -1, -1):
        s = x[j]
        for k in range(j + 1, p):
            s -= L[k, j] * x[k]
        x[j] = s / L[j, j]
    return x


@njit(cache=True)
def spd_solve_core(G, b, rank_tol):
    p = G.shape[0]
    L = np.empty((p, p))
    if not _chol_factor(G, rank_tol, L):
        return np.zeros(p), LS_RANK_DEFICIENT
    return _chol_solve(L, b), LS_OK


@njit(cache=True)
def least_squares_core(X, y, w, rank_tol):
    n, p = X.shape
    G = np.zeros((p, p))
    c = np.zeros(p)
    for i in range(n):
        wi = w[i]
        if wi == 0.0:
            continue
        for j in range(p):
            xij = X[i, j]
            c[j] += wi * xij * y[i]
            for k in range(j, p):
                G[j, k] += wi * xij * X[i, k]
    for j in range(p):
        for k in range(j):
            G[j, k] = G[k, j]
    L = np.empty((p, p))
    if not _chol_factor(G, rank_tol, L):
        return np.zeros(p), LS_RANK_DEFICIENT
    return _chol_solve(L, c), LS_OK


@njit(cache=True)
def _logistic_state(X, t, alpha, g):
    """Fills the score g; returns (deviance, sup-norm of g)."""
    n, p = X.shape
    for j in range(p):
        g[j] = 0.0
    dev = 0.0
    for i in range(n):
        eta = 0.0
        for j in range(p):
            eta += X[i, j] * alpha[j]
        pi = _expit_scalar(eta)
        if t[i] == 1.0:
            dev += 2.0 * _softplus(-eta)
        else:
            dev += 2.0 * _softplus(eta)
        r = t[i] - pi
        for j in range(p):
            g[j] += r * X[i, j]
    gnorm = 0.0
    for j in range(p):
        a = abs(g[j])
        if a > gnorm:
            gnorm = a
    return dev, gnorm


@njit(cache=True)
def logistic_core(X, t, start, tol, maxit, max_halvings, divergence_bound, rank_tol, sep_dev_tol):
    n, p = X.shape
    alpha = start.copy()
    g = np.empty(p)
    dev, gnorm = _logistic_state(X, t, alpha, g)

    dev_path = np.zeros(maxit + 1)
    dev_path[0] = dev
    ndev = 1
    iterations = 0
    status = LOGIT_MAXIT

    H = np.empty((p, p))
    L = np.empty((p, p))
    g_t = np.empty(p)

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

        for j in range(p):
            for k in range(p):
                H[j, k] = 0.0
        for i in range(n):
            eta = 0.0
            for j in range(p):
                eta += X[i, j] * alpha[j]
            pi = _expit_scalar(eta)
            wgt = pi * (1.0 - pi)
            for j in range(p):
                wx = wgt * X[i, j]
                for k in range(j, p):
                    H[j, k] += wx * X[i, k]
        for j in range(p):
            for k in range(j):
                H[j, k] = H[k, j]

        if not _chol_factor(H, rank_tol, L):
            if dev < sep_dev_tol:
                status = LOGIT_SEPARATED
            else:
                status = LOGIT_SINGULAR
            break
        step = _chol_solve(L, g)

        lam = 1.0
        accepted = False
        slack = 1e-10 * (1.0 + dev)
        trial = np.empty(p)
        dev_t = 0.0
        gnorm_t = 0.0
        for _ in range(max_halvings + 1):
            for j in range(p):
                trial[j] = alpha[j] + lam * step[j]
            dev_t, gnorm_t = _logistic_state(X, t, trial, g_t)
            if gnorm_t <= tol or dev_t <= dev + slack:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = LOGIT_STALLED
            break

        for j in range(p):
            alpha[j] = trial[j]
            g[j] = g_t[j]
        dev = dev_t
        gnorm = gnorm_t
        dev_path[ndev] = dev
        ndev += 1
        iterations += 1

        amax = 0.0
        for j in range(p):
            a = abs(alpha[j])
            if a > amax:
                amax = a
        if amax > divergence_bound and gnorm > tol:
            status = LOGIT_SEPARATED
            break

    return alpha, status, iterations, gnorm, dev_path, ndev
