"""Dense numerical kernel: least squares, binary-regression ML, stable expit.

The heavy loops live in ``_numba_impl`` (default) or ``_numpy_impl``
(fallback); see :mod:`drmean.backend` for how the choice is made.  This
module owns input validation, error mapping, and the result types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..backend import ACTIVE_BACKEND
from ..errors import (
    DimensionMismatch,
    NotConverged,
    OneClassOnly,
    RankDeficient,
    Separated,
)

if ACTIVE_BACKEND == "numba":
    from . import _numba_impl as _impl
else:
    from . import _numpy_impl as _impl

# Defaults: estimator identities are tested down to 1e-10, so nuisance fits
# must converge well below that; the rank tolerance matches the pivot check
# needed to catch ill-conditioned inverse-propensity regressors.
RANK_TOL = 1e-12
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 100
MAX_HALVINGS = 30
DIVERGENCE_BOUND = 1e4
SEPARATION_DEVIANCE = 1e-6


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE_BACKEND


@dataclass(frozen=True)
class DesignMatrix:
    """A dense n-by-p design with column labels.

    Requires n >= p >= 1 and finite entries.
    """

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise DimensionMismatch("design matrix must be two-dimensional")
        n, p = v.shape
        if not (n >= p >= 1):
            raise DimensionMismatch(f"need n >= p >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("design matrix entries must be finite")
        labels = tuple(self.labels)
        if len(labels) != p:
            raise DimensionMismatch(
                f"{len(labels)} labels for {p} columns"
            )
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SolveReport:
    """Result of a kernel solve.

    ``converged`` implies the final gradient norm met the solver tolerance.
    For logistic fits ``deviance_path`` records the deviance at the start
    and after every accepted Newton step.
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    deviance_path: np.ndarray | None = None


def _as_values(X) -> np.ndarray:
    if isinstance(X, DesignMatrix):
        return X.values
    v = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if v.ndim != 2:
        raise DimensionMismatch("design matrix must be two-dimensional")
    return v


def expit(u):
    """Numerically stable 1 / (1 + exp(-u)); no overflow for |u| <= 700."""
    arr = np.asarray(u, dtype=np.float64)
    scalar = arr.ndim == 0
    out = _impl.expit_core(np.ascontiguousarray(arr.reshape(-1)))
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)


def solve_spd(G, b) -> np.ndarray:
    """Solve G x = b for symmetric positive-definite G with the pivot check.

    Raises RankDeficient when a Cholesky pivot falls below RANK_TOL times
    the largest pivot.
    """
    Gv = np.ascontiguousarray(np.asarray(G, dtype=np.float64))
    bv = np.ascontiguousarray(np.asarray(b, dtype=np.float64))
    if Gv.ndim != 2 or Gv.shape[0] != Gv.shape[1]:
        raise DimensionMismatch("G must be square")
    if bv.shape != (Gv.shape[0],):
        raise DimensionMismatch("b length must match G")
    x, status = _impl.spd_solve_core(Gv, bv, RANK_TOL)
    if status == _impl.LS_RANK_DEFICIENT:
        raise RankDeficient("matrix is numerically singular")
    return x


def least_squares(X, y, w=None) -> SolveReport:
    """Minimize sum w_i (y_i - X_i beta)^2 for nonnegative weights w.

    Raises RankDeficient when the weighted cross-product matrix is
    numerically singular (Cholesky pivot below RANK_TOL times the largest
    pivot).
    """
    Xv = _as_values(X)
    yv = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    n, p = Xv.shape
    if yv.shape != (n,):
        raise DimensionMismatch(f"y has shape {yv.shape}, expected ({n},)")
    if not np.all(np.isfinite(yv)):
        raise ValueError("y must be finite")
    if w is None:
        wv = np.ones(n)
    else:
        wv = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
        if wv.shape != (n,):
            raise DimensionMismatch(f"w has shape {wv.shape}, expected ({n},)")
        if not np.all(np.isfinite(wv)) or np.any(wv < 0.0):
            raise ValueError("weights must be finite and nonnegative")

    beta, status = _impl.least_squares_core(Xv, yv, wv, RANK_TOL)
    if status == _impl.LS_RANK_DEFICIENT:
        raise RankDeficient(
            "weighted cross-product matrix is numerically singular"
        )
    resid = yv - Xv @ beta
    grad = Xv.T @ (wv * resid)
    return SolveReport(
        coefficients=beta,
        converged=True,
        iterations=1,
        gradient_norm=float(np.max(np.abs(grad))),
    )


def logistic_newton(
    X,
    t,
    tol: float = NEWTON_TOL,
    maxit: int = NEWTON_MAXIT,
    *,
    start=None,
    max_halvings: int = MAX_HALVINGS,
    divergence_bound: float = DIVERGENCE_BOUND,
) -> SolveReport:
    """Binary-regression maximum likelihood via safeguarded Newton.

    Step-halving keeps the deviance non-increasing across accepted steps.
    Quasi-complete separation is reported as an error (``Separated``): it is
    detected either by the deviance collapsing toward zero or by the
    coefficient sup-norm passing ``divergence_bound`` while the score is
    still above ``tol``.
    """
    Xv = _as_values(X)
    n, p = Xv.shape
    tv = np.ascontiguousarray(np.asarray(t, dtype=np.float64))
    if tv.shape != (n,):
        raise DimensionMismatch(f"t has shape {tv.shape}, expected ({n},)")
    if not np.all((tv == 0.0) | (tv == 1.0)):
        raise ValueError("t must be a 0/1 vector")
    ones = tv.sum()
    if ones == 0 or ones == n:
        raise OneClassOnly("response indicator is constant")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if start is None:
        start_v = np.zeros(p)
    else:
        start_v = np.ascontiguousarray(np.asarray(start, dtype=np.float64))
        if start_v.shape != (p,):
            raise DimensionMismatch(
                f"start has shape {start_v.shape}, expected ({p},)"
            )

    alpha, status, iterations, gnorm, dev_path, ndev = _impl.logistic_core(
        Xv, tv, start_v, tol, maxit, max_halvings, divergence_bound, RANK_TOL,
        SEPARATION_DEVIANCE,
    )
    if status == _impl.LOGIT_SEPARATED:
        raise Separated(
            "quasi-complete separation: fitted probabilities degenerate"
        )
    if status == _impl.LOGIT_SINGULAR:
        raise RankDeficient("Newton Hessian is numerically singular")
    if status in (_impl.LOGIT_MAXIT, _impl.LOGIT_STALLED):
        raise NotConverged(
            f"score sup-norm {gnorm:.3e} > tol {tol:.1e} "
            f"after {iterations} accepted steps"
        )
    return SolveReport(
        coefficients=alpha,
        converged=True,
        iterations=iterations,
        gradient_norm=gnorm,
        deviance_path=dev_path[:ndev].copy(),
    )
