"""Point estimators of the population mean.

Array-level functions implement the closed-form estimators; the dataset-level
wrappers (``mu_bc``, ``mu_wls``, ``mu_srr``) perform the fits they need and
return :class:`EstimateReport` records.  Missing outcomes enter arithmetic
only through ``t * y`` terms, which are evaluated with the missing entries
zero-filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateWeights,
    EstimationError,
    InvalidLambda,
    NoCompleteCases,
    TooFewCompleteCases,
)
from . import kernels
from .models import BasisSpec, Dataset, FittedOutcome, FittedPropensity, fit_outcome

COLLAPSE_TOL = 1e-10

GAMMA_VARIANTS = ("pop", "nr", "opt")
IPW_CONST_VARIANTS = ("nr", "opt")
BC_VARIANTS = ("ols", "pop", "nr", "opt")
GEN_PI_MODES = ("fitted", "one", "infinity", "shrunk")


@dataclass
class EstimateReport:
    """A point estimate plus the hooks the influence module fills in."""

    name: str
    mu: float
    n: int
    gamma: float | None = None
    c: float | None = None
    se: float | None = None
    phi: np.ndarray | None = field(default=None, repr=False)
    warnings: tuple[str, ...] = ()
    fit: object = field(default=None, repr=False, compare=False)


def _as_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("t must be a 0/1 vector")
    return t


def _as_y0(t: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != t.shape:
        raise ValueError("t and y lengths differ")
    obs = t == 1.0
    if not np.all(np.isfinite(y[obs])):
        raise ValueError("y must be finite where t = 1")
    return np.where(obs, y, 0.0)


def _as_pi(t: np.ndarray, pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != t.shape:
        raise ValueError("pi length differs from t")
    if not np.all(np.isfinite(pi)) or np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise ValueError("pi must lie in (0, 1]")
    return pi


def _as_vec(t: np.ndarray, v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != t.shape:
        raise ValueError(f"{name} length differs from t")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def _finite(mu: float, name: str) -> float:
    mu = float(mu)
    if not np.isfinite(mu):
        raise EstimationError(f"{name} produced a non-finite estimate")
    return mu


def mu_reg(m) -> float:
    """Regression estimator: the mean of the fitted outcome values."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("m must be finite")
    return _finite(np.mean(m), "mu_reg")


def mu_imp(t, y, m) -> float:
    """Imputation estimator: observed y where available, m-hat elsewhere."""
    t = _as_t(t)
    y0 = _as_y0(t, y)
    m = _as_vec(t, m, "m")
    return _finite(np.mean(np.where(t == 1.0, y0, m)), "mu_imp")


def mu_ipw_pop(t, y, pi) -> float:
    """Ratio-form IPW: sum(t y / pi) / sum(t / pi)."""
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    if t.sum() == 0:
        raise NoCompleteCases("no observed outcomes")
    num = float(np.sum(t * y0 / pi))
    den = float(np.sum(t / pi))
    return _finite(num / den, "mu_ipw_pop")


def mu_ipw_ht(t, y, pi) -> float:
    """Horvitz-Thompson form: mean(t y / pi)."""
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    return _finite(np.mean(t * y0 / pi), "mu_ipw_ht")


def mu_ipw_const(t, y, pi, variant: str) -> tuple[float, float]:
    """IPW with the constant augmentation h = -c; returns (mu, c-hat).

    The plug-in constants use inverse-weighted complete-case averages:
    c_nr  = sum[t (1-pi) y / pi]   / sum[t (1-pi) / pi]
    c_opt = sum[t (1-pi) y / pi^2] / sum[t (1-pi) / pi^2]
    """
    variant = variant.lower()
    if variant not in IPW_CONST_VARIANTS:
        raise ValueError(f"variant must be one of {IPW_CONST_VARIANTS}")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    if t.sum() == 0:
        raise NoCompleteCases("no observed outcomes")
    w = t * (1.0 - pi) / pi
    if variant == "opt":
        w = w / pi
    den = float(np.sum(w))
    if den <= 0.0:
        raise DegenerateWeights(
            f"ipw_{variant} constant has nonpositive denominator {den!r}"
        )
    c = float(np.sum(w * y0)) / den
    mu = float(np.mean(t * y0 / pi - c * (t - pi) / pi))
    return _finite(mu, f"mu_ipw_{variant}"), c


def gamma(t, y, pi, m, variant: str) -> float:
    """Residual-average gamma of the bias-corrected family.

    Weights: t/pi ("pop"), t (1-pi)/pi ("nr"), t (1-pi)/pi^2 ("opt").
    """
    variant = variant.lower()
    if variant not in GAMMA_VARIANTS:
        raise ValueError(f"variant must be one of {GAMMA_VARIANTS}")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    m = _as_vec(t, m, "m")
    if variant == "pop":
        w = t / pi
    elif variant == "nr":
        w = t * (1.0 - pi) / pi
    else:
        w = t * (1.0 - pi) / pi**2
    den = float(np.sum(w))
    if den <= 0.0:
        raise DegenerateWeights(
            f"gamma_{variant} has nonpositive denominator {den!r}"
        )
    return float(np.sum(w * (y0 - m))) / den


def mu_aipw(t, y, pi, h) -> float:
    """Augmented IPW: mean of t y / pi + (t - pi) / pi * h."""
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    h = _as_vec(t, h, "h")
    return _finite(np.mean(t * y0 / pi + (t - pi) / pi * h), "mu_aipw")


def bc_point(t, y, pi, m, variant: str) -> tuple[float, float]:
    """Bias-corrected estimator as a direct formula; returns (mu, gamma).

    Same algebra as :func:`mu_aipw` with h = -gamma - m, kept as an
    independent code path on purpose.
    """
    variant = variant.lower()
    if variant not in BC_VARIANTS:
        raise ValueError(f"variant must be one of {BC_VARIANTS}")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    m = _as_vec(t, m, "m")
    g = 0.0 if variant == "ols" else gamma(t, y, pi, m, variant)
    h = -g - m
    mu = float(np.mean(t * y0 / pi + (t - pi) / pi * h))
    return _finite(mu, f"mu_bc_{variant}"), g


def mu_bc(d: Dataset, outcome: FittedOutcome, propensity, variant: str) -> EstimateReport:
    """Bias-corrected estimator from fitted working models."""
    pi = propensity.pi if isinstance(propensity, FittedPropensity) else propensity
    pi = _as_pi(_as_t(d.t), pi)
    m = outcome.predict(d, pi if outcome.uses_propensity else None)
    mu, g = bc_point(d.t, d.y, pi, m, variant)
    return EstimateReport(
        name=f"bc_{variant.lower()}", mu=mu, n=d.n, gamma=g, fit=outcome
    )


def _collapsing_estimate(d: Dataset, spec: BasisSpec, pi, mode: str) -> EstimateReport:
    pi = _as_pi(_as_t(d.t), pi)
    fit = fit_outcome(d, spec, mode, pi)
    m = fit.predict(d, pi)
    mu = mu_aipw(d.t, d.y, pi, -m)
    mean_m = float(np.mean(m))
    if abs(mu - mean_m) > COLLAPSE_TOL * (1.0 + abs(mu)):
        raise EstimationError(
            f"mu_{mode}: AIPW form {mu!r} and mean prediction {mean_m!r} "
            "disagree; the weighted-residual identity failed"
        )
    return EstimateReport(name=mode, mu=mu, n=d.n, gamma=0.0, fit=fit)


def mu_wls(d: Dataset, spec: BasisSpec, pi) -> EstimateReport:
    """Weighted-least-squares estimator; collapses to mean(m-hat)."""
    return _collapsing_estimate(d, spec, pi, "wls")


def mu_srr(d: Dataset, spec: BasisSpec, pi) -> EstimateReport:
    """Augmented-regressor estimator; collapses to mean(m-hat)."""
    return _collapsing_estimate(d, spec, pi, "srr")


def mu_pi_cov(t, y, pi, degree: int = 3) -> EstimateReport:
    """Regression of y on a polynomial basis in pi-hat, averaged over all rows."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    cc = t == 1.0
    ncc = int(cc.sum())
    if ncc < degree + 1:
        raise TooFewCompleteCases(
            f"{ncc} complete cases for degree-{degree} basis"
        )
    V = pi[:, None] ** np.arange(degree + 1)
    report = kernels.least_squares(V[cc], y0[cc])
    preds = V @ report.coefficients
    return EstimateReport(
        name="pi_cov", mu=_finite(np.mean(preds), "mu_pi_cov"), n=t.shape[0],
        phi=None, fit=report,
    )


def mu_hybrid(t, y, pi, m, delta: float = 0.05) -> EstimateReport:
    """Outcome-model value where pi-hat < delta, AIPW contribution elsewhere."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    pi = _as_pi(t, pi)
    m = _as_vec(t, m, "m")
    h = -m
    terms = np.where(pi >= delta, t * y0 / pi + (t - pi) / pi * h, m)
    report = EstimateReport(
        name="hybrid", mu=_finite(np.mean(terms), "mu_hybrid"), n=t.shape[0]
    )
    report.phi = terms - report.mu
    return report


def mu_general_pi(t, y, m, mode: str, pi=None, lam=None) -> EstimateReport:
    """Generalized-propensity estimator family.

    ``mode``: "fitted" uses pi-hat (a DR form), "one" substitutes pi = 1
    (the imputation estimator), "infinity" is the symbolic limit mean(m-hat)
    (the regression estimator), and "shrunk" pulls pi-hat toward the overall
    response rate with weight ``lam``.
    """
    mode = mode.lower()
    if mode not in GEN_PI_MODES:
        raise ValueError(f"mode must be one of {GEN_PI_MODES}")
    t = _as_t(t)
    y0 = _as_y0(t, y)
    m = _as_vec(t, m, "m")
    n = t.shape[0]
    name = f"gen_pi_{mode}"

    if mode == "infinity":
        report = EstimateReport(name=name, mu=mu_reg(m), n=n)
        report.phi = m - report.mu
        return report
    if mode == "one":
        p = np.ones(n)
    elif mode == "fitted":
        if pi is None:
            raise ValueError("mode 'fitted' needs pi")
        p = _as_pi(t, pi)
    else:
        if lam is None or not np.isfinite(lam) or not 0.0 <= lam <= 1.0:
            raise InvalidLambda(f"lambda must lie in [0, 1], got {lam!r}")
        if pi is None:
            raise ValueError("mode 'shrunk' needs pi")
        pi = _as_pi(t, pi)
        p = (1.0 - lam) * pi + lam * float(np.mean(t))
    terms = t * y0 / p - (t - p) / p * m
    report = EstimateReport(
        name=name, mu=_finite(np.mean(terms), "mu_general_pi"), n=n
    )
    report.phi = terms - report.mu
    return report
