"""Working models for the two nuisances: outcome regression and propensity.

Outcome bases are strictly linear in parameters with a mandatory intercept,
so the gradient of the regression function equals the basis itself and the
weighted-residual identities used downstream hold by construction.  The
propensity is fit by logistic maximum likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import kernels
from .errors import (
    MissingColumn,
    MissingPropensity,
    RankDeficient,
    Separated,
    TooFewCompleteCases,
)
from .kernels import DesignMatrix

INV_PROPENSITY = "inv-propensity"
INTERCEPT = "const"

# estimating-equation residuals, normalized by 1 + max |y|
EE_TOL = 1e-8


@dataclass(frozen=True)
class Truth:
    """Generator-side truth attached to simulated datasets."""

    pi: np.ndarray
    m: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Observed data: response indicator t, outcome y where t = 1, covariates.

    ``y`` must be NaN exactly where t = 0.  ``columns`` maps covariate names
    to finite float vectors; simulated data carries both the latent group
    (``z*``) and the transformed group (``x*``).
    """

    t: np.ndarray
    y: np.ndarray
    columns: Mapping[str, np.ndarray]
    truth: Truth | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t)
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("t must be a 0/1 vector")
        t = t.astype(np.int8)
        n = t.shape[0]
        if n < 2:
            raise ValueError("need at least two observations")
        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (n,):
            raise ValueError(f"y has shape {y.shape}, expected ({n},)")
        missing = np.isnan(y)
        if np.any(missing != (t == 0)):
            raise ValueError("y must be present exactly where t = 1")
        cols = {}
        for name, v in dict(self.columns).items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (n,):
                raise ValueError(f"column {name!r} has shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"column {name!r} has non-finite entries")
            cols[name] = v
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def complete(self) -> np.ndarray:
        return self.t == 1

    def y_filled(self, fill: float = 0.0) -> np.ndarray:
        """y with missing entries replaced, safe for arithmetic."""
        return np.where(self.complete, self.y, fill)


@dataclass(frozen=True)
class BasisSpec:
    """Named, ordered columns of a linear-in-parameters basis.

    ``inv_propensity`` appends the synthetic 1/pi-hat regressor used by the
    augmented outcome fit.
    """

    columns: tuple[str, ...]
    intercept: bool = True
    inv_propensity: bool = False

    def __post_init__(self):
        cols = tuple(self.columns)
        if len(set(cols)) != len(cols):
            raise ValueError("duplicate basis columns")
        object.__setattr__(self, "columns", cols)

    @property
    def labels(self) -> tuple[str, ...]:
        out = (INTERCEPT,) if self.intercept else ()
        out = out + self.columns
        if self.inv_propensity:
            out = out + (INV_PROPENSITY,)
        return out


def build_design(d: Dataset, spec: BasisSpec, pi=None) -> DesignMatrix:
    """Materialize the basis: intercept first, named columns, then 1/pi-hat."""
    parts = []
    if spec.intercept:
        parts.append(np.ones(d.n))
    for name in spec.columns:
        if name not in d.columns:
            raise MissingColumn(f"dataset has no column {name!r}")
        parts.append(d.columns[name])
    if spec.inv_propensity:
        if pi is None:
            raise MissingPropensity(
                "basis includes the inverse-propensity regressor but no "
                "propensities were supplied"
            )
        pi = np.asarray(pi, dtype=np.float64)
        parts.append(1.0 / pi)
    if not parts:
        raise ValueError("empty basis")
    return DesignMatrix(np.column_stack(parts), spec.labels)


def _check_pi(pi, n: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (n,):
        raise ValueError(f"pi has shape {pi.shape}, expected ({n},)")
    if not np.all(np.isfinite(pi)) or np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise ValueError("pi must lie in (0, 1]")
    return pi


@dataclass(frozen=True)
class FittedOutcome:
    """A fitted outcome regression m(x) = b(x)' beta.

    ``mode`` selects the estimating-equation weighting A(x): the basis itself
    for OLS, basis / pi-hat for WLS, and the 1/pi-hat-augmented basis for the
    SRR fit (where the augmentation is itself a regressor).
    """

    spec: BasisSpec
    mode: str
    beta: np.ndarray
    ee_residual: float

    @property
    def uses_propensity(self) -> bool:
        return self.mode in ("wls", "srr")

    def _design(self, d: Dataset, pi=None) -> DesignMatrix:
        eff = self.spec
        if self.mode == "srr" and not eff.inv_propensity:
            eff = replace(eff, inv_propensity=True)
        if eff.inv_propensity and pi is None:
            raise MissingPropensity("SRR predictions need the propensities")
        return build_design(d, eff, pi)

    def predict(self, d: Dataset, pi=None) -> np.ndarray:
        """m-hat for every row; SRR rows use their own 1/pi-hat value."""
        return self._design(d, pi).values @ self.beta

    def m_beta(self, d: Dataset, pi=None) -> np.ndarray:
        """Gradient of m(x, beta) in beta: the (augmented) basis rows."""
        return self._design(d, pi).values

    def a_matrix(self, d: Dataset, pi=None) -> np.ndarray:
        """Rows A(x_i) of the estimating-equation weight function."""
        base = self._design(d, pi).values
        if self.mode == "wls":
            if pi is None:
                raise MissingPropensity("WLS weighting needs the propensities")
            pi = _check_pi(pi, d.n)
            return base / pi[:, None]
        return base


def fit_outcome(d: Dataset, spec: BasisSpec, mode: str = "ols", pi=None) -> FittedOutcome:
    """Fit the outcome regression on complete cases.

    ``mode``: "ols" (unweighted), "wls" (weights 1/pi-hat), or "srr"
    (unweighted with 1/pi-hat appended as a regressor).
    """
    mode = mode.lower()
    if mode not in ("ols", "wls", "srr"):
        raise ValueError(f"unknown outcome mode {mode!r}")
    if not spec.intercept:
        raise ValueError("outcome bases require an intercept")
    eff = spec
    if mode == "srr":
        eff = replace(spec, inv_propensity=True)
    if mode in ("wls", "srr"):
        if pi is None:
            raise MissingPropensity(f"{mode} outcome fit needs propensities")
        pi = _check_pi(pi, d.n)

    design = build_design(d, eff, pi)
    cc = d.complete
    ncc = int(cc.sum())
    if ncc < design.p:
        raise TooFewCompleteCases(
            f"{ncc} complete cases for {design.p} coefficients"
        )
    X_cc = design.values[cc]
    y_cc = d.y[cc]
    w = 1.0 / pi[cc] if mode == "wls" else None
    try:
        report = kernels.least_squares(X_cc, y_cc, w)
    except RankDeficient as e:
        if mode == "srr":
            raise RankDeficient(
                "SRR design is numerically singular; the 1/pi-hat regressor "
                "is unstable or collinear (e.g. constant propensities)"
            ) from e
        raise
    beta = report.coefficients

    fitted = FittedOutcome(spec=spec, mode=mode, beta=beta, ee_residual=0.0)
    m_cc = X_cc @ beta
    a_cc = fitted.a_matrix(d, pi)[cc]
    resid = float(np.max(np.abs(a_cc.T @ (y_cc - m_cc))))
    scale = 1.0 + float(np.max(np.abs(y_cc)))
    if resid > EE_TOL * scale:
        raise RankDeficient(
            f"estimating-equation residual {resid:.3e} exceeds tolerance; "
            "the fit is numerically unreliable"
        )
    return replace(fitted, ee_residual=resid)


@dataclass(frozen=True)
class FittedPropensity:
    """A logistic-ML propensity fit with optional post-fit flooring."""

    spec: BasisSpec
    alpha: np.ndarray
    pi: np.ndarray
    pi_raw: np.ndarray
    floor: float | None
    score_residual: float

    def design(self, d: Dataset) -> DesignMatrix:
        return build_design(d, self.spec)

    def c_matrix(self, d: Dataset) -> np.ndarray:
        """Rows B(x_i) = c(x_i) of the ML score basis."""
        return self.design(d).values

    def pi_alpha(self, d: Dataset) -> np.ndarray:
        """Rows of the propensity gradient pi (1 - pi) c(x), at raw pi-hat."""
        c = self.c_matrix(d)
        return c * (self.pi_raw * (1.0 - self.pi_raw))[:, None]


def fit_propensity(d: Dataset, spec: BasisSpec, floor: float | None = None) -> FittedPropensity:
    """Fit P(t = 1 | x) by logistic maximum likelihood.

    Flooring (when requested) is applied to the fitted values afterward,
    never inside the likelihood.
    """
    if spec.inv_propensity:
        raise ValueError("propensity bases cannot include 1/pi-hat")
    if floor is not None and not (0.0 < floor < 0.5):
        raise ValueError("floor must lie in (0, 0.5)")
    design = build_design(d, spec)
    report = kernels.logistic_newton(design, d.t.astype(np.float64))
    alpha = report.coefficients
    pi_raw = kernels.expit(design.values @ alpha)
    if np.any(pi_raw <= 0.0) or np.any(pi_raw >= 1.0):
        # only reachable when |x'alpha| saturates float expit, i.e. the fit
        # is effectively separated even though the solver met its tolerance
        raise Separated("fitted probabilities saturated at 0 or 1")
    pi = np.maximum(pi_raw, floor) if floor is not None else pi_raw
    return FittedPropensity(
        spec=spec,
        alpha=alpha,
        pi=pi,
        pi_raw=pi_raw,
        floor=floor,
        score_residual=report.gradient_norm,
    )


def predict_outcome(fit: FittedOutcome, d: Dataset, pi=None) -> np.ndarray:
    return fit.predict(d, pi)
