"""Influence-function evaluation, sandwich SEs, and identity diagnostics.

Three families are implemented, matching the three model regimes:

* outcome-model influences  phi = m - mu + t a(x) (y - m), with an optional
  correction of a(x) for the estimated regression coefficients;
* propensity-model influences  phi = t y / pi + (t - pi) / pi h(x) - mu,
  with an optional correction of h(x) for the ML-estimated propensity
  coefficients;
* the both-models form with caller-supplied a(x) and h(x) and no correction.

Population expectations inside the corrections are replaced by empirical
analogs chosen so each stays valid in the model regime where the influence
family is claimed; see the docstrings below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    InsufficientReplicates,
    RankDeficient,
    SingularCorrection,
)
from .estimators import bc_point, gamma, mu_aipw
from .models import Dataset, FittedOutcome, FittedPropensity


@dataclass(frozen=True)
class InfluenceSpecI:
    """Outcome-model influence choice.

    Either ``a_tilde`` gives the per-observation values of the augmentation
    function directly, or the parametric form psi1 / pi-hat + psi2 is built
    from ``pi``.  ``expectation_mode`` selects the empirical analog used for
    E[(pi0 a - 1) m_beta']:

    * ``direct``: n^-1 sum (t_i a_i - 1) m_beta_i -- valid under MAR with no
      propensity model at all;
    * ``plugin``: n^-1 sum t_i (a_i - 1/pi_i) m_beta_i -- the rewrite through
      E[pi0 g] that vanishes termwise when a = 1/pi-hat (needs ``pi``).
    """

    a_tilde: np.ndarray | None = None
    psi1: float = 0.0
    psi2: float = 0.0
    pi: np.ndarray | None = None
    correct_for_fit: bool = True
    expectation_mode: str = "direct"


@dataclass(frozen=True)
class InfluenceSpecII:
    """Propensity-model influence choice: the augmentation values h-tilde."""

    h_tilde: np.ndarray
    correct_for_fit: bool = True


@dataclass(frozen=True)
class InfluenceReport:
    """Per-observation influence values and the summaries built from them."""

    phi: np.ndarray

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def mean(self) -> float:
        return float(np.mean(self.phi))

    @property
    def sigma2(self) -> float:
        return float(np.mean(self.phi**2))

    @property
    def se(self) -> float:
        return float(np.sqrt(np.sum(self.phi**2)) / self.n)


def sandwich_se(report) -> float:
    """sqrt(sum phi^2) / n from a report or a raw phi vector."""
    phi = report.phi if isinstance(report, InfluenceReport) else np.asarray(report, float)
    return float(np.sqrt(np.sum(phi**2)) / phi.shape[0])


def _t_y0(d: Dataset):
    t = d.t.astype(np.float64)
    return t, d.y_filled()


def if_model1(
    d: Dataset,
    m,
    mu: float,
    spec: InfluenceSpecI,
    fit: FittedOutcome | None = None,
    *,
    a_matrix=None,
    m_beta=None,
) -> InfluenceReport:
    """Outcome-model influence with the estimated-coefficient correction.

    The corrected augmentation is
    a(x) = a~(x) - E[(pi0 a~ - 1) m_beta'] [E(pi0 A m_beta')]^-1 A(x),
    with E[pi0 A m_beta'] estimated by n^-1 sum t_i A_i m_beta_i' and the
    leading expectation per ``spec.expectation_mode``.  ``a_matrix`` and
    ``m_beta`` override the fitted model's matrices (used for bases built on
    derived covariates such as polynomial-in-pi fits).
    """
    t, y0 = _t_y0(d)
    m = np.asarray(m, dtype=np.float64)
    n = d.n

    if spec.a_tilde is not None:
        a = np.asarray(spec.a_tilde, dtype=np.float64).copy()
    else:
        if spec.psi1 != 0.0 and spec.pi is None:
            raise ValueError("parametric a-tilde with psi1 != 0 needs pi")
        a = np.full(n, spec.psi2)
        if spec.psi1 != 0.0:
            a = spec.psi1 / np.asarray(spec.pi, dtype=np.float64) + spec.psi2

    if spec.correct_for_fit:
        if a_matrix is None or m_beta is None:
            if fit is None:
                raise ValueError("correction needs a fitted outcome model")
            a_matrix = fit.a_matrix(d, spec.pi if fit.uses_propensity else None)
            m_beta = fit.m_beta(d, spec.pi if fit.uses_propensity else None)
        A = np.asarray(a_matrix, dtype=np.float64)
        Mb = np.asarray(m_beta, dtype=np.float64)
        M = (A * t[:, None]).T @ Mb / n
        if spec.expectation_mode == "plugin":
            if spec.pi is None:
                raise ValueError("expectation_mode 'plugin' needs pi")
            pi = np.asarray(spec.pi, dtype=np.float64)
            k = ((t * (a - 1.0 / pi))[:, None] * Mb).sum(axis=0) / n
        elif spec.expectation_mode == "direct":
            k = ((t * a - 1.0)[:, None] * Mb).sum(axis=0) / n
        else:
            raise ValueError(
                f"unknown expectation_mode {spec.expectation_mode!r}"
            )
        try:
            z = kernels.solve_spd(M.T, k)
        except RankDeficient as e:
            raise SingularCorrection(
                "outcome-model correction matrix is singular"
            ) from e
        a = a - A @ z

    phi = m - mu + t * a * (y0 - m)
    return InfluenceReport(phi=phi)


def if_model2(
    d: Dataset,
    pi,
    mu: float,
    spec: InfluenceSpecII,
    fit: FittedPropensity | None = None,
) -> InfluenceReport:
    """Propensity-model influence with the estimated-alpha correction.

    The corrected augmentation is
    h(x) = h~(x) - E[pi_alpha' (m0 + h~)/pi0] [E(B pi_alpha')]^-1 B(x) pi0(x).
    The leading expectation is estimated with the t-based analog applied to
    the whole bracket,  n^-1 sum t_i (y_i + h~_i) pi_alpha_i / pi_i^2,  which
    is unbiased whenever the propensity model is correct (E[t g(x) y] =
    E[pi0 g m0] under MAR) and keeps the summands on the scale of residuals
    rather than of raw y.
    """
    t, y0 = _t_y0(d)
    pi = np.asarray(pi, dtype=np.float64)
    h = np.asarray(spec.h_tilde, dtype=np.float64).copy()
    n = d.n

    if spec.correct_for_fit:
        if fit is None:
            raise ValueError("correction needs a fitted propensity model")
        c = fit.c_matrix(d)
        pa = fit.pi_alpha(d)
        coef = t * (y0 + h) / pi**2
        Dvec = (pa * coef[:, None]).sum(axis=0) / n
        M = (c * (fit.pi_raw * (1.0 - fit.pi_raw))[:, None]).T @ c / n
        try:
            z = kernels.solve_spd(M, Dvec)
        except RankDeficient as e:
            raise SingularCorrection(
                "propensity-model correction matrix is singular"
            ) from e
        h = h - (c @ z) * pi

    phi = t * y0 / pi + (t - pi) / pi * h - mu
    return InfluenceReport(phi=phi)


def if_model3(d: Dataset, m, pi, mu: float, a, h) -> InfluenceReport:
    """Both-models influence with caller-chosen a(x) and h(x), no correction."""
    t, y0 = _t_y0(d)
    m = np.asarray(m, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    phi = m - mu + t * a * (y0 - m) + (t - pi) / pi * h
    return InfluenceReport(phi=phi)


# ---------------------------------------------------------------------------
# identity diagnostics

WEIGHTED_RESIDUAL_TOL = 1e-8
COLLAPSE_TOL = 1e-10
POINTWISE_TOL = 1e-12
AIPW_FORM_TOL = 1e-12


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    context: str
    value: float
    tolerance: float
    status: str  # PASS | FAIL | NOT_APPLICABLE

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple[IdentityCheck, ...]

    @property
    def passed(self) -> bool:
        return not any(c.failed for c in self.checks)


def _gate(name, context, value, tol) -> IdentityCheck:
    status = "PASS" if value <= tol else "FAIL"
    return IdentityCheck(name, context, float(value), tol, status)


def check_identities(
    d: Dataset,
    outcome_fits: dict[str, FittedOutcome] | None = None,
    propensity: FittedPropensity | None = None,
    pi=None,
    m=None,
) -> IdentityReport:
    """Evaluate the algebraic identities tying the estimator family together.

    ``outcome_fits`` maps mode names to fitted outcome models; ``m`` supplies
    externally computed predictions instead (checked as if they claimed the
    weighted-residual property).  The weighted-residual identity is specific
    to the WLS/SRR fits and is reported as not applicable for OLS.
    """
    t, y0 = _t_y0(d)
    if pi is None:
        if propensity is None:
            raise ValueError("need a propensity fit or pi values")
        pi = propensity.pi
    pi = np.asarray(pi, dtype=np.float64)

    sources: list[tuple[str, str, np.ndarray]] = []
    if outcome_fits:
        for mode, fit in outcome_fits.items():
            pred = fit.predict(d, pi if fit.uses_propensity else None)
            sources.append((mode, f"{mode} fit", pred))
    if m is not None:
        sources.append(("supplied", "supplied m", np.asarray(m, float)))
    if not sources:
        raise ValueError("need outcome fits or supplied m")

    checks: list[IdentityCheck] = []
    wr_scale = 1.0 + float(np.sum(t * np.abs(y0) / pi))
    for mode, ctx, pred in sources:
        wr = abs(float(np.sum(t * (y0 - pred) / pi))) / wr_scale
        if mode == "ols":
            checks.append(
                IdentityCheck("weighted-residual", ctx, wr,
                              WEIGHTED_RESIDUAL_TOL, "NOT_APPLICABLE")
            )
            continue
        checks.append(_gate("weighted-residual", ctx, wr, WEIGHTED_RESIDUAL_TOL))
        mu_a = mu_aipw(d.t, d.y, pi, -pred)
        collapse = abs(mu_a - float(np.mean(pred))) / (1.0 + abs(mu_a))
        checks.append(_gate("aipw-collapse", ctx, collapse, COLLAPSE_TOL))
        g = gamma(d.t, d.y, pi, pred, "pop")
        checks.append(_gate("gamma-zero", ctx, abs(g), WEIGHTED_RESIDUAL_TOL))

    # reference predictions for the pointwise and AIPW-form identities
    ref_mode, ref_ctx, ref = next(
        ((mo, cx, pr) for mo, cx, pr in sources if mo == "ols"), sources[0]
    )
    mu_ref = mu_aipw(d.t, d.y, pi, -ref)
    lhs = ref - mu_ref + t * (y0 - ref) / pi
    rhs = t * y0 / pi - (t - pi) / pi * ref - mu_ref
    row_scale = 1.0 + np.abs(t * y0 / pi) + np.abs(ref) / pi
    pointwise = float(np.max(np.abs(lhs - rhs) / row_scale))
    checks.append(_gate("pointwise-dr", ref_ctx, pointwise, POINTWISE_TOL))

    for variant in ("ols", "pop", "nr", "opt"):
        mu_b, g = bc_point(d.t, d.y, pi, ref, variant)
        mu_a = mu_aipw(d.t, d.y, pi, -g - ref)
        val = abs(mu_b - mu_a) / (1.0 + abs(mu_b))
        checks.append(_gate("aipw-form", f"bc_{variant} on {ref_ctx}", val,
                            AIPW_FORM_TOL))

    return IdentityReport(checks=tuple(checks))


@dataclass(frozen=True)
class LinearityReport:
    correlation: float
    slope: float
    max_remainder: float
    replicates: int


def linearity_diagnostic(
    estimates, phi_means, mu0: float, n: int, min_replicates: int = 50
) -> LinearityReport:
    """Regress sqrt(n) (mu-hat - mu0) on the replicate mean influence at truth.

    An asymptotically linear estimator shows correlation near one and slope
    near one; ``max_remainder`` is the largest sqrt(n)-scaled residual.
    """
    est = np.asarray(estimates, dtype=np.float64)
    pm = np.asarray(phi_means, dtype=np.float64)
    if est.shape != pm.shape or est.ndim != 1:
        raise ValueError("estimates and phi_means must be equal-length vectors")
    R = est.shape[0]
    if R < min_replicates:
        raise InsufficientReplicates(
            f"{R} replicates, need at least {min_replicates}"
        )
    lhs = np.sqrt(n) * (est - mu0)
    rhs = np.sqrt(n) * pm
    lc = lhs - lhs.mean()
    rc = rhs - rhs.mean()
    var_r = float(rc @ rc)
    if var_r == 0.0:
        raise ValueError("influence means are constant; diagnostic undefined")
    slope = float(lc @ rc) / var_r
    denom = float(np.sqrt((lc @ lc) * var_r))
    corr = float(lc @ rc) / denom if denom > 0 else 1.0
    return LinearityReport(
        correlation=corr,
        slope=slope,
        max_remainder=float(np.max(np.abs(lhs - rhs))),
        replicates=R,
    )
