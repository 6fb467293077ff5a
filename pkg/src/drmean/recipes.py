"""Estimator registry: wiring datasets, nuisance fits, estimates, and SEs.

Each named estimator knows which fits it needs; the :class:`EvalContext`
memoizes fits (and fit failures) within one dataset so that a failed
nuisance fit counts as a failure for every dependent estimator without
refitting.  Influence corrections for estimated nuisances are applied
whenever the nuisance was fitted here; supplied (external) nuisance values
are treated as known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError
from .estimators import (
    EstimateReport,
    bc_point,
    mu_aipw,
    mu_general_pi,
    mu_hybrid,
    mu_imp,
    mu_ipw_const,
    mu_ipw_ht,
    mu_ipw_pop,
    mu_pi_cov,
    mu_reg,
)
from .influence import (
    InfluenceSpecI,
    InfluenceSpecII,
    if_model1,
    if_model2,
    sandwich_se,
)
from .models import BasisSpec, Dataset, fit_outcome, fit_propensity

CORE_ESTIMATORS = (
    "reg", "imp", "ipw_ht", "ipw_pop", "ipw_nr", "ipw_opt",
    "bc_ols", "bc_pop", "bc_nr", "bc_opt", "wls", "srr",
)
EXTRA_ESTIMATORS = ("pi_cov", "hybrid", "gen_pi")
ALL_ESTIMATORS = CORE_ESTIMATORS + EXTRA_ESTIMATORS

DR_ESTIMATORS = ("bc_ols", "bc_pop", "bc_nr", "bc_opt", "wls", "srr")


@dataclass(frozen=True)
class EstimatorOptions:
    hybrid_delta: float = 0.05
    gen_pi_mode: str = "fitted"
    gen_pi_lambda: float | None = None
    pi_cov_degree: int = 3
    small_pi_threshold: float = 0.02
    propensity_floor: float | None = None


class EvalContext:
    """Per-dataset evaluation state with memoized fits and fit failures."""

    def __init__(
        self,
        d: Dataset,
        outcome_spec: BasisSpec | None = None,
        propensity_spec: BasisSpec | None = None,
        options: EstimatorOptions | None = None,
        supplied_pi=None,
        supplied_m=None,
    ):
        self.d = d
        self.outcome_spec = outcome_spec
        self.propensity_spec = propensity_spec
        self.options = options or EstimatorOptions()
        self.supplied_pi = (
            None if supplied_pi is None else np.asarray(supplied_pi, float)
        )
        self.supplied_m = (
            None if supplied_m is None else np.asarray(supplied_m, float)
        )
        self._memo: dict[str, object] = {}

    def _cached(self, key, thunk):
        if key not in self._memo:
            try:
                self._memo[key] = ("ok", thunk())
            except EstimationError as e:
                self._memo[key] = ("err", e)
        kind, value = self._memo[key]
        if kind == "err":
            raise value
        return value

    @property
    def fits_propensity(self) -> bool:
        return self.supplied_pi is None

    def propensity_fit(self):
        if not self.fits_propensity:
            raise EstimationError("propensities were supplied, not fitted")
        if self.propensity_spec is None:
            raise EstimationError("no propensity model configured")
        return self._cached(
            "prop",
            lambda: fit_propensity(
                self.d, self.propensity_spec, self.options.propensity_floor
            ),
        )

    def pi(self) -> np.ndarray:
        if self.supplied_pi is not None:
            return self.supplied_pi
        return self.propensity_fit().pi

    def fits_outcome(self, mode: str) -> bool:
        if mode == "ols" and self.supplied_m is not None:
            return False
        return True

    def outcome_fit(self, mode: str):
        if not self.fits_outcome(mode):
            raise EstimationError("outcome predictions were supplied, not fitted")
        if self.outcome_spec is None:
            raise EstimationError("no outcome model configured")
        if mode in ("wls", "srr"):
            pi = self.pi()
            return self._cached(
                f"out:{mode}",
                lambda: fit_outcome(self.d, self.outcome_spec, mode, pi),
            )
        return self._cached(
            "out:ols", lambda: fit_outcome(self.d, self.outcome_spec, "ols")
        )

    def m(self, mode: str = "ols") -> np.ndarray:
        if mode == "ols" and self.supplied_m is not None:
            return self.supplied_m
        fit = self.outcome_fit(mode)
        pi = self.pi() if fit.uses_propensity else None
        return fit.predict(self.d, pi)


def _pi_warnings(ctx: EvalContext) -> tuple[str, ...]:
    thr = ctx.options.small_pi_threshold
    k = int(np.sum(ctx.pi() < thr))
    if k:
        return (f"{k} pi-hat below {thr:g}",)
    return ()


def _se_outcome_model(ctx, report, a_tilde, mode="ols"):
    """Sandwich SE from the outcome-model influence family."""
    m = ctx.m(mode)
    fit = ctx.outcome_fit(mode) if ctx.fits_outcome(mode) else None
    spec = InfluenceSpecI(
        a_tilde=a_tilde,
        correct_for_fit=fit is not None,
        expectation_mode="direct",
    )
    rep = if_model1(ctx.d, m, report.mu, spec, fit)
    report.phi = rep.phi
    report.se = rep.se
    return report


def _se_propensity_model(ctx, report, h_tilde):
    """Sandwich SE from the propensity-model influence family."""
    fit = ctx.propensity_fit() if ctx.fits_propensity else None
    spec = InfluenceSpecII(h_tilde=h_tilde, correct_for_fit=fit is not None)
    rep = if_model2(ctx.d, ctx.pi(), report.mu, spec, fit)
    report.phi = rep.phi
    report.se = rep.se
    report.warnings = report.warnings + _pi_warnings(ctx)
    return report


def _recipe_reg(ctx: EvalContext) -> EstimateReport:
    m = ctx.m("ols")
    report = EstimateReport(name="reg", mu=mu_reg(m), n=ctx.d.n)
    return _se_outcome_model(ctx, report, np.zeros(ctx.d.n))


def _recipe_imp(ctx: EvalContext) -> EstimateReport:
    m = ctx.m("ols")
    report = EstimateReport(name="imp", mu=mu_imp(ctx.d.t, ctx.d.y, m), n=ctx.d.n)
    return _se_outcome_model(ctx, report, np.ones(ctx.d.n))


def _recipe_ipw_ht(ctx: EvalContext) -> EstimateReport:
    pi = ctx.pi()
    report = EstimateReport(
        name="ipw_ht", mu=mu_ipw_ht(ctx.d.t, ctx.d.y, pi), n=ctx.d.n
    )
    return _se_propensity_model(ctx, report, np.zeros(ctx.d.n))


def _recipe_ipw_pop(ctx: EvalContext) -> EstimateReport:
    pi = ctx.pi()
    mu = mu_ipw_pop(ctx.d.t, ctx.d.y, pi)
    report = EstimateReport(name="ipw_pop", mu=mu, n=ctx.d.n)
    return _se_propensity_model(ctx, report, np.full(ctx.d.n, -mu))


def _recipe_ipw_const(ctx: EvalContext, variant: str) -> EstimateReport:
    pi = ctx.pi()
    mu, c = mu_ipw_const(ctx.d.t, ctx.d.y, pi, variant)
    report = EstimateReport(name=f"ipw_{variant}", mu=mu, n=ctx.d.n, c=c)
    return _se_propensity_model(ctx, report, np.full(ctx.d.n, -c))


def _recipe_bc(ctx: EvalContext, variant: str) -> EstimateReport:
    pi = ctx.pi()
    m = ctx.m("ols")
    mu, g = bc_point(ctx.d.t, ctx.d.y, pi, m, variant)
    report = EstimateReport(name=f"bc_{variant}", mu=mu, n=ctx.d.n, gamma=g)
    return _se_propensity_model(ctx, report, -g - m)


def _recipe_collapsing(ctx: EvalContext, mode: str) -> EstimateReport:
    pi = ctx.pi()
    fit = ctx.outcome_fit(mode)
    m = fit.predict(ctx.d, pi)
    mu = mu_aipw(ctx.d.t, ctx.d.y, pi, -m)
    mean_m = float(np.mean(m))
    if abs(mu - mean_m) > 1e-10 * (1.0 + abs(mu)):
        raise EstimationError(
            f"{mode}: AIPW form and mean prediction disagree"
        )
    report = EstimateReport(name=mode, mu=mu, n=ctx.d.n, gamma=0.0, fit=fit)
    return _se_propensity_model(ctx, report, -m)


def _recipe_pi_cov(ctx: EvalContext) -> EstimateReport:
    pi = ctx.pi()
    degree = ctx.options.pi_cov_degree
    report = mu_pi_cov(ctx.d.t, ctx.d.y, pi, degree)
    V = pi[:, None] ** np.arange(degree + 1)
    preds = V @ report.fit.coefficients
    spec = InfluenceSpecI(a_tilde=np.zeros(ctx.d.n), expectation_mode="direct")
    rep = if_model1(ctx.d, preds, report.mu, spec, a_matrix=V, m_beta=V)
    report.phi = rep.phi
    report.se = rep.se
    report.warnings = report.warnings + _pi_warnings(ctx)
    return report


def _recipe_hybrid(ctx: EvalContext) -> EstimateReport:
    report = mu_hybrid(
        ctx.d.t, ctx.d.y, ctx.pi(), ctx.m("ols"), ctx.options.hybrid_delta
    )
    report.se = sandwich_se(report.phi)
    report.warnings = report.warnings + _pi_warnings(ctx)
    return report


def _recipe_gen_pi(ctx: EvalContext) -> EstimateReport:
    mode = ctx.options.gen_pi_mode
    pi = ctx.pi() if mode in ("fitted", "shrunk") else None
    report = mu_general_pi(
        ctx.d.t, ctx.d.y, ctx.m("ols"), mode,
        pi=pi, lam=ctx.options.gen_pi_lambda,
    )
    report.se = sandwich_se(report.phi)
    if pi is not None:
        report.warnings = report.warnings + _pi_warnings(ctx)
    return report


_RECIPES = {
    "reg": _recipe_reg,
    "imp": _recipe_imp,
    "ipw_ht": _recipe_ipw_ht,
    "ipw_pop": _recipe_ipw_pop,
    "ipw_nr": lambda ctx: _recipe_ipw_const(ctx, "nr"),
    "ipw_opt": lambda ctx: _recipe_ipw_const(ctx, "opt"),
    "bc_ols": lambda ctx: _recipe_bc(ctx, "ols"),
    "bc_pop": lambda ctx: _recipe_bc(ctx, "pop"),
    "bc_nr": lambda ctx: _recipe_bc(ctx, "nr"),
    "bc_opt": lambda ctx: _recipe_bc(ctx, "opt"),
    "wls": lambda ctx: _recipe_collapsing(ctx, "wls"),
    "srr": lambda ctx: _recipe_collapsing(ctx, "srr"),
    "pi_cov": _recipe_pi_cov,
    "hybrid": _recipe_hybrid,
    "gen_pi": _recipe_gen_pi,
}


def registered_names() -> tuple[str, ...]:
    return ALL_ESTIMATORS


def evaluate(name: str, ctx: EvalContext) -> EstimateReport:
    """Evaluate one registered estimator with its sandwich SE."""
    key = name.strip().lower()
    if key not in _RECIPES:
        raise ValueError(f"unknown estimator {name!r}")
    return _RECIPES[key](ctx)


# ---------------------------------------------------------------------------
# influence at the true nuisances, for the asymptotic-linearity diagnostic


def truth_influence_mean(name: str, d: Dataset, mu0: float) -> float:
    """Replicate mean of the estimator's influence at the true nuisances.

    Uses the simulated truth attached to the dataset (true propensities and
    outcome means) and the latent covariates as the score basis.  Only the
    estimators whose influence function is available in closed form are
    supported.
    """
    if d.truth is None:
        raise ValueError("dataset carries no simulation truth")
    t = d.t.astype(np.float64)
    y0 = d.y_filled()
    pi0 = d.truth.pi
    m0 = d.truth.m
    n = d.n

    if name in DR_ESTIMATORS:
        phi = m0 - mu0 + t * (y0 - m0) / pi0
        return float(np.mean(phi))

    zcols = [v for k, v in d.columns.items() if k.startswith("z")]
    b = np.column_stack([np.ones(n)] + zcols)

    if name in ("reg", "imp"):
        a_tilde = 0.0 if name == "reg" else 1.0
        M = (b * pi0[:, None]).T @ b / n
        k = ((pi0 * a_tilde - 1.0)[:, None] * b).sum(axis=0) / n
        z = np.linalg.solve(M.T, k)
        a = a_tilde - b @ z
        phi = m0 - mu0 + t * a * (y0 - m0)
        return float(np.mean(phi))

    if name in ("ipw_ht", "ipw_pop", "ipw_nr", "ipw_opt"):
        if name == "ipw_ht":
            h_tilde = np.zeros(n)
        elif name == "ipw_pop":
            h_tilde = np.full(n, -mu0)
        elif name == "ipw_nr":
            c = float(np.sum(m0 * (1.0 - pi0)) / np.sum(1.0 - pi0))
            h_tilde = np.full(n, -c)
        else:
            c = float(
                np.sum(m0 * (1.0 - pi0) / pi0) / np.sum((1.0 - pi0) / pi0)
            )
            h_tilde = np.full(n, -c)
        pa = b * (pi0 * (1.0 - pi0))[:, None]
        D = (pa * ((m0 + h_tilde) / pi0)[:, None]).sum(axis=0) / n
        M = (b * (pi0 * (1.0 - pi0))[:, None]).T @ b / n
        z = np.linalg.solve(M, D)
        h = h_tilde - (b @ z) * pi0
        phi = t * y0 / pi0 + (t - pi0) / pi0 * h - mu0
        return float(np.mean(phi))

    raise ValueError(f"no closed-form truth influence for {name!r}")


TRUTH_INFLUENCE_ESTIMATORS = DR_ESTIMATORS + (
    "reg", "imp", "ipw_ht", "ipw_pop", "ipw_nr", "ipw_opt",
)
