import numpy as np
import pytest

from drmean import estimators as E
from drmean.errors import InsufficientReplicates
from drmean.influence import (
    InfluenceSpecI,
    InfluenceSpecII,
    check_identities,
    if_model1,
    if_model2,
    if_model3,
    linearity_diagnostic,
    sandwich_se,
)
from drmean.models import BasisSpec, Dataset, fit_outcome, fit_propensity
from drmean.recipes import EvalContext, evaluate

from conftest import random_mar_dataset

D4_PHI = np.array([1.0, 4.25, 7.5, 7.0]) - 4.9375
D4_SUMSQ = 26.796875  # sum of squared influence values, by hand


class TestModel1:
    def test_regression_influence(self, d4_dataset, d4):
        m = d4["m"]
        mu = float(np.mean(m))
        spec = InfluenceSpecI(a_tilde=np.zeros(4), correct_for_fit=False)
        rep = if_model1(d4_dataset, m, mu, spec)
        assert np.allclose(rep.phi, m - mu, atol=1e-14)
        assert abs(rep.mean) <= 1e-14

    def test_imputation_influence(self, d4_dataset, d4):
        m = d4["m"]
        mu = E.mu_imp(d4["t"], d4["y"], m)
        spec = InfluenceSpecI(a_tilde=np.ones(4), correct_for_fit=False)
        rep = if_model1(d4_dataset, m, mu, spec)
        t = d4["t"].astype(float)
        y0 = np.where(t == 1, np.nan_to_num(d4["y"]), 0.0)
        assert np.allclose(rep.phi, m - mu + t * (y0 - m), atol=1e-14)
        assert abs(rep.mean) <= 1e-12

    def test_dr_influence_vector_on_fixture(self, d4_dataset, d4):
        spec = InfluenceSpecI(a_tilde=1.0 / d4["pi"], correct_for_fit=False)
        rep = if_model1(d4_dataset, d4["m"], 4.9375, spec)
        assert np.allclose(rep.phi, D4_PHI, atol=1e-12)

    def test_correction_vanishes_for_inverse_propensity_a(self):
        # with the plugin analog, a = 1/pi-hat zeroes the correction termwise
        d = random_mar_dataset(17, n=300, q=3)
        prop = fit_propensity(d, BasisSpec(columns=("z1", "z2", "z3")))
        fit = fit_outcome(d, BasisSpec(columns=("z1", "z2", "z3")), "ols")
        m = fit.predict(d)
        mu = E.mu_aipw(d.t, d.y, prop.pi, -m)
        a = 1.0 / prop.pi
        raw = if_model1(
            d, m, mu, InfluenceSpecI(a_tilde=a, correct_for_fit=False)
        )
        corrected = if_model1(
            d, m, mu,
            InfluenceSpecI(a_tilde=a, pi=prop.pi, expectation_mode="plugin"),
            fit,
        )
        assert np.max(np.abs(corrected.phi - raw.phi)) <= 1e-10


class TestModel2:
    def test_pop_root_has_zero_mean(self, d4_dataset, d4):
        mu = E.mu_ipw_pop(d4["t"], d4["y"], d4["pi"])
        spec = InfluenceSpecII(h_tilde=np.full(4, -mu), correct_for_fit=False)
        rep = if_model2(d4_dataset, d4["pi"], mu, spec)
        assert abs(rep.mean) <= 1e-10 * (1 + abs(mu))

    def test_ht_influence_zero_mean(self, d4_dataset, d4):
        mu = E.mu_ipw_ht(d4["t"], d4["y"], d4["pi"])
        spec = InfluenceSpecII(h_tilde=np.zeros(4), correct_for_fit=False)
        rep = if_model2(d4_dataset, d4["pi"], mu, spec)
        t = d4["t"].astype(float)
        y0 = np.where(t == 1, np.nan_to_num(d4["y"]), 0.0)
        assert np.allclose(rep.phi, t * y0 / d4["pi"] - mu, atol=1e-14)
        assert abs(rep.mean) <= 1e-12

    def test_matches_model1_dr_form(self, d4_dataset, d4):
        spec = InfluenceSpecII(h_tilde=-d4["m"], correct_for_fit=False)
        rep = if_model2(d4_dataset, d4["pi"], 4.9375, spec)
        assert np.allclose(rep.phi, D4_PHI, atol=1e-12)


class TestModel3:
    def test_reduces_to_dr_influence(self, d4_dataset, d4):
        rep = if_model3(
            d4_dataset, d4["m"], d4["pi"], 4.9375,
            a=1.0 / d4["pi"], h=np.zeros(4),
        )
        assert np.allclose(rep.phi, D4_PHI, atol=1e-12)

    def test_regression_reduction(self, d4_dataset, d4):
        mu = float(np.mean(d4["m"]))
        rep = if_model3(
            d4_dataset, d4["m"], d4["pi"], mu, a=np.zeros(4), h=np.zeros(4)
        )
        assert np.allclose(rep.phi, d4["m"] - mu, atol=1e-14)

    def test_spot_check_single_row(self, d4_dataset, d4):
        rng = np.random.default_rng(8)
        a = rng.standard_normal(4)
        h = rng.standard_normal(4)
        mu = 1.7
        rep = if_model3(d4_dataset, d4["m"], d4["pi"], mu, a=a, h=h)
        # row 0 by direct arithmetic: m - mu + t a (y - m) + (t - pi)/pi h
        want = 3.0 - 1.7 + 1.0 * a[0] * (2.0 - 3.0) + (1 - 0.5) / 0.5 * h[0]
        assert abs(rep.phi[0] - want) <= 1e-14


class TestSandwich:
    def test_two_point_example(self):
        assert abs(sandwich_se(np.array([1.0, -1.0])) - np.sqrt(2) / 2) <= 1e-15

    def test_zero_influence(self):
        assert sandwich_se(np.zeros(5)) == 0.0

    def test_fixture_value(self, d4_dataset, d4):
        spec = InfluenceSpecII(h_tilde=-d4["m"], correct_for_fit=False)
        rep = if_model2(d4_dataset, d4["pi"], 4.9375, spec)
        assert abs(rep.se - np.sqrt(D4_SUMSQ) / 4) <= 1e-12
        assert abs(sandwich_se(rep) - rep.se) <= 1e-16

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        phi = rng.standard_normal(40)
        assert sandwich_se(phi) == sandwich_se(phi[::-1])


def test_pointwise_identity_random_rows():
    rng = np.random.default_rng(123)
    n = 20_000
    t = (rng.random(n) < 0.6).astype(float)
    y0 = np.where(t == 1, rng.standard_normal(n), 0.0)
    pi = rng.uniform(0.05, 1.0, n)
    m = rng.standard_normal(n)
    mu = 0.37
    lhs = m - mu + t * (y0 - m) / pi
    rhs = t * y0 / pi - (t - pi) / pi * m - mu
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_corrected_means_stay_centered():
    d = random_mar_dataset(55, n=400, q=3)
    ctx = EvalContext(
        d,
        outcome_spec=BasisSpec(columns=("z1", "z2", "z3")),
        propensity_spec=BasisSpec(columns=("z1", "z2", "z3")),
    )
    for name in ("reg", "imp", "ipw_ht", "ipw_pop", "ipw_nr", "ipw_opt",
                 "bc_ols", "bc_pop", "wls", "srr"):
        rep = evaluate(name, ctx)
        sd = float(np.std(rep.phi))
        assert abs(float(np.mean(rep.phi))) <= 1e-6 * sd, name


class TestCheckIdentities:
    def test_fitted_models_all_pass(self):
        d = random_mar_dataset(63, n=260, q=2)
        prop = fit_propensity(d, BasisSpec(columns=("z1", "z2")))
        fits = {
            "ols": fit_outcome(d, BasisSpec(columns=("z1", "z2")), "ols"),
            "wls": fit_outcome(d, BasisSpec(columns=("z1", "z2")), "wls", prop.pi),
            "srr": fit_outcome(d, BasisSpec(columns=("z1", "z2")), "srr", prop.pi),
        }
        report = check_identities(d, outcome_fits=fits, propensity=prop)
        assert report.passed
        by_name = {(c.name, c.context): c for c in report.checks}
        assert by_name[("weighted-residual", "ols fit")].status == "NOT_APPLICABLE"
        assert by_name[("weighted-residual", "wls fit")].status == "PASS"

    def test_corrupted_predictions_fail(self, d4_dataset, d4):
        report = check_identities(
            d4_dataset, pi=d4["pi"], m=d4["m"] + np.array([3.0, 0, 0, 0])
        )
        assert not report.passed
        failed = {c.name for c in report.checks if c.failed}
        assert "weighted-residual" in failed or "aipw-collapse" in failed

    def test_supplied_wls_style_predictions_pass(self, d4_dataset, d4):
        # intercept-only WLS prediction: every row at the weighted mean
        m = np.full(4, 96 / 23)
        report = check_identities(d4_dataset, pi=d4["pi"], m=m)
        assert report.passed


class TestLinearityDiagnostic:
    def test_exactly_linear_estimator(self):
        rng = np.random.default_rng(7)
        mu0, n, R = 5.0, 400, 80
        phi_means = rng.standard_normal(R) * 0.05
        estimates = mu0 + phi_means
        rep = linearity_diagnostic(estimates, phi_means, mu0, n)
        assert abs(rep.correlation - 1.0) <= 1e-12
        assert abs(rep.slope - 1.0) <= 1e-12
        assert rep.max_remainder <= 1e-10

    def test_insufficient_replicates(self):
        with pytest.raises(InsufficientReplicates):
            linearity_diagnostic(np.zeros(10), np.ones(10), 0.0, 100)
