"""Acceptance gates: one test per criterion, each printing a PASS/FAIL line.

Heavy Monte Carlo runs are shared across criteria through module-scoped
fixtures; each criterion asserts its statistical gate and that the work it
depends on fit inside the stated runtime budget.
"""

import time

import numpy as np
import pytest

from drmean import estimators as E
from drmean.influence import linearity_diagnostic
from drmean.kernels import expit, least_squares, logistic_newton
from drmean.errors import Separated
from drmean.models import BasisSpec, fit_outcome, fit_propensity
from drmean.simulation import (
    DgpSpec,
    ScenarioConfig,
    analyst_bases,
    generate,
    linearity_study,
    run_scenario,
)

SEED = 20260810
DR6 = ("bc_ols", "bc_pop", "bc_nr", "bc_opt", "wls", "srr")


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")


@pytest.fixture(scope="module")
def spec():
    return DgpSpec.default()


@pytest.fixture(scope="module", autouse=True)
def warm_kernels(spec):
    # amortize JIT compilation outside the timed sections
    cfg = ScenarioConfig(quadrant="CC", n=100, replicates=1, seed=1,
                         estimators=("reg", "ipw_pop", "bc_ols", "wls", "srr"))
    run_scenario(cfg, spec)


def _timed(cfg, spec):
    t0 = time.perf_counter()
    summary = run_scenario(cfg, spec)
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="module")
def random_fits(spec):
    """100 fitted datasets at n = 200 shared by criteria 1 and 2."""
    t0 = time.perf_counter()
    out = []
    prop_spec, out_spec = analyst_bases(spec, "CC")
    for r in range(100):
        d = generate(spec, 200, (SEED, r))
        prop = fit_propensity(d, prop_spec)
        ols = fit_outcome(d, out_spec, "ols")
        wls_rep = E.mu_wls(d, out_spec, prop.pi)
        srr_rep = E.mu_srr(d, out_spec, prop.pi)
        out.append((d, prop, ols, wls_rep, srr_rep))
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cc_1000(spec):
    return _timed(
        ScenarioConfig(quadrant="CC", n=1000, replicates=1000, seed=SEED,
                       estimators=DR6), spec
    )


@pytest.fixture(scope="module")
def ci_1000(spec):
    return _timed(
        ScenarioConfig(quadrant="CI", n=1000, replicates=1000, seed=SEED,
                       estimators=("reg",) + DR6), spec
    )


@pytest.fixture(scope="module")
def ic_1000(spec):
    return _timed(
        ScenarioConfig(quadrant="IC", n=1000, replicates=1000, seed=SEED,
                       estimators=("ipw_pop",) + DR6), spec
    )


@pytest.fixture(scope="module")
def cc_2000(spec):
    return _timed(
        ScenarioConfig(quadrant="CC", n=2000, replicates=2000, seed=SEED,
                       estimators=("ipw_pop", "ipw_nr", "ipw_opt",
                                   "bc_ols", "wls")), spec
    )


@pytest.fixture(scope="module")
def ic_2000(spec):
    return _timed(
        ScenarioConfig(quadrant="IC", n=2000, replicates=2000, seed=SEED,
                       estimators=("ipw_pop", "ipw_nr", "ipw_opt")), spec
    )


@pytest.fixture(scope="module")
def ci_2000(spec):
    return _timed(
        ScenarioConfig(quadrant="CI", n=2000, replicates=2000, seed=SEED,
                       estimators=("bc_pop", "bc_nr", "bc_opt")), spec
    )


def test_criterion_01_aipw_form_equivalence(random_fits):
    fits, elapsed = random_fits
    t0 = time.perf_counter()
    worst = 0.0
    gammas_exact = True
    for d, prop, ols, wls_rep, srr_rep in fits:
        m = ols.predict(d)
        for variant in ("ols", "pop", "nr", "opt"):
            rep = E.mu_bc(d, ols, prop, variant)
            mu_indep = E.mu_aipw(d.t, d.y, prop.pi, -rep.gamma - m)
            worst = max(worst, abs(rep.mu - mu_indep) / (1 + abs(rep.mu)))
            if variant == "ols" and rep.gamma != 0.0:
                gammas_exact = False
        if wls_rep.gamma != 0.0 or srr_rep.gamma != 0.0:
            gammas_exact = False
    elapsed += time.perf_counter() - t0
    ok = worst <= 1e-12 and gammas_exact and elapsed < 5.0
    _report(1, ok, f"max rel diff {worst:.2e} (<=1e-12), "
                   f"gamma identically zero: {gammas_exact}, {elapsed:.2f}s")
    assert worst <= 1e-12
    assert gammas_exact
    assert elapsed < 5.0


def test_criterion_02_weighted_residual_identity(random_fits):
    fits, elapsed = random_fits
    t0 = time.perf_counter()
    worst_resid = 0.0
    worst_collapse = 0.0
    for d, prop, _, wls_rep, srr_rep in fits:
        t = d.t.astype(float)
        y0 = d.y_filled()
        for rep in (wls_rep, srr_rep):
            m = rep.fit.predict(d, prop.pi)
            resid = abs(np.sum(t * (y0 - m) / prop.pi))
            worst_resid = max(
                worst_resid, resid / (1 + np.sum(t * np.abs(y0) / prop.pi))
            )
            worst_collapse = max(
                worst_collapse,
                abs(rep.mu - np.mean(m)) / (1 + abs(rep.mu)),
            )
    elapsed += time.perf_counter() - t0
    ok = worst_resid <= 1e-8 and worst_collapse <= 1e-10 and elapsed < 5.0
    _report(2, ok, f"weighted residual {worst_resid:.2e} (<=1e-8), "
                   f"collapse {worst_collapse:.2e} (<=1e-10), {elapsed:.2f}s")
    assert worst_resid <= 1e-8
    assert worst_collapse <= 1e-10
    assert elapsed < 5.0


def test_criterion_03_pointwise_influence_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 100_000
    t = (rng.random(n) < 0.6).astype(float)
    y0 = np.where(t == 1, rng.standard_normal(n), 0.0)
    pi = rng.uniform(0.05, 1.0, n)
    m = rng.standard_normal(n)
    mu = 0.4242
    lhs = m - mu + t * (y0 - m) / pi
    rhs = t * y0 / pi - (t - pi) / pi * m - mu
    worst = float(np.max(np.abs(lhs - rhs)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    _report(3, ok, f"max pointwise diff {worst:.2e} over {n} rows "
                   f"(<=1e-12), {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_04_double_robustness_both_correct(cc_1000):
    summary, elapsed = cc_1000
    ratios = {r.name: abs(r.bias) / r.mc_se_bias for r in summary.rows}
    variances = {r.name: r.sd**2 for r in summary.rows}
    spread = max(variances.values()) / min(variances.values())
    ok = max(ratios.values()) <= 3.0 and spread <= 1.15 and elapsed < 180.0
    _report(4, ok, f"max |bias|/MC-SE {max(ratios.values()):.2f} (<=3), "
                   f"variance spread {spread:.3f} (<=1.15), {elapsed:.1f}s")
    assert max(ratios.values()) <= 3.0, ratios
    assert spread <= 1.15
    assert elapsed < 180.0


def test_criterion_05_single_misspecification(ci_1000, ic_1000):
    (ci, t_ci), (ic, t_ic) = ci_1000, ic_1000
    elapsed = t_ci + t_ic
    dr_ci = {r.name: abs(r.bias) / r.mc_se_bias for r in ci.rows if r.name in DR6}
    dr_ic = {r.name: abs(r.bias) / r.mc_se_bias for r in ic.rows if r.name in DR6}
    reg_ratio = abs(ci.row("reg").bias) / ci.row("reg").mc_se_bias
    ipw_ratio = abs(ic.row("ipw_pop").bias) / ic.row("ipw_pop").mc_se_bias
    ok = (
        max(dr_ci.values()) <= 3.0 and max(dr_ic.values()) <= 3.0
        and reg_ratio > 5.0 and ipw_ratio > 5.0 and elapsed < 300.0
    )
    _report(5, ok, f"CI: DR max {max(dr_ci.values()):.2f} (<=3), "
                   f"OLS {reg_ratio:.1f} (>5); "
                   f"IC: DR max {max(dr_ic.values()):.2f} (<=3), "
                   f"IPW-POP {ipw_ratio:.1f} (>5); {elapsed:.1f}s")
    assert max(dr_ci.values()) <= 3.0, dr_ci
    assert reg_ratio > 5.0
    assert max(dr_ic.values()) <= 3.0, dr_ic
    assert ipw_ratio > 5.0
    assert elapsed < 300.0


def test_criterion_06_sandwich_coverage(cc_2000):
    summary, elapsed = cc_2000
    coverages = {
        name: summary.row(name).coverage
        for name in ("bc_ols", "wls", "ipw_pop")
    }
    ok = all(0.935 <= c <= 0.965 for c in coverages.values()) and elapsed < 300.0
    pretty = ", ".join(f"{k}={v:.3f}" for k, v in coverages.items())
    _report(6, ok, f"coverage {pretty} (in [0.935, 0.965]), {elapsed:.1f}s")
    for name, c in coverages.items():
        assert 0.935 <= c <= 0.965, (name, c)
    assert elapsed < 300.0


def test_criterion_07_asymptotic_linearity(spec):
    t0 = time.perf_counter()
    study = linearity_study(
        spec, "CC", ("bc_ols", "ipw_pop"), n=4000, replicates=500, seed=SEED
    )
    results = {}
    for name in ("bc_ols", "ipw_pop"):
        results[name] = linearity_diagnostic(
            study.estimates[name], study.phi_means[name],
            study.mu0.value, study.n,
        )
    elapsed = time.perf_counter() - t0
    ok = all(
        r.correlation > 0.98 and 0.9 <= r.slope <= 1.1 for r in results.values()
    ) and elapsed < 180.0
    pretty = ", ".join(
        f"{k}: corr={v.correlation:.4f} slope={v.slope:.3f}"
        for k, v in results.items()
    )
    _report(7, ok, f"{pretty} (corr>0.98, slope in [0.9,1.1]), {elapsed:.1f}s")
    for name, r in results.items():
        assert r.correlation > 0.98, (name, r)
        assert 0.9 <= r.slope <= 1.1, (name, r)
    assert elapsed < 180.0


def test_criterion_08_optimality_orderings(cc_2000, ic_2000, ci_2000):
    (cc, t_cc), (ic, t_ic), (ci, t_ci) = cc_2000, ic_2000, ci_2000
    elapsed = t_cc + t_ic + t_ci
    checks = {}
    for label, s in (("CC", cc), ("IC", ic)):
        v = {name: s.row(name).sd ** 2 for name in ("ipw_pop", "ipw_nr", "ipw_opt")}
        checks[f"{label} opt/pop"] = v["ipw_opt"] / v["ipw_pop"]
        checks[f"{label} opt/nr"] = v["ipw_opt"] / v["ipw_nr"]
    v = {name: ci.row(name).sd ** 2 for name in ("bc_pop", "bc_nr", "bc_opt")}
    checks["CI bc_opt/min"] = v["bc_opt"] / min(v["bc_pop"], v["bc_nr"])
    ok = all(val <= 1.02 for val in checks.values()) and elapsed < 300.0
    pretty = ", ".join(f"{k}={v:.3f}" for k, v in checks.items())
    _report(8, ok, f"variance ratios {pretty} (<=1.02), {elapsed:.1f}s")
    for key, val in checks.items():
        assert val <= 1.02, (key, val)
    assert elapsed < 300.0


def test_criterion_09_reduction_chain_exactness(spec):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 9)
    exact = True
    for _ in range(50):
        n = 120
        t = (rng.random(n) < 0.6).astype(int)
        if t.sum() in (0, n):
            continue
        y = np.where(t == 1, rng.standard_normal(n) * 4 + 10, np.nan)
        pi = rng.uniform(0.05, 1.0, n)
        m = rng.standard_normal(n) + 10
        exact &= E.mu_general_pi(t, y, m, "one").mu == E.mu_imp(t, y, m)
        exact &= E.mu_general_pi(t, y, m, "infinity").mu == E.mu_reg(m)
        exact &= E.mu_hybrid(t, y, pi, m, 0.0).mu == E.mu_aipw(t, y, pi, -m)
        delta = float(pi.max()) + 1e-9
        exact &= E.mu_hybrid(t, y, pi, m, min(delta, 1.0)).mu == E.mu_reg(m)
    elapsed = time.perf_counter() - t0
    ok = exact and elapsed < 1.0
    _report(9, ok, f"bitwise reductions hold: {exact}, {elapsed:.2f}s")
    assert exact
    assert elapsed < 1.0


def test_criterion_10_kernel_gates():
    t0 = time.perf_counter()
    r = logistic_newton(np.ones((4, 1)), [1, 1, 1, 0])
    mle_gap = abs(expit(r.coefficients[0]) - 0.75)

    rng = np.random.default_rng(SEED + 10)
    X = np.column_stack([np.ones(500), rng.standard_normal((500, 3))])
    y = rng.standard_normal(500) * 7
    w = rng.random(500) * 2
    fit = least_squares(X, y, w)
    resid = y - X @ fit.coefficients
    ortho = np.max(np.abs(X.T @ (w * resid))) / (1 + np.max(np.abs(y)))

    separated_raised = False
    try:
        logistic_newton([[1, -1], [1, 0], [1, 1], [1, 2]], [0, 0, 1, 1])
    except Separated:
        separated_raised = True
    elapsed = time.perf_counter() - t0
    ok = mle_gap <= 1e-10 and ortho <= 1e-8 and separated_raised and elapsed < 1.0
    _report(10, ok, f"intercept MLE gap {mle_gap:.2e} (<=1e-10), "
                    f"orthogonality {ortho:.2e} (<=1e-8), "
                    f"separation raised: {separated_raised}, {elapsed:.2f}s")
    assert mle_gap <= 1e-10
    assert ortho <= 1e-8
    assert separated_raised
    assert elapsed < 1.0
