import math

import numpy as np
import pytest

from roblp.contrast import huber
from roblp.harness import (
    ComparisonRow,
    Estimator,
    RiskPoint,
    RiskReport,
    compare_contrasts,
    deviation_bound,
    deviation_bound_threshold,
    mc_risk,
    rate_fit,
    risk_curve,
    tail_check,
    wilson_half_width,
)
from roblp.kernels import procedure_constants, uniform_kernel
from roblp.basis import multi_index_set
from roblp.local_fit import LocalFitConfig, OptimizerSettings
from roblp.simulate import NoiseModel, constant_function, gen_data, sinusoid


def _report_from_risks(n_grid, risks, r=2.0):
    points = tuple(
        RiskPoint(n=n, risk=risk, stderr=0.0, replications=100, failures=0)
        for n, risk in zip(n_grid, risks)
    )
    return RiskReport(points=points, r=r, seed=0, estimator={})


def test_rate_fit_recovers_planted_exponent():
    n_grid = [512, 1024, 2048, 4096, 8192]
    risks = [3.7 * n ** (-0.8) for n in n_grid]  # r=2: slope -0.4
    fit = rate_fit(_report_from_risks(n_grid, risks), target=-0.4)
    assert fit.slope == pytest.approx(-0.4, abs=1e-12)
    assert fit.gap == pytest.approx(0.0, abs=1e-12)
    assert fit.residual_spread < 1e-12


def test_rate_fit_constant_risks():
    fit = rate_fit(_report_from_risks([512, 1024, 2048, 4096], [0.3] * 4), target=-0.4)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_rate_fit_target_value():
    # beta=2, d=1 target exponent
    beta, d = 2.0, 1
    assert -beta / (2 * beta + d) == pytest.approx(-0.4)


def test_rate_fit_validates_grid():
    with pytest.raises(ValueError):
        rate_fit(_report_from_risks([512, 1024, 2048], [1, 1, 1]), target=-0.4)
    with pytest.raises(ValueError):
        rate_fit(_report_from_risks([512, 600, 700, 800], [1, 1, 1, 1]), target=-0.4)


def test_mc_risk_zero_noise_polynomial():
    f = constant_function(0.5)
    model = NoiseModel(family="gaussian", base_scale=1e-300)
    est = Estimator(
        kind="fixed",
        contrast=huber(1.0),
        kernel_kind="uniform",
        bound=2.0,
        h=0.5,
        degree=0,
        optimizer=OptimizerSettings(gradient_tolerance=1e-12),
    )
    pt = mc_risk(est, f, [0.5], model, 2.0, 64, 30, seed=5)
    assert pt.risk <= 1e-10
    assert pt.failures == 0


def test_mc_risk_bounded_by_radius():
    f = sinusoid(beta=2.0)
    model = NoiseModel(family="cauchy", base_scale=1.0)
    bound = 8.0
    est = Estimator(
        kind="fixed", contrast=huber(1.0), kernel_kind="uniform", bound=bound, h=0.3, degree=1
    )
    pt = mc_risk(est, f, [0.25], model, 2.0, 128, 30, seed=6)
    assert pt.risk <= (2 * bound) ** 2
    assert math.isfinite(pt.risk)


def test_mc_risk_matches_local_mean_oracle():
    # closed-form oracle: degree 0, uniform kernel, huge huber threshold
    # is the in-window sample mean
    f = sinusoid(beta=2.0)
    model = NoiseModel(family="gaussian", base_scale=0.5)
    x0, h, n, reps, r = [0.25], 0.31, 256, 200, 2.0
    est = Estimator(
        kind="fixed",
        contrast=huber(1e7),
        kernel_kind="uniform",
        bound=10.0,
        h=h,
        degree=0,
        optimizer=OptimizerSettings(gradient_tolerance=1e-12),
    )
    pt = mc_risk(est, f, x0, model, r, n, reps, seed=10)
    target = float(f(np.array(x0)))
    oracle_errs = []
    for rep in range(reps):
        data = gen_data(f, model, n, 1, (10, rep))
        inside = np.abs(data.x[:, 0] - x0[0]) <= h / 2
        oracle_errs.append((np.clip(data.y[inside].mean(), -10, 10) - target) ** r)
    oracle_risk = float(np.mean(oracle_errs))
    se = float(np.std(oracle_errs, ddof=1) / math.sqrt(reps))
    assert abs(pt.risk - oracle_risk) <= 2 * se + 1e-12


def test_mc_risk_rejects_low_replications():
    f = constant_function(0.0)
    model = NoiseModel(family="gaussian", base_scale=1.0)
    est = Estimator(
        kind="fixed", contrast=huber(1.0), kernel_kind="uniform", bound=1.0, h=0.5, degree=0
    )
    with pytest.raises(ValueError):
        mc_risk(est, f, [0.5], model, 2.0, 64, 10, seed=1)


def test_mc_risk_aborts_on_frequent_empty_windows():
    f = constant_function(0.0)
    model = NoiseModel(family="gaussian", base_scale=1.0)
    est = Estimator(
        kind="fixed", contrast=huber(1.0), kernel_kind="uniform", bound=1.0, h=0.002, degree=0
    )
    with pytest.raises(RuntimeError, match="empty windows"):
        mc_risk(est, f, [0.5], model, 2.0, 8, 40, seed=2)


def test_risk_monotonicity_soft_guard():
    # soft regression guard: minimax risk decreases in n within 2 SEs
    f = sinusoid(beta=2.0)
    model = NoiseModel(family="gaussian", base_scale=0.5)
    est = Estimator(
        kind="minimax",
        contrast=huber(1.0),
        kernel_kind="uniform",
        bound=8.0,
        beta=2.0,
        lipschitz=f.lipschitz,
    )
    report = risk_curve(est, f, [0.25], model, 2.0, [512, 2048, 8192], 80, seed=3)
    for a, b in zip(report.points, report.points[1:]):
        assert b.risk <= a.risk + 2 * (a.stderr + b.stderr)


def test_wilson_half_width():
    # against the textbook formula at p-hat = 0.5
    hw = wilson_half_width(50, 100, z=1.96)
    z = 1.96
    denom = 1 + z * z / 100
    expected = (z / denom) * math.sqrt(0.25 / 100 + z * z / 40000)
    assert hw == pytest.approx(expected, rel=1e-12)
    assert wilson_half_width(0, 100) > 0  # informative even with zero counts
    with pytest.raises(ValueError):
        wilson_half_width(0, 0)


def test_deviation_bound_shape():
    kwargs = dict(n_b=2, sigma=1e8, lam=1 / 12, c=0.4, k_sup=1.0, rho_prime_sup=1.0, u=1.0, nhd=60.0)
    eps0 = deviation_bound_threshold(2, 0.4, 1 / 12, 1.0)
    # at the validity edge c lam eps / (2 n_b) = 2u, so the exponent
    # numerator is (2u - u)^2 = u^2, not zero
    clam = 0.4 / 12
    assert clam * eps0 / (2 * 2) == pytest.approx(2.0)
    vals = [deviation_bound(eps, **kwargs) for eps in (eps0, 2 * eps0, 4 * eps0, 8 * eps0)]
    assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))  # decreasing beyond the edge
    assert vals[0] == pytest.approx(
        2 * 1e8 * math.exp(-1.0 / (8 + (4 / 6) * clam * eps0 / math.sqrt(60.0)))
    )


def test_tail_check_report_structure():
    f = sinusoid(beta=2.0)
    model = NoiseModel(family="gaussian", base_scale=0.5)
    cfg = LocalFitConfig(
        x0=(0.25,),
        h=0.15,
        degree=1,
        bound=8.0,
        kernel=uniform_kernel(1),
        contrast=huber(1.0),
    )
    constants = procedure_constants(cfg.kernel, cfg.index_set, c=0.38)
    n = 256
    bias = f.lipschitz * cfg.h**f.beta
    u = max(1.0, bias * math.sqrt(n * cfg.h))
    eps_min = deviation_bound_threshold(2, 0.38, constants.lam, u)
    grid = [0.5 * eps_min, eps_min, 12 * eps_min]
    report = tail_check(f, model, cfg, constants, grid, n=n, replications=200, seed=4)
    assert report.eps_min == pytest.approx(eps_min, rel=1e-12)
    assert report.points[0].valid is False
    assert report.points[0].bound is None
    assert report.points[1].valid
    assert report.points[1].bound > 1  # edge of validity is uninformative here
    assert len(report.points) == 3
    assert report.failures == 0
    assert 0 <= report.points[1].empirical <= 1
    assert "localization" in report.caveat


def test_compare_contrasts_zero_noise_agreement():
    f = constant_function(0.4)
    model = NoiseModel(family="gaussian", base_scale=1e-300)
    rows = compare_contrasts(
        f, [0.5], model, n=128, replications=40, seed=8, h=0.4, degree=0, bound=2.0, gamma=1.0
    )
    assert [r.name for r in rows] == ["square", "absolute_proxy", "huber(1)"]
    for row in rows:
        assert row.risk <= 1e-12


def test_estimator_validation_and_description():
    with pytest.raises(ValueError):
        Estimator(kind="fixed", contrast=huber(1.0), kernel_kind="uniform", bound=1.0)
    with pytest.raises(ValueError):
        Estimator(kind="minimax", contrast=huber(1.0), kernel_kind="uniform", bound=1.0)
    with pytest.raises(ValueError):
        Estimator(kind="adaptive", contrast=huber(1.0), kernel_kind="uniform", bound=1.0, degree=2)
    est = Estimator(
        kind="minimax", contrast=huber(1.0), kernel_kind="uniform", bound=8.0, beta=2.0, lipschitz=39.5
    )
    assert est.fit_degree() == 1
    desc = est.describe()
    assert desc["kind"] == "minimax" and desc["beta"] == 2.0
    assert est.bandwidth(1024, 1) == pytest.approx((39.5**2 * 1024) ** (-0.2))


def test_mc_risk_parallel_matches_sequential():
    f = sinusoid(beta=2.0)
    model = NoiseModel(family="gaussian", base_scale=0.5)
    est = Estimator(
        kind="fixed", contrast=huber(1.0), kernel_kind="uniform", bound=8.0, h=0.2, degree=1
    )
    seq = mc_risk(est, f, [0.25], model, 2.0, 128, 32, seed=12, workers=1)
    par = mc_risk(est, f, [0.25], model, 2.0, 128, 32, seed=12, workers=2)
    assert par == seq
