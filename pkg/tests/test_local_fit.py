import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roblp.basis import monomial_matrix, multi_index_set
from roblp.contrast import absolute, huber
from roblp.kernels import uniform_kernel, epanechnikov_kernel
from roblp.local_fit import (
    Dataset,
    EmptyNeighborhoodError,
    LocalFitConfig,
    OptimizerSettings,
    Sample,
    criterion,
    criterion_gradient,
    estimate_at,
    fit_local,
    project_l1_ball,
)


def make_cfg(**kw):
    defaults = dict(
        x0=(0.5,),
        h=0.2,
        degree=1,
        bound=10.0,
        kernel=uniform_kernel(1),
        contrast=huber(1.0),
    )
    defaults.update(kw)
    return LocalFitConfig(**defaults)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(x=np.array([[1.5]]), y=np.array([0.0]))
    with pytest.raises(ValueError):
        Dataset(x=np.array([[0.5]]), y=np.array([np.nan]))
    with pytest.raises(ValueError):
        Dataset(x=np.array([[0.5], [0.6]]), y=np.array([0.0]))
    ds = Dataset.from_samples([Sample(x=(0.1,), y=1.0), Sample(x=(0.9,), y=-1.0)])
    assert ds.n == 2 and ds.d == 1


def test_dataset_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    ds = Dataset(x=rng.random((7, 2)), y=rng.normal(size=7))
    path = tmp_path / "data.csv"
    ds.to_csv(path)
    back = Dataset.from_csv(path)
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.y, ds.y)


def test_dataset_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.1,0.2\n")
    with pytest.raises(ValueError, match="header"):
        Dataset.from_csv(path)


def test_criterion_empty_window_is_zero():
    data = Dataset(x=np.array([[0.9]]), y=np.array([3.0]))
    cfg = make_cfg()
    assert criterion(np.array([0.0, 0.0]), data, cfg) == 0.0


def test_criterion_exact_fit_is_zero():
    data = Dataset(x=np.array([[0.5]]), y=np.array([2.0]))
    cfg = make_cfg()
    assert criterion(np.array([2.0, 0.0]), data, cfg) == 0.0


def test_criterion_hand_computed_three_samples():
    # spreadsheet-style evaluation: uniform kernel, huber gamma=1,
    # x0=0.5, h=0.2, t=(1, 2); one sample falls outside the window
    data = Dataset(
        x=np.array([[0.45], [0.55], [0.70]]), y=np.array([2.0, 0.5, 9.0])
    )
    cfg = make_cfg()
    t = np.array([1.0, 2.0])
    # z495 = -0.25 -> fit 0.5, resid 1.5  -> huber 1.0 * (1.5 - 0.5) = 1.0
    # z55  = +0.25 -> fit 1.5, resid -1.0 -> huber 0.5 * 1.0 = 0.5
    # third sample: kernel weight 0
    expected = (1.0 + 0.5) / (3 * 0.2)
    assert criterion(t, data, cfg) == pytest.approx(expected, rel=1e-14)


def test_gradient_zero_at_noiseless_truth():
    rng = np.random.default_rng(2)
    s = multi_index_set(2, 1)
    theta = np.array([0.4, -0.2, 0.1])
    x0 = np.array([0.5])
    h = 0.3
    xs = rng.uniform(0.35, 0.65, size=(25, 1))
    ys = monomial_matrix((xs - x0) / h, s) @ theta
    data = Dataset(x=xs, y=ys)
    cfg = make_cfg(h=h, degree=2)
    np.testing.assert_allclose(criterion_gradient(theta, data, cfg), 0.0, atol=1e-15)


def test_gradient_cancels_for_symmetric_residuals():
    # residuals +/- a at the same point: odd derivative cancels exactly
    data = Dataset(x=np.array([[0.5], [0.5]]), y=np.array([1.5, -1.5]))
    cfg = make_cfg(degree=0)
    grad = criterion_gradient(np.array([0.0]), data, cfg)
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)


@pytest.mark.parametrize("kernel_kind", ["uniform", "epanechnikov"])
def test_gradient_matches_finite_differences(kernel_kind):
    rng = np.random.default_rng(7)
    kernel = uniform_kernel(1) if kernel_kind == "uniform" else epanechnikov_kernel(1)
    for trial in range(20):
        n = 30
        xs = rng.random((n, 1))
        ys = rng.normal(scale=1.5, size=n)
        data = Dataset(x=xs, y=ys)
        cfg = make_cfg(h=0.35, degree=2, kernel=kernel)
        t = rng.normal(scale=0.8, size=3)
        grad = criterion_gradient(t, data, cfg)
        for i in range(t.size):
            step = 1e-6 * (1 + abs(t[i]))
            tp, tm = t.copy(), t.copy()
            tp[i] += step
            tm[i] -= step
            fd = (criterion(tp, data, cfg) - criterion(tm, data, cfg)) / (2 * step)
            assert abs(fd - grad[i]) <= 1e-6 * (1 + abs(fd))


def test_project_l1_ball_examples():
    np.testing.assert_allclose(project_l1_ball(np.array([0.3, -0.2]), 1.0), [0.3, -0.2])
    np.testing.assert_allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])
    # KKT by hand: soft-threshold at 0.5
    np.testing.assert_allclose(project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5])
    with pytest.raises(ValueError):
        project_l1_ball(np.array([1.0]), 0.0)


@given(
    st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=6),
    st.floats(min_value=0.1, max_value=4.0),
)
@settings(max_examples=150, deadline=None)
def test_project_l1_ball_properties(vals, radius):
    t = np.array(vals)
    p = project_l1_ball(t, radius)
    assert np.sum(np.abs(p)) <= radius + 1e-9
    np.testing.assert_allclose(project_l1_ball(p, radius), p, atol=1e-12)
    if np.sum(np.abs(t)) <= radius:
        np.testing.assert_array_equal(p, t)


def test_project_l1_ball_against_qp_oracle():
    # split v = a - b with a, b >= 0 so the l1 constraint becomes linear
    from scipy.optimize import minimize

    rng = np.random.default_rng(9)
    for _ in range(10):
        t = rng.normal(scale=2.0, size=4)
        radius = rng.uniform(0.5, 3.0)

        def objective(w):
            v = w[:4] - w[4:]
            return 0.5 * np.sum((v - t) ** 2)

        res = minimize(
            objective,
            np.zeros(8),
            bounds=[(0, None)] * 8,
            constraints=[{"type": "ineq", "fun": lambda w: radius - np.sum(w)}],
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 1000},
        )
        oracle = res.x[:4] - res.x[4:]
        np.testing.assert_allclose(project_l1_ball(t, radius), oracle, atol=1e-6)


def test_fit_recovers_noiseless_polynomial():
    rng = np.random.default_rng(21)
    s = multi_index_set(2, 2)
    theta = rng.uniform(-0.5, 0.5, size=s.size)
    x0 = np.array([0.5, 0.4])
    h = 0.3
    xs = x0 + rng.uniform(-h / 2, h / 2, size=(5 * s.size, 2))
    ys = monomial_matrix((xs - x0) / h, s) @ theta
    data = Dataset(x=xs, y=ys)
    cfg = LocalFitConfig(
        x0=tuple(x0),
        h=h,
        degree=2,
        bound=5.0,
        kernel=uniform_kernel(2),
        contrast=huber(100.0),
        optimizer=OptimizerSettings(gradient_tolerance=1e-12, max_iterations=50_000),
    )
    res = fit_local(data, cfg)
    assert res.converged
    np.testing.assert_allclose(res.theta_hat.values, theta, atol=1e-6)


def test_fit_degree_zero_matches_mean_and_median():
    rng = np.random.default_rng(33)
    xs = rng.uniform(0.31, 0.69, size=(15, 1))
    ys = rng.normal(size=15)
    data = Dataset(x=xs, y=ys)
    tight = OptimizerSettings(gradient_tolerance=1e-13)
    big = make_cfg(x0=(0.5,), h=0.4, degree=0, bound=20.0, contrast=huber(1e6), optimizer=tight)
    assert fit_local(data, big).estimate == pytest.approx(float(ys.mean()), abs=1e-8)
    tiny = make_cfg(x0=(0.5,), h=0.4, degree=0, bound=20.0, contrast=huber(1e-8), optimizer=tight)
    assert fit_local(data, tiny).estimate == pytest.approx(float(np.median(ys)), abs=1e-4)


def test_fit_empty_window_raises():
    data = Dataset(x=np.array([[0.05]]), y=np.array([1.0]))
    with pytest.raises(EmptyNeighborhoodError):
        fit_local(data, make_cfg())
    with pytest.raises(ValueError):
        fit_local(Dataset(x=np.zeros((0, 1)), y=np.zeros(0)), make_cfg())


def test_fit_constant_data():
    data = Dataset(x=np.array([[0.45], [0.5], [0.55]]), y=np.array([2.0, 2.0, 2.0]))
    assert estimate_at(data, make_cfg()) == pytest.approx(2.0, abs=1e-8)


def test_estimate_bounded_by_radius():
    data = Dataset(x=np.array([[0.5], [0.52]]), y=np.array([50.0, 60.0]))
    cfg = make_cfg(degree=0, bound=3.0, contrast=huber(1e6))
    res = fit_local(data, cfg)
    assert abs(res.estimate) <= 3.0 + 1e-12
    assert res.theta_hat.l1_norm <= 3.0 + 1e-12


def test_shift_equivariance():
    rng = np.random.default_rng(44)
    xs = rng.uniform(0.3, 0.7, size=(40, 1))
    ys = rng.normal(size=40)
    shift = 1.7
    tight = OptimizerSettings(gradient_tolerance=1e-12)
    cfg = make_cfg(h=0.4, degree=1, bound=100.0, optimizer=tight)
    base = fit_local(Dataset(x=xs, y=ys), cfg).estimate
    shifted = fit_local(Dataset(x=xs, y=ys + shift), cfg).estimate
    assert shifted - base == pytest.approx(shift, abs=1e-7)


def test_sign_symmetry():
    rng = np.random.default_rng(45)
    xs = rng.uniform(0.3, 0.7, size=(30, 1))
    ys = rng.normal(size=30)
    tight = OptimizerSettings(gradient_tolerance=1e-12)
    cfg = make_cfg(h=0.4, degree=1, bound=50.0, optimizer=tight)
    pos = fit_local(Dataset(x=xs, y=ys), cfg).estimate
    neg = fit_local(Dataset(x=xs, y=-ys), cfg).estimate
    assert neg == pytest.approx(-pos, abs=1e-7)


def test_monotone_descent():
    rng = np.random.default_rng(46)
    xs = rng.uniform(0.3, 0.7, size=(50, 1))
    ys = rng.standard_cauchy(50)
    ys = np.clip(ys, -50, 50)
    cfg = make_cfg(
        h=0.4,
        degree=2,
        bound=30.0,
        optimizer=OptimizerSettings(record_objective=True),
    )
    res = fit_local(Dataset(x=xs, y=ys), cfg)
    path = np.array(res.objective_path)
    assert np.all(np.diff(path) <= 1e-15)


def test_bounded_influence_of_outliers():
    rng = np.random.default_rng(47)
    xs = rng.uniform(0.3, 0.7, size=(25, 1))
    ys = rng.normal(size=25)
    tight = OptimizerSettings(gradient_tolerance=1e-12)
    cfg = make_cfg(h=0.4, degree=0, bound=50.0, contrast=huber(1.0), optimizer=tight)
    base = fit_local(Dataset(x=xs, y=ys), cfg).estimate

    def estimate_with_bump(bump):
        y2 = ys.copy()
        y2[0] += bump
        return fit_local(Dataset(x=xs, y=y2), cfg).estimate

    gamma_change = abs(estimate_with_bump(1.0) - base)
    big_change = abs(estimate_with_bump(1e6) - base)
    bigger_change = abs(estimate_with_bump(1e9) - base)
    # once the outlier saturates the contrast, its influence stops growing
    assert big_change <= gamma_change + 1e-6
    assert abs(big_change - bigger_change) < 1e-8


def test_criterion_convexity_sampled():
    rng = np.random.default_rng(48)
    xs = rng.uniform(0.3, 0.7, size=(30, 1))
    ys = rng.normal(size=30)
    data = Dataset(x=xs, y=ys)
    cfg = make_cfg(h=0.4, degree=2)
    for _ in range(50):
        t1 = rng.normal(size=3)
        t2 = rng.normal(size=3)
        lam = rng.uniform()
        lhs = criterion(lam * t1 + (1 - lam) * t2, data, cfg)
        rhs = lam * criterion(t1, data, cfg) + (1 - lam) * criterion(t2, data, cfg)
        assert lhs <= rhs + 1e-12


def test_underdetermined_flag():
    data = Dataset(x=np.array([[0.5], [0.52]]), y=np.array([1.0, 1.1]))
    res = fit_local(data, make_cfg(degree=2, h=0.2))
    assert res.underdetermined
    assert res.n_local == 2


def test_absolute_contrast_fit_runs():
    # flagged contrasts remain usable in plain fitting
    rng = np.random.default_rng(49)
    xs = rng.uniform(0.3, 0.7, size=(21, 1))
    ys = rng.normal(size=21)
    res = fit_local(Dataset(x=xs, y=ys), make_cfg(h=0.4, degree=0, contrast=absolute()))
    assert abs(res.estimate - np.median(ys)) < 0.2
