import numpy as np
import pytest

from survcobra.curves import evaluate, nelson_aalen
from survcobra.data import SurvivalDataset
from survcobra.learners import (
    breslow_baseline,
    cox_gradient,
    cox_log_partial_likelihood,
    fit_cox,
)
from helpers import random_dataset


def fd_gradient(x, times, events, beta, h=1e-5):
    grad = np.zeros_like(beta)
    for j in range(beta.size):
        up, down = beta.copy(), beta.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (
            cox_log_partial_likelihood(x, times, events, up)
            - cox_log_partial_likelihood(x, times, events, down)
        ) / (2 * h)
    return grad


def two_group_data(rng, n, hazard_ratio=np.e):
    """Exponential two-sample data: group 1 hazard = hazard_ratio * group 0."""
    group = (rng.uniform(size=n) < 0.5).astype(float)
    rate = np.where(group == 1.0, hazard_ratio, 1.0)
    times = rng.exponential(1.0 / rate)
    times = np.maximum(times, 1e-9)
    return SurvivalDataset(group[:, None], times, np.ones(n, dtype=int), ["g"])


def two_group_score_root(x, times, events):
    """Bisection root of the one-covariate partial-likelihood score,
    computed from explicit risk-set counts."""
    flat = x[:, 0]

    def score(b):
        total = 0.0
        for i in range(len(times)):
            if events[i] != 1:
                continue
            at_risk = times >= times[i]
            w = np.exp(b * flat[at_risk])
            total += flat[i] - float((w * flat[at_risk]).sum() / w.sum())
        return total

    lo, hi = -5.0, 5.0
    assert score(lo) > 0 > score(hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if score(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(5, 31))
            p = int(rng.integers(1, 6))
            ds = random_dataset(rng, n, p)
            beta = rng.normal(scale=0.5, size=p)
            analytic = cox_gradient(ds.x, ds.time, ds.event, beta)
            numeric = fd_gradient(ds.x, ds.time, ds.event, beta)
            assert np.max(np.abs(analytic - numeric)) < 1e-6


class TestRidge:
    def test_huge_penalty_kills_coefficients(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(rng, 60, 3)
        model = fit_cox(ds, "ridge", penalty=1e6)
        assert np.linalg.norm(model.beta_standardized) < 1e-3

    def test_monotone_ascent(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            ds = random_dataset(np.random.default_rng(seed), 50, 3)
            model = fit_cox(ds, "ridge", penalty=0.1)
            trace = np.asarray(model.objective_trace)
            assert np.all(np.diff(trace) >= -1e-9)

    def test_independent_covariate_shrinks_to_zero(self):
        # simulation oracle: the mean fitted coefficient of a noise covariate
        # stays within 3 standard errors of zero
        estimates = []
        for seed in range(25):
            rng = np.random.default_rng(1000 + seed)
            n = 120
            signal = rng.uniform(size=n)
            noise = rng.uniform(size=n)
            times = np.maximum(rng.exponential(1.0 / np.exp(signal)), 1e-9)
            ds = SurvivalDataset(
                np.column_stack([signal, noise]), times, np.ones(n, dtype=int), ["s", "n"]
            )
            estimates.append(fit_cox(ds, "ridge", penalty=1e-6).beta[1])
        estimates = np.asarray(estimates)
        stderr = estimates.std(ddof=1) / np.sqrt(len(estimates))
        assert abs(estimates.mean()) < 3 * stderr


class TestLasso:
    def test_agrees_with_ridge_at_zero_penalty(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            ds = random_dataset(np.random.default_rng(seed + 50), 60, 3)
            ridge = fit_cox(ds, "ridge", penalty=0.0)
            lasso = fit_cox(ds, "lasso", penalty=0.0)
            assert np.max(np.abs(ridge.beta_standardized - lasso.beta_standardized)) < 1e-4

    def test_two_group_log_hazard_ratio_recovery(self):
        rng = np.random.default_rng(29)
        ds = two_group_data(rng, 5000)
        model = fit_cox(ds, "lasso", penalty=1e-8)
        root = two_group_score_root(ds.x, ds.time, ds.event)
        assert abs(model.beta[0] - root) < 1e-3  # optimizer finds the score root
        assert abs(root - 1.0) < 0.1  # and the root recovers the truth
        assert abs(model.beta[0] - 1.0) < 0.1

    def test_support_shrinks_along_the_path(self):
        rng = np.random.default_rng(13)
        ds = random_dataset(rng, 80, 5)
        nonzeros = []
        for lam in [0.0, 0.5, 2.0, 8.0, 32.0, 128.0]:
            model = fit_cox(ds, "lasso", penalty=lam)
            nonzeros.append(int(np.sum(np.abs(model.beta_standardized) > 1e-10)))
        assert all(a >= b for a, b in zip(nonzeros, nonzeros[1:]))

    def test_monotone_ascent(self):
        for seed in range(5):
            ds = random_dataset(np.random.default_rng(seed + 200), 50, 4)
            model = fit_cox(ds, "lasso", penalty=0.3)
            trace = np.asarray(model.objective_trace)
            assert np.all(np.diff(trace) >= -1e-9)


class TestBaselineAndPrediction:
    def test_zero_beta_baseline_equals_nelson_aalen(self):
        rng = np.random.default_rng(21)
        ds = random_dataset(rng, 40, 2)
        model = fit_cox(ds, "ridge", penalty=1e12)  # beta effectively zero
        na = nelson_aalen(ds.time, ds.event)
        assert np.array_equal(model.baseline_cumhaz.times, na.times)
        assert np.allclose(model.baseline_cumhaz.values, na.values, atol=1e-9)

    def test_single_record_baseline_jump(self):
        ds = SurvivalDataset([[0.7]], [2.0], [1], ["x"])
        model = fit_cox(ds, "ridge", penalty=1.0)
        assert np.array_equal(model.baseline_cumhaz.times, [2.0])
        # the lone record sits at the feature mean, so its weight is exp(0)
        assert model.baseline_cumhaz.values[0] == pytest.approx(1.0)

    def test_prediction_at_feature_means_is_baseline_survival(self):
        rng = np.random.default_rng(31)
        ds = random_dataset(rng, 50, 3)
        model = fit_cox(ds, "ridge", penalty=0.5)
        curve = model.predict_curve(model.feature_means)
        assert np.allclose(curve.values, np.exp(-model.baseline_cumhaz.values))

    def test_breslow_recompute_matches_fit(self):
        rng = np.random.default_rng(33)
        ds = random_dataset(rng, 45, 2)
        model = fit_cox(ds, "ridge", penalty=0.2)
        again = breslow_baseline(model, ds)
        assert again == model.baseline_cumhaz

    def test_predict_values_matches_predict_curve(self):
        rng = np.random.default_rng(35)
        ds = random_dataset(rng, 40, 3)
        model = fit_cox(ds, "lasso", penalty=0.1)
        grid = np.linspace(0.0, 4.0, 9)
        queries = rng.uniform(size=(6, 3))
        batch = model.predict_values(queries, grid)
        for i in range(6):
            assert np.array_equal(batch[i], evaluate(model.predict_curve(queries[i]), grid))

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(37)
        model = fit_cox(random_dataset(rng, 30, 2), "ridge", penalty=1.0)
        with pytest.raises(ValueError, match="shape"):
            model.predict_curve([1.0, 2.0, 3.0])


class TestPenaltyCV:
    def test_default_penalty_is_selected_and_fits(self):
        rng = np.random.default_rng(41)
        ds = random_dataset(rng, 90, 3)
        model = fit_cox(ds, "ridge")
        assert model.penalty > 0.0
        assert model.n_features == 3
