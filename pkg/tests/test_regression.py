import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from alphaq.exceptions import (
    DegenerateIntercept,
    DimensionMismatch,
    SingularDesign,
    ZeroResidualVariance,
)
from alphaq.regression import FactorPanel, ReturnPanel, fit_regression, residual_weight_vector

from conftest import gaussian_panel


def normal_equations(Y, F):
    """Reference OLS through (X'X)^-1 X'y, deliberately not via QR."""
    t = F.shape[0]
    X = np.column_stack([np.ones(t), F])
    coef = np.linalg.solve(X.T @ X, X.T @ Y.T)
    resid = Y - (X @ coef).T
    v = t - X.shape[1]
    s2 = np.sum(resid**2, axis=1) / v
    se_alpha = np.sqrt(s2 * np.linalg.inv(X.T @ X)[0, 0])
    return coef[0], s2, coef[0] / se_alpha, resid


class TestPanels:
    def test_default_labels(self):
        panel = ReturnPanel(np.zeros((2, 3)))
        assert panel.asset_ids == ("A0001", "A0002")
        assert panel.time_ids == ("t0001", "t0002", "t0003")

    def test_values_are_read_only(self):
        panel = ReturnPanel(np.ones((2, 3)))
        with pytest.raises(ValueError):
            panel.values[0, 0] = 2.0

    @pytest.mark.parametrize("kwargs", [
        {"values": np.full((2, 3), np.nan)},
        {"values": np.ones((2, 3)), "asset_ids": ["a", "a"]},
        {"values": np.ones((2, 3)), "time_ids": ["2", "1", "3"]},
        {"values": np.ones((2, 3)), "asset_ids": ["a"]},
    ])
    def test_invalid_panel(self, kwargs):
        with pytest.raises(DimensionMismatch):
            ReturnPanel(**kwargs)

    def test_factor_dimension(self):
        with pytest.raises(DimensionMismatch):
            FactorPanel(np.ones((3, 2)))


class TestWeightVector:
    def test_alternating_factor(self):
        b, w_T = residual_weight_vector(FactorPanel(np.array([[1.0], [-1.0], [1.0], [-1.0]])))
        assert w_T == pytest.approx(4.0)
        assert_allclose(b, 0.5, atol=1e-14)

    def test_zero_factor(self):
        with pytest.raises(SingularDesign):
            residual_weight_vector(FactorPanel(np.zeros((10, 1))))

    def test_constant_factor(self):
        with pytest.raises(DegenerateIntercept):
            residual_weight_vector(FactorPanel(np.full((10, 1), 3.0)))

    def test_unit_norm(self, rng):
        b, w_T = residual_weight_vector(FactorPanel(rng.normal(size=(40, 3))))
        assert np.sum(b**2) == pytest.approx(1.0, abs=1e-12)
        assert 0 < w_T <= 40


class TestFit:
    def test_against_normal_equations(self, rng):
        Y, F = gaussian_panel(rng, n=5, t=50, p=3)
        fit = fit_regression(ReturnPanel(Y), FactorPanel(F))
        a, s2, t, resid = normal_equations(Y, F)
        assert_allclose(fit.alpha_hat, a, rtol=1e-8, atol=1e-12)
        assert_allclose(fit.sigma2_hat, s2, rtol=1e-8)
        assert_allclose(fit.t_stats, t, rtol=1e-8, atol=1e-10)
        assert_allclose(fit.residuals, resid, atol=1e-8)
        assert fit.v == 46

    def test_stored_invariants(self, rng):
        Y, F = gaussian_panel(rng, n=8, t=30, p=2)
        fit = fit_regression(ReturnPanel(Y), FactorPanel(F))
        assert_allclose(fit.t_stats, np.sqrt(fit.w_T) * fit.alpha_hat / np.sqrt(fit.sigma2_hat), rtol=1e-14)
        X = np.column_stack([np.ones(30), F])
        inner = np.abs(fit.residuals @ X)
        bound = 1e-8 * np.outer(np.linalg.norm(fit.residuals, axis=1), np.linalg.norm(X, axis=0))
        assert np.all(inner <= bound)

    def test_constant_asset(self, rng):
        Y, F = gaussian_panel(rng, n=3, t=20, p=1)
        Y[1] = 0.7
        with pytest.raises(ZeroResidualVariance):
            fit_regression(ReturnPanel(Y), FactorPanel(F))

    def test_exact_linear_fit(self, rng):
        f = rng.normal(size=(25, 1))
        with pytest.raises(ZeroResidualVariance):
            fit_regression(ReturnPanel(2 + 3 * f[:, 0]), FactorPanel(f))

    def test_period_mismatch(self, rng):
        Y, F = gaussian_panel(rng, n=3, t=20, p=1)
        with pytest.raises(DimensionMismatch):
            fit_regression(ReturnPanel(Y), FactorPanel(F[:-1]))

    def test_collinear_factors(self, rng):
        Y, F = gaussian_panel(rng, n=3, t=20, p=1)
        with pytest.raises(SingularDesign):
            fit_regression(ReturnPanel(Y), FactorPanel(np.column_stack([F, 2 * F])))

    def test_shift_invariance(self, rng):
        Y, F = gaussian_panel(rng, n=6, t=40, p=2)
        base = fit_regression(ReturnPanel(Y), FactorPanel(F))
        shifted = fit_regression(ReturnPanel(Y + rng.normal(size=(6, 2)) @ F.T), FactorPanel(F))
        assert_allclose(shifted.alpha_hat, base.alpha_hat, atol=1e-8)
        assert_allclose(shifted.residuals, base.residuals, atol=1e-8)

    @pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
    def test_scale_equivariance(self, rng, c):
        Y, F = gaussian_panel(rng, n=4, t=40, p=2)
        base = fit_regression(ReturnPanel(Y), FactorPanel(F))
        Y2 = Y.copy()
        Y2[2] *= c
        scaled = fit_regression(ReturnPanel(Y2), FactorPanel(F))
        assert scaled.alpha_hat[2] == pytest.approx(c * base.alpha_hat[2], rel=1e-10)
        assert np.sqrt(scaled.sigma2_hat[2]) == pytest.approx(c * np.sqrt(base.sigma2_hat[2]), rel=1e-10)
        assert_allclose(scaled.t_stats, base.t_stats, rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("t,p", [(30, 1), (120, 3), (200, 2)])
    def test_single_asset_t_law(self, t, p):
        # assets are independent given F, so one wide fit gives 20,000 draws of t_1
        rng = np.random.default_rng(t * 10 + p)
        F = rng.normal(size=(t, p))
        Y = rng.normal(size=(20_000, t))
        fit = fit_regression(ReturnPanel(Y), FactorPanel(F))
        res = stats.kstest(fit.t_stats, stats.t(df=fit.v).cdf)
        assert res.pvalue > 0.01
