"""scikit-learn style front end for the alpha tests."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from alphaq.exceptions import DomainError
from alphaq.regression import FactorPanel, ReturnPanel, fit_regression
from alphaq.statistics import (
    DEFAULT_BLOCK_SIZE,
    DEFAULT_VARRHO,
    DEFAULT_ZETA,
    build_B,
    run_alpha_tests,
)

__all__ = ["LqAlphaTest", "check_returns_factors"]

METHOD_FIELDS = {
    "L2": "p2",
    "L4": "p4",
    "L6": "p6",
    "Linf": "p_inf",
    "minP": "p_minp",
    "CC": "p_cauchy",
}


def _names(obj, attr):
    names = getattr(obj, attr, None)
    if names is None:
        return None
    return [str(x) for x in names]


def check_returns_factors(X, F):
    """Validate a ``T x N`` return matrix and ``T x p`` factor matrix.

    Pandas inputs keep their column labels as asset and factor names, and the
    return index as time labels.
    """
    asset_names = _names(X, "columns")
    time_names = _names(X, "index")
    # a default integer index stringifies out of order ("10" < "2")
    if time_names is not None and any(a >= b for a, b in zip(time_names, time_names[1:])):
        time_names = None
    factor_names = _names(F, "columns")
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=2)
    F = check_array(F, dtype=np.float64, ensure_2d=False)
    if F.ndim == 1:
        F = F[:, None]
    check_consistent_length(X, F)
    returns = ReturnPanel(X.T, asset_ids=asset_names, time_ids=time_names)
    factors = FactorPanel(F, factor_names=factor_names)
    return returns, factors


class LqAlphaTest(BaseEstimator):
    """Joint test that every asset's alpha is zero.

    Fitting runs time-series OLS of each asset on the factors and computes
    the L2, L4, L6 and max-type tests plus their min-p and Cauchy
    combinations.

    Parameters
    ----------
    zeta : float, default=0.05
        Level constant of the correlation threshold.
    varrho : float, default=1.0
        Exponent on ``N`` in the correlation threshold.
    block_size : int, default=256
        Rows per block when accumulating residual correlations.
    level : float, default=0.05
        Significance level used by :meth:`reject`.

    Attributes
    ----------
    report_ : TestReport
    alpha_ : ndarray of shape (n_assets,)
    t_stats_ : ndarray of shape (n_assets,)
    sigma2_ : ndarray of shape (n_assets,)
    residuals_ : ndarray of shape (n_periods, n_assets)
    B_ : ndarray of shape (3, 3)
        Plug-in covariance of the even-power statistics.
    p_values_ : dict
        Method name to p-value.
    """

    def __init__(self, zeta=DEFAULT_ZETA, varrho=DEFAULT_VARRHO,
                 block_size=DEFAULT_BLOCK_SIZE, level=0.05):
        self.zeta = zeta
        self.varrho = varrho
        self.block_size = block_size
        self.level = level

    def fit(self, X, F):
        """Fit on returns ``X`` (n_periods, n_assets) and factors ``F`` (n_periods, n_factors)."""
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {self.level}")
        returns, factors = check_returns_factors(X, F)
        fit = fit_regression(returns, factors)
        report = run_alpha_tests(
            returns, factors, zeta=self.zeta, varrho=self.varrho,
            block_size=self.block_size, fit=fit,
        )
        self.n_features_in_ = returns.n_assets
        self.asset_ids_ = np.asarray(returns.asset_ids)
        self.alpha_ = np.asarray(fit.alpha_hat)
        self.sigma2_ = np.asarray(fit.sigma2_hat)
        self.t_stats_ = np.asarray(fit.t_stats)
        self.residuals_ = np.asarray(fit.residuals).T
        self.w_T_ = fit.w_T
        self.dof_ = fit.v
        self.aggregates_ = report.aggregates
        self.B_ = np.array(build_B(report.aggregates, fit.v).values)
        self.report_ = report
        self.p_values_ = {m: getattr(report, f) for m, f in METHOD_FIELDS.items()}
        return self

    def reject(self, level=None):
        """Method name to whether the null is rejected (p strictly below ``level``)."""
        check_is_fitted(self, "report_")
        level = self.level if level is None else level
        return {m: p < level for m, p in self.p_values_.items()}

    def summary(self):
        try:
            check_is_fitted(self, "report_")
        except NotFittedError:
            return f"{type(self).__name__} (not fitted)"
        r = self.report_
        lines = [
            f"N={r.n_assets}  T={r.t_obs}  p={r.n_factors}  v={r.v}  "
            f"tau={r.aggregates.tau:.4f}  retained pairs={r.aggregates.retained_offdiag}",
            f"{'method':<6} {'stat':>12} {'p-value':>12}",
        ]
        stats = {"L2": r.t2, "L4": r.t4, "L6": r.t6, "Linf": r.m_gumbel, "minP": None, "CC": None}
        for m, p in self.p_values_.items():
            s = "" if stats[m] is None else f"{stats[m]:12.4f}"
            lines.append(f"{m:<6} {s:>12} {p:12.4g}")
        return "\n".join(lines)
