"""Per-asset time-series OLS of excess returns on observed factors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from alphaq.exceptions import (
    DegenerateIntercept,
    DimensionMismatch,
    SingularDesign,
    ZeroResidualVariance,
)

__all__ = [
    "ReturnPanel",
    "FactorPanel",
    "RegressionFit",
    "residual_weight_vector",
    "fit_regression",
]

RANK_RTOL = 1e-10
ZERO_VARIANCE_TOL = 1e-14


def _default_ids(prefix, n):
    width = max(4, len(str(n)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(1, n + 1))


@dataclass(frozen=True)
class ReturnPanel:
    """Excess returns, one row per asset and one column per period."""

    values: np.ndarray
    asset_ids: Sequence[str] = field(default=None)
    time_ids: Sequence[str] = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatch(f"returns must be a non-empty N x T matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("returns contain missing or non-finite entries")
        values.setflags(write=False)
        n, t = values.shape
        asset_ids = self.asset_ids
        time_ids = self.time_ids
        asset_ids = _default_ids("A", n) if asset_ids is None else tuple(str(a) for a in asset_ids)
        time_ids = _default_ids("t", t) if time_ids is None else tuple(str(s) for s in time_ids)
        if len(asset_ids) != n:
            raise DimensionMismatch(f"{len(asset_ids)} asset ids for {n} assets")
        if len(time_ids) != t:
            raise DimensionMismatch(f"{len(time_ids)} time ids for {t} periods")
        if len(set(asset_ids)) != n:
            raise DimensionMismatch("asset ids must be unique")
        if any(a >= b for a, b in zip(time_ids, time_ids[1:])):
            raise DimensionMismatch("time ids must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "asset_ids", asset_ids)
        object.__setattr__(self, "time_ids", time_ids)

    @property
    def n_assets(self) -> int:
        return self.values.shape[0]

    @property
    def n_periods(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FactorPanel:
    """Observed factors, one row per period and one column per factor."""

    values: np.ndarray
    factor_names: Sequence[str] = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise DimensionMismatch(f"factors must be a T x p matrix with p >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("factors contain missing or non-finite entries")
        t, p = values.shape
        if p + 1 >= t:
            raise DimensionMismatch(f"need T > p + 1 for positive degrees of freedom, got T={t}, p={p}")
        values.setflags(write=False)
        names = self.factor_names
        names = _default_ids("F", p) if names is None else tuple(str(s) for s in names)
        if len(names) != p:
            raise DimensionMismatch(f"{len(names)} factor names for {p} factors")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "factor_names", names)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RegressionFit:
    alpha_hat: np.ndarray
    sigma2_hat: np.ndarray
    t_stats: np.ndarray
    residuals: np.ndarray
    w_T: float
    v: int

    @property
    def n_assets(self) -> int:
        return self.alpha_hat.shape[0]


def _check_rank(mat, what):
    s = np.linalg.svd(mat, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0] or s[0] == 0.0:
        raise SingularDesign(f"{what} is numerically rank deficient (condition {s[0] / max(s[-1], 1e-300):.3g})")


def _factor_projection(F):
    """Orthonormal basis of span(F) and w_T = 1' M_F 1."""
    t = F.shape[0]
    _check_rank(F, "factor matrix F")
    q_f, _ = np.linalg.qr(F)
    ones = np.ones(t)
    proj = q_f.T @ ones
    resid = ones - q_f @ proj
    w_T = float(resid @ resid)
    if w_T <= 1e-12 * t:
        raise DegenerateIntercept("the intercept lies (numerically) in the span of the factors")
    return q_f, resid, w_T


def residual_weight_vector(factors: FactorPanel):
    """Return ``(b, w_T)`` with ``b = M_F 1 / sqrt(w_T)`` and ``w_T = 1' M_F 1``."""
    if not isinstance(factors, FactorPanel):
        factors = FactorPanel(factors)
    _, resid, w_T = _factor_projection(factors.values)
    return resid / np.sqrt(w_T), w_T


def fit_regression(panel: ReturnPanel, factors: FactorPanel) -> RegressionFit:
    """OLS of every asset's returns on ``[1, F]``.

    The regression is solved through a QR decomposition of the augmented
    design; the intercept and residuals coincide with the residual-maker
    formulation ``alpha_i = 1' M_F Y_i / w_T`` and ``e_i = M_F (Y_i - alpha_i)``.

    Raises
    ------
    DimensionMismatch
        If panel and factors disagree on the number of periods.
    SingularDesign, DegenerateIntercept
        If the design is rank deficient.
    ZeroResidualVariance
        If some asset is fitted exactly.
    """
    if not isinstance(panel, ReturnPanel):
        panel = ReturnPanel(panel)
    if not isinstance(factors, FactorPanel):
        factors = FactorPanel(factors)
    Y = panel.values
    F = factors.values
    n, t = Y.shape
    if F.shape[0] != t:
        raise DimensionMismatch(f"returns have T={t} periods but factors have {F.shape[0]}")
    p = F.shape[1]
    v = t - p - 1

    _, m1, w_T = _factor_projection(F)
    X = np.column_stack([np.ones(t), F])
    _check_rank(X, "design [1, F]")
    q_x, _ = np.linalg.qr(X)

    # alpha_i = <M_F 1, Y_i> / w_T
    alpha_hat = (Y @ m1) / w_T
    residuals = Y - (Y @ q_x) @ q_x.T
    rss = np.einsum("ij,ij->i", residuals, residuals)
    sigma2_hat = rss / v

    scale = np.maximum(1.0, np.einsum("ij,ij->i", Y, Y) / t)
    bad = sigma2_hat <= ZERO_VARIANCE_TOL * scale
    if np.any(bad):
        ids = [panel.asset_ids[i] for i in np.flatnonzero(bad)[:5]]
        raise ZeroResidualVariance(f"assets with (numerically) zero residual variance: {ids}")

    t_stats = np.sqrt(w_T) * alpha_hat / np.sqrt(sigma2_hat)
    for arr in (alpha_hat, sigma2_hat, t_stats, residuals):
        arr.setflags(write=False)
    return RegressionFit(
        alpha_hat=alpha_hat,
        sigma2_hat=sigma2_hat,
        t_stats=t_stats,
        residuals=residuals,
        w_T=w_T,
        v=v,
    )
