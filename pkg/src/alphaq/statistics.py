"""
L_q-norm alpha tests and their combinations.

The even-power statistics ``Q_a`` (a = 2, 4, 6) are standardized with a
thresholded plug-in covariance, the max statistic is calibrated with its
Gumbel limit, and the pieces are merged through a min-p rule and a four-way
Cauchy combination.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from alphaq.exceptions import (
    DomainError,
    EmptyInput,
    MomentUndefined,
    NonpositiveVariance,
    TooFewAssets,
    ZeroResidualVariance,
)
from alphaq.moments import normal_quantile, normal_sf, student_even_moment
from alphaq.regression import FactorPanel, ReturnPanel, fit_regression

__all__ = [
    "CorrelationAggregates",
    "BMatrix",
    "TestReport",
    "compute_Q",
    "threshold_level",
    "residual_correlation_aggregates",
    "build_B",
    "standardize",
    "max_test",
    "gumbel_sf",
    "cauchy_combination",
    "minp_combination",
    "run_alpha_tests",
    "DEFAULT_ZETA",
    "DEFAULT_VARRHO",
    "DEFAULT_BLOCK_SIZE",
]

DEFAULT_ZETA = 0.05
DEFAULT_VARRHO = 1.0
DEFAULT_BLOCK_SIZE = 256
P_CLAMP = 1e-15
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class CorrelationAggregates:
    """Power sums ``s_2k = N^-1 sum_ij r~_ij^2k`` of the thresholded residual correlations."""

    s2: float
    s4: float
    s6: float
    s8: float
    tau: float
    retained_offdiag: int
    n_assets: int

    @classmethod
    def identity(cls, n_assets, tau=0.0):
        return cls(1.0, 1.0, 1.0, 1.0, tau, 0, n_assets)


@dataclass(frozen=True)
class BMatrix:
    """Plug-in covariance of ``(Q_2, Q_4, Q_6)``, indexed in that order."""

    values: np.ndarray
    v: float

    def __getitem__(self, key):
        a, b = key
        idx = {2: 0, 4: 1, 6: 2}
        return float(self.values[idx[a], idx[b]])

    @property
    def diag(self):
        return np.diag(self.values).copy()


@dataclass(frozen=True)
class TestReport:
    q2: float
    q4: float
    q6: float
    t2: float
    t4: float
    t6: float
    l_inf: float
    m_gumbel: float
    p2: float
    p4: float
    p6: float
    p_inf: float
    p_minp: float
    p_cauchy: float
    n_assets: int
    t_obs: int
    n_factors: int
    v: int
    aggregates: CorrelationAggregates

    __test__ = False  # not a pytest class

    P_VALUE_FIELDS = ("p2", "p4", "p6", "p_inf", "p_minp", "p_cauchy")

    def p_values(self):
        return {name: getattr(self, name) for name in self.P_VALUE_FIELDS}

    def to_dict(self):
        """Flat mapping; the aggregate fields are inlined."""
        out = asdict(self)
        agg = out.pop("aggregates")
        out.update(agg)
        return out

    def to_json(self, indent=None):
        # json writes floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict(), indent=indent)


def compute_Q(t_stats, v):
    """Centred even-power sums ``N^-1/2 sum_i (t_i^a - mu_{a,v})`` for a = 2, 4, 6."""
    t = np.asarray(t_stats, dtype=float).ravel()
    if t.size == 0:
        raise EmptyInput("no t statistics")
    if v <= 6:
        raise MomentUndefined(f"need v > 6 for the sixth moment, got v={v}")
    n = t.size
    t2 = t * t
    t4 = t2 * t2
    t6 = t4 * t2
    root = math.sqrt(n)
    q2 = (np.sum(t2) - n * student_even_moment(2, v)) / root
    q4 = (np.sum(t4) - n * student_even_moment(4, v)) / root
    q6 = (np.sum(t6) - n * student_even_moment(6, v)) / root
    return float(q2), float(q4), float(q6)


def threshold_level(n_assets, v, zeta=DEFAULT_ZETA, varrho=DEFAULT_VARRHO):
    """Bonferroni-type cutoff ``v^-1/2 Phi^-1(1 - zeta N^-varrho / 2)``."""
    if n_assets < 2:
        raise TooFewAssets(f"threshold needs N >= 2, got {n_assets}")
    if v < 2:
        raise DomainError(f"threshold needs v >= 2, got {v}")
    if not 0.0 < zeta < 1.0:
        raise DomainError(f"zeta must lie in (0, 1), got {zeta}")
    if varrho < 0:
        raise DomainError(f"varrho must be nonnegative, got {varrho}")
    tail = zeta * float(n_assets) ** (-varrho) / 2.0
    if tail >= 1.0:
        raise DomainError("zeta * N^-varrho / 2 must be below 1")
    return float(normal_quantile(1.0 - tail) / math.sqrt(v))


def residual_correlation_aggregates(residuals, tau, block_size=DEFAULT_BLOCK_SIZE):
    """Stream thresholded residual correlations into their power sums.

    Only the upper triangle is visited, ``block_size`` rows at a time, so the
    full N x N matrix never exists in memory. Entries with ``|r| <= tau`` are
    zeroed; the diagonal counts as exactly one.
    """
    E = np.asarray(residuals, dtype=float)
    if E.ndim != 2 or E.shape[0] < 1:
        raise EmptyInput(f"residuals must be a non-empty N x T matrix, got shape {E.shape}")
    if block_size < 1:
        raise DomainError("block_size must be positive")
    norms = np.sqrt(np.einsum("ij,ij->i", E, E))
    if np.any(norms <= 1e-14):
        raise ZeroResidualVariance("a residual row has (numerically) zero norm")
    U = E / norms[:, None]
    n = U.shape[0]

    sums = [0.0, 0.0, 0.0, 0.0]
    retained = 0
    for i0 in range(0, n, block_size):
        i1 = min(i0 + block_size, n)
        G = U[i0:i1] @ U[i0:].T
        # keep j > i only
        rows = np.arange(i1 - i0)[:, None]
        cols = np.arange(n - i0)[None, :]
        upper = cols > rows
        keep = upper & (np.abs(G) > tau)
        r2 = np.square(G[keep])
        retained += int(r2.size)
        if r2.size:
            r4 = r2 * r2
            sums[0] += float(np.sum(r2))
            sums[1] += float(np.sum(r4))
            sums[2] += float(np.sum(r4 * r2))
            sums[3] += float(np.sum(r4 * r4))
    s2, s4, s6, s8 = ((n + 2.0 * s) / n for s in sums)
    return CorrelationAggregates(
        s2=s2, s4=s4, s6=s6, s8=s8, tau=float(tau), retained_offdiag=retained, n_assets=n
    )


def build_B(agg: CorrelationAggregates, v) -> BMatrix:
    """Plug-in covariance of the even-power statistics with first-order 1/v corrections."""
    if v <= 12:
        raise MomentUndefined(f"the plug-in covariance needs v > 12, got v={v}")
    s2, s4, s6, s8 = agg.s2, agg.s4, agg.s6, agg.s8
    b22 = 2.0 * s2 + (10.0 * s2 + 4.0 * s4) / v
    b24 = 12.0 * s2
    b26 = 90.0 * s2
    b44 = 72.0 * s2 + 24.0 * s4 + (936.0 * s2 + 864.0 * s4 + 192.0 * s6) / v
    b46 = 540.0 * s2 + 360.0 * s4
    b66 = (
        4050.0 * s2
        + 5400.0 * s4
        + 720.0 * s6
        + (101250.0 * s2 + 202500.0 * s4 + 114480.0 * s6 + 12960.0 * s8) / v
    )
    values = np.array(
        [
            [b22, b24, b26],
            [b24, b44, b46],
            [b26, b46, b66],
        ]
    )
    values.setflags(write=False)
    return BMatrix(values=values, v=v)


def standardize(q, B: BMatrix):
    """Return ``(t2, t4, t6)`` and the upper-tail normal p-values."""
    diag = np.diag(B.values) if isinstance(B, BMatrix) else np.diag(np.asarray(B, dtype=float))
    if np.any(~(diag > 0.0)):
        raise NonpositiveVariance(f"covariance diagonal must be positive, got {diag}")
    t = np.asarray(q, dtype=float) / np.sqrt(diag)
    p = normal_sf(t)
    return tuple(float(x) for x in t), tuple(float(x) for x in p)


def gumbel_sf(x):
    """Survival function of the limit law ``exp(-pi^-1/2 exp(-x/2))``."""
    return -np.expm1(-_INV_SQRT_PI * np.exp(-np.asarray(x, dtype=float) / 2.0))


def max_test(t_stats):
    """Return ``(l_inf, m_gumbel, p_inf)`` for the maximum squared t statistic."""
    t = np.asarray(t_stats, dtype=float).ravel()
    n = t.size
    if n < 3:
        raise TooFewAssets(f"the max test needs N >= 3, got {n}")
    l_inf = float(np.max(t * t))
    log_n = math.log(n)
    m = l_inf - 2.0 * log_n + math.log(log_n)
    return l_inf, m, float(gumbel_sf(m))


def cauchy_combination(p_values):
    """Equal-weight Cauchy combination; returns ``(t_c, p_combined)``."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise EmptyInput("need at least one p-value")
    p = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    t_c = float(np.mean(np.tan(np.pi * (0.5 - p))))
    # arctan(1/t)/pi == 1/2 - arctan(t)/pi for t > 0, without cancellation
    if t_c > 1.0:
        p_c = math.atan(1.0 / t_c) / math.pi
    else:
        p_c = 0.5 - math.atan(t_c) / math.pi
    return t_c, p_c


def minp_combination(p2, p_inf):
    """min(p2, p_inf) calibrated as if the two p-values were independent uniforms."""
    m = min(float(p2), float(p_inf))
    if not 0.0 <= m <= 1.0:
        raise DomainError(f"p-values must lie in [0, 1], got {p2}, {p_inf}")
    return m * (2.0 - m)


def run_alpha_tests(
    panel,
    factors,
    zeta=DEFAULT_ZETA,
    varrho=DEFAULT_VARRHO,
    block_size=DEFAULT_BLOCK_SIZE,
    fit=None,
):
    """Run the six tests on one panel.

    Parameters
    ----------
    panel : ReturnPanel or array_like
        N x T excess returns.
    factors : FactorPanel or array_like
        T x p observed factors.
    zeta, varrho : float
        Threshold constants for the residual correlations.
    block_size : int
        Row block used when streaming residual correlations.
    fit : RegressionFit, optional
        Precomputed regression, skipping the OLS step.

    Returns
    -------
    TestReport
    """
    if not isinstance(panel, ReturnPanel):
        panel = ReturnPanel(panel)
    if not isinstance(factors, FactorPanel):
        factors = FactorPanel(factors)
    if fit is None:
        fit = fit_regression(panel, factors)
    n = fit.n_assets
    v = fit.v
    if n < 3:
        raise TooFewAssets(f"need at least 3 assets, got {n}")

    q = compute_Q(fit.t_stats, v)
    tau = threshold_level(n, v, zeta, varrho)
    agg = residual_correlation_aggregates(fit.residuals, tau, block_size=block_size)
    B = build_B(agg, v)
    (t2, t4, t6), (p2, p4, p6) = standardize(q, B)
    l_inf, m_gumbel, p_inf = max_test(fit.t_stats)
    p_minp = minp_combination(p2, p_inf)
    _, p_cauchy = cauchy_combination([p2, p4, p6, p_inf])
    return TestReport(
        q2=q[0],
        q4=q[1],
        q6=q[2],
        t2=t2,
        t4=t4,
        t6=t6,
        l_inf=l_inf,
        m_gumbel=m_gumbel,
        p2=p2,
        p4=p4,
        p6=p6,
        p_inf=p_inf,
        p_minp=float(p_minp),
        p_cauchy=float(p_cauchy),
        n_assets=n,
        t_obs=panel.n_periods,
        n_factors=factors.n_factors,
        v=v,
        aggregates=agg,
    )
