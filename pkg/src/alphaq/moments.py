"""
Analytic moment formulas for studentized alphas.

Student-t even moments, the Gauss hypergeometric factor ``Lambda_{m,v}``,
the ``P_m`` polynomials, exact finite-``v`` variances of the even-power
statistics under Gaussian errors, and the leading Hermite cross-covariances.
These feed the plug-in covariance and double as test oracles.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import special

from alphaq.exceptions import (
    DomainError,
    HypergeometricOverflow,
    InvalidCorrelation,
    MomentUndefined,
    Nonconvergent,
)

__all__ = [
    "PAIR_COV_TABLE",
    "P_POLYNOMIALS",
    "student_even_moment",
    "gauss_2f1_mm",
    "lambda_mv",
    "pm_polynomial",
    "exact_gaussian_var_Q",
    "leading_gaussian_var_Q",
    "gaussian_cross_cov",
    "normal_cdf",
    "normal_sf",
    "normal_quantile",
]

# Cov(Z1^a - E Z^a, Z2^b - E Z^b) for standard normals with correlation rho,
# as coefficients on (rho^2, rho^4, rho^6).
PAIR_COV_TABLE = {
    (2, 2): (2.0, 0.0, 0.0),
    (2, 4): (12.0, 0.0, 0.0),
    (2, 6): (90.0, 0.0, 0.0),
    (4, 4): (72.0, 24.0, 0.0),
    (4, 6): (540.0, 360.0, 0.0),
    (6, 6): (4050.0, 5400.0, 720.0),
}

# coefficients on (1, rho^2, rho^4, rho^6)
P_POLYNOMIALS = {
    1: (1.0, 2.0, 0.0, 0.0),
    2: (9.0, 72.0, 24.0, 0.0),
    3: (225.0, 4050.0, 5400.0, 720.0),
}

_EVEN_POWERS = (2, 4, 6)
_SERIES_RTOL = 1e-16
_MAX_TERMS = 200_000


def _student_moment_exact(a: int, v: int) -> Fraction:
    # E|t_v|^a = v^{a/2} (a-1)!! / prod_{k=1}^{a/2} (v - 2k)
    m = a // 2
    num = Fraction(v) ** m
    for k in range(1, m + 1):
        num *= 2 * k - 1
        num /= v - 2 * k
    return num


def student_even_moment(a: int, v: int) -> float:
    """E(U^a) for U ~ t_v and a in {2, 4, 6}.

    Raises MomentUndefined when v <= a.
    """
    if a not in _EVEN_POWERS:
        raise DomainError(f"power must be one of {_EVEN_POWERS}, got {a}")
    if v <= a:
        raise MomentUndefined(f"E(t_v^{a}) is infinite for v={v} <= {a}")
    if isinstance(v, (int, np.integer)):
        return float(_student_moment_exact(a, int(v)))
    m = a // 2
    out = float(v) ** m
    for k in range(1, m + 1):
        out *= (2 * k - 1) / (v - 2 * k)
    return out


def _check_m(m):
    if m not in (1, 2, 3):
        raise DomainError(f"m must be 1, 2 or 3, got {m}")


def _series_2f1_mm(m, c, u):
    """Power series of 2F1(m, m; c; u) for an array of u in [0, 1)."""
    u = np.asarray(u, dtype=float)
    total = np.ones_like(u)
    term = np.ones_like(u)
    active = np.ones(u.shape, dtype=bool)
    k = 0
    while k < _MAX_TERMS:
        term = term * ((m + k) * (m + k) / ((c + k) * (k + 1.0))) * u
        total = total + term
        k += 1
        active = term > _SERIES_RTOL * total
        if not active.any():
            return total, active
    return total, active


def gauss_2f1_mm(m: int, c: float, u):
    """Gauss hypergeometric 2F1(m, m; c; u) for 0 <= u < 1.

    Summed directly from the power series, stopping once the next term falls
    below 1e-16 of the partial sum. Entries whose series has not settled after
    200,000 terms (``u`` extremely close to 1) are handed to
    ``scipy.special.hyp2f1``.

    Parameters
    ----------
    m : int
        Upper parameters, both equal, in {1, 2, 3}.
    c : float
        Lower parameter, positive.
    u : float or array_like
        Argument(s) in [0, 1).
    """
    _check_m(m)
    if c <= 0:
        raise DomainError(f"c must be positive, got {c}")
    arr = np.asarray(u, dtype=float)
    if np.any(arr >= 1.0):
        raise Nonconvergent("series for 2F1 diverges or needs the closed form at u >= 1")
    if np.any(arr < 0.0):
        raise DomainError("u must lie in [0, 1)")
    if c - 2 * m <= 0 and np.any(arr > 1.0 - 1e-6):
        raise HypergeometricOverflow(
            f"2F1({m},{m};{c};u) blows up as u -> 1 when c <= 2m"
        )
    total, unsettled = _series_2f1_mm(m, float(c), arr)
    if np.any(unsettled):
        total = np.where(unsettled, special.hyp2f1(m, m, c, arr), total)
    if np.ndim(u) == 0:
        return float(total)
    return total


def _log_gamma_prefactor(m, v):
    half = v / 2.0
    return 2 * m * np.log(half) + 2.0 * (special.gammaln(half - m) - special.gammaln(half))


def _log_2f1_at_one(m, c):
    # Gauss summation: Gamma(c) Gamma(c - 2m) / Gamma(c - m)^2
    return special.gammaln(c) + special.gammaln(c - 2 * m) - 2.0 * special.gammaln(c - m)


def lambda_mv(m: int, v, u):
    r"""Evaluate :math:`\Lambda_{m,v}(u)`.

    .. math::

        \Lambda_{m,v}(u) = (v/2)^{2m} \frac{\Gamma(v/2-m)^2}{\Gamma(v/2)^2}
        \, {}_2F_1(m, m; v/2; u)

    At ``u == 1`` the hypergeometric factor uses the Gauss closed form, which
    needs ``v > 4m``. Gamma ratios go through ``gammaln`` so ``v`` may be large.
    """
    _check_m(m)
    if v <= 2 * m:
        raise MomentUndefined(f"Lambda_{m},v needs v > {2 * m}, got v={v}")
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("u must lie in [0, 1]")
    c = v / 2.0
    at_one = arr == 1.0
    if np.any(at_one) and v <= 4 * m:
        raise Nonconvergent(f"2F1({m},{m};v/2;1) diverges for v={v} <= {4 * m}")
    log_pref = _log_gamma_prefactor(m, v)
    hyp = np.empty_like(arr)
    if np.any(~at_one):
        hyp[~at_one] = gauss_2f1_mm(m, c, arr[~at_one])
    if np.any(at_one):
        hyp[at_one] = np.exp(_log_2f1_at_one(m, c))
    out = np.exp(log_pref) * hyp
    if np.ndim(u) == 0:
        return float(out)
    return out


def pm_polynomial(m: int, rho):
    """P_m(rho): 1+2r^2, 9+72r^2+24r^4, or 225+4050r^2+5400r^4+720r^6."""
    _check_m(m)
    c0, c2, c4, c6 = P_POLYNOMIALS[m]
    r2 = np.square(rho)
    return c0 + r2 * (c2 + r2 * (c4 + r2 * c6))


def gaussian_cross_cov(a: int, b: int, rho):
    """Cov(Z1^a, Z2^b) for standard bivariate normals with correlation rho."""
    if a not in _EVEN_POWERS or b not in _EVEN_POWERS:
        raise DomainError(f"powers must be in {_EVEN_POWERS}, got ({a}, {b})")
    key = (a, b) if a <= b else (b, a)
    c2, c4, c6 = PAIR_COV_TABLE[key]
    r2 = np.square(rho)
    return r2 * (c2 + r2 * (c4 + r2 * c6))


def _validate_correlation(R):
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InvalidCorrelation(f"correlation matrix must be square, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise InvalidCorrelation("correlation matrix has non-finite entries")
    if np.any(np.abs(np.diag(R) - 1.0) > 1e-12):
        raise InvalidCorrelation("correlation matrix must have unit diagonal")
    if np.any(np.abs(R) > 1.0 + 1e-12):
        raise InvalidCorrelation("correlation entries must lie in [-1, 1]")
    if np.max(np.abs(R - R.T)) > 1e-12:
        raise InvalidCorrelation("correlation matrix must be symmetric")
    return np.clip(R, -1.0, 1.0)


def exact_gaussian_var_Q(R, v: int, a: int) -> float:
    """Exact null variance of the centred ``a``-th power statistic.

    Valid for jointly Gaussian errors with correlation matrix ``R`` and ``v``
    residual degrees of freedom::

        Var(Q_a) = N^-1 sum_ij { P_m(r_ij) Lambda_{m,v}(r_ij^2) - mu_{a,v}^2 }

    with ``a = 2m``. Requires ``v > 12``.
    """
    if a not in _EVEN_POWERS:
        raise DomainError(f"power must be one of {_EVEN_POWERS}, got {a}")
    if v <= 12:
        raise MomentUndefined(f"exact variance requires v > 12, got v={v}")
    R = _validate_correlation(R)
    m = a // 2
    n = R.shape[0]
    # each unordered pair appears twice; evaluate the upper triangle once
    iu = np.triu_indices(n, k=1)
    r = R[iu]
    mu2 = student_even_moment(a, v) ** 2
    diag_term = pm_polynomial(m, 1.0) * lambda_mv(m, v, 1.0) - mu2
    total = n * diag_term
    if r.size:
        u = np.square(r)
        off = pm_polynomial(m, r) * lambda_mv(m, v, u) - mu2
        total += 2.0 * float(np.sum(off))
    return float(total / n)


def leading_gaussian_var_Q(R, a: int) -> float:
    """Large-``v`` limit of :func:`exact_gaussian_var_Q`."""
    R = _validate_correlation(R)
    return float(np.sum(gaussian_cross_cov(a, a, R)) / R.shape[0])


def normal_cdf(x):
    return special.ndtr(x)


def normal_sf(x):
    """Upper tail 1 - Phi(x), accurate far into the right tail."""
    return special.ndtr(np.negative(x))


def normal_quantile(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~(arr < 1.0)):
        raise DomainError("normal quantile needs p strictly inside (0, 1)")
    return special.ndtri(p)
