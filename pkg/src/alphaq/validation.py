"""
Self-checks of the analytic moment layer against independent oracles.

Exact rational moments, a high-precision hypergeometric series, bivariate
Gauss-Hermite quadrature, and Monte Carlo draws of Student-t variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from alphaq.moments import (
    PAIR_COV_TABLE,
    gauss_2f1_mm,
    gaussian_cross_cov,
    lambda_mv,
    normal_cdf,
    normal_quantile,
    pm_polynomial,
    student_even_moment,
)

__all__ = [
    "Check",
    "student_moment_rational",
    "hermite_cross_cov_quadrature",
    "hyp2f1_reference",
    "mc_power_variance",
    "run_all",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def student_moment_rational(a, v):
    """E(t_v^a) for any even ``a < v`` as an exact fraction (odd double factorial form)."""
    num = Fraction(v) ** (a // 2)
    for k in range(1, a // 2 + 1):
        num *= Fraction(2 * k - 1, v - 2 * k)
    return num


def hermite_cross_cov_quadrature(a, b, rho, nodes=80):
    """Cov(Z1^a, Z2^b) by tensor Gauss-Hermite quadrature on independent normals."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    z1 = X
    z2 = rho * X + math.sqrt(max(0.0, 1.0 - rho * rho)) * Y
    joint = float(np.sum(W * z1**a * z2**b))
    m_a = float(np.sum(w * x**a))
    m_b = float(np.sum(w * x**b))
    return joint - m_a * m_b


def hyp2f1_reference(m, c, u, dps=40):
    with mpmath.workdps(dps):
        return float(mpmath.hyp2f1(m, m, c, u))


def mc_power_variance(v, m, draws, rng, chunk=1_000_000):
    """Sample variance of ``t_v^(2m)`` and its standard error.

    The standard error is that of the sample variance, estimated from the
    fourth central moment of the draws.
    """
    total = 0
    s1 = 0.0
    vals = []
    while total < draws:
        n = min(chunk, draws - total)
        t = rng.standard_t(v, size=n)
        y = t ** (2 * m)
        vals.append(y)
        total += n
        s1 += float(np.sum(y))
    y = np.concatenate(vals)
    mean = s1 / draws
    d2 = (y - mean) ** 2
    var = float(np.mean(d2)) * draws / (draws - 1)
    se = float(np.std(d2, ddof=1)) / math.sqrt(draws)
    return var, se


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def check_student_moments():
    out = []
    expected = {(2, 12): Fraction(6, 5), (4, 12): Fraction(27, 5), (6, 12): Fraction(54)}
    for (a, v), want in expected.items():
        got = student_even_moment(a, v)
        out.append(Check(f"mu_{a},{v}", abs(got - float(want)) <= 1e-12, f"{got!r} vs {want}"))
    for v in (7, 13, 25, 101):
        for a in (2, 4, 6):
            got = student_even_moment(a, v)
            want = float(student_moment_rational(a, v))
            out.append(Check(f"mu_{a},{v} rational", _rel(got, want) <= 1e-13, f"{got!r}"))
    return out


def check_hypergeometric():
    out = []
    for m, c, u in [(1, 5.0, 0.3), (2, 10.0, 0.25), (3, 7.5, 0.9), (1, 6.0, 0.999), (3, 30.0, 0.64)]:
        got = gauss_2f1_mm(m, c, u)
        want = hyp2f1_reference(m, c, u)
        out.append(Check(f"2F1({m},{m};{c};{u})", _rel(got, want) <= 1e-12, f"rel err {_rel(got, want):.2e}"))
    # Gauss summation at u = 1 through Lambda, against E(t^4m) / P_m(1)
    for v in (14, 20, 30, 60):
        for m in (1, 2, 3):
            lam = lambda_mv(m, v, 1.0)
            want = float(student_moment_rational(4 * m, v)) / pm_polynomial(m, 1.0)
            out.append(Check(f"Lambda_{m},{v}(1) = mu_{4 * m},{v}/P_{m}(1)", _rel(lam, want) <= 1e-11,
                             f"rel err {_rel(lam, want):.2e}"))
    for v in (14, 20, 60):
        lam0 = lambda_mv(1, v, 0.0)
        want = student_even_moment(2, v) ** 2
        out.append(Check(f"Lambda_1,{v}(0) = mu_2,{v}^2", _rel(lam0, want) <= 1e-12))
    grid = np.linspace(0.0, 0.99, 100)
    for m, v in [(1, 14), (2, 20), (3, 14), (3, 61)]:
        vals = lambda_mv(m, v, grid)
        out.append(Check(f"Lambda_{m},{v} increasing on [0, 0.99]", bool(np.all(np.diff(vals) > 0))))
    return out


def check_hermite(nodes=80):
    out = []
    for a, b in PAIR_COV_TABLE:
        for rho in (0.0, 0.25, 0.5, 0.9):
            got = float(gaussian_cross_cov(a, b, rho))
            want = hermite_cross_cov_quadrature(a, b, rho, nodes)
            err = abs(got - want) / max(abs(want), 1.0)
            out.append(Check(f"Cov(Z1^{a}, Z2^{b}) rho={rho}", err <= 1e-8, f"{got:.10g} vs {want:.10g}"))
    return out


def check_normal():
    out = []
    ps = np.concatenate([np.logspace(-15, -1, 29), np.linspace(0.1, 0.9, 9), 1 - np.logspace(-1, -15, 29)])
    err = np.max(np.abs(normal_cdf(normal_quantile(ps)) - ps))
    out.append(Check("Phi(Phi^-1(p)) round trip", err <= 1e-12, f"max err {err:.2e}"))
    z = float(normal_quantile(0.975))
    out.append(Check("Phi^-1(0.975)", abs(z - 1.959963984540054) <= 1e-9, repr(z)))
    # tail series 1 - Phi(x) ~ phi(x)/x (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
    x = 8.0
    tail = math.exp(-x * x / 2) / (x * math.sqrt(2 * math.pi)) * (1 - 1 / x**2 + 3 / x**4 - 15 / x**6 + 105 / x**8)
    got = float(normal_cdf(-x))
    out.append(Check("Phi(-8)", _rel(got, tail) <= 1e-3, f"{got:.6g} vs {tail:.6g}"))
    return out


def check_monte_carlo(draws=1_000_000, seed=12345, n_se=4.0):
    out = []
    rng = np.random.default_rng(seed)
    for v in (14, 20, 30, 60):
        for m in (1, 2, 3):
            exact = pm_polynomial(m, 1.0) * lambda_mv(m, v, 1.0) - student_even_moment(2 * m, v) ** 2
            var, se = mc_power_variance(v, m, draws, rng)
            z = (var - exact) / se
            out.append(Check(f"Var(t_{v}^{2 * m}) Monte Carlo", abs(z) <= n_se,
                             f"exact {exact:.6g}, MC {var:.6g}, z={z:+.2f}"))
    return out


def run_all(mc_draws=0, seed=12345):
    """Run every oracle check; Monte Carlo ones only when ``mc_draws > 0``."""
    checks = check_student_moments() + check_hypergeometric() + check_hermite() + check_normal()
    if mc_draws:
        checks += check_monte_carlo(mc_draws, seed)
    return checks
