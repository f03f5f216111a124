import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from alphaq.exceptions import DomainError, MomentUndefined, NonpositiveVariance, TooFewAssets
from alphaq.regression import FactorPanel, ReturnPanel, fit_regression
from alphaq.statistics import (
    BMatrix,
    CorrelationAggregates,
    build_B,
    cauchy_combination,
    compute_Q,
    gumbel_sf,
    max_test,
    minp_combination,
    residual_correlation_aggregates,
    run_alpha_tests,
    standardize,
    threshold_level,
)

from conftest import gaussian_panel


def rows_with_correlation(r, t=500):
    """Two exactly orthonormal-based rows whose sample correlation is ``r``."""
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(t, 2)))
    return np.vstack([q[:, 0], r * q[:, 0] + math.sqrt(1 - r * r) * q[:, 1]])


class TestQ:
    def test_zero_t(self):
        assert_allclose(compute_Q(np.zeros(4), 10), (-2.5, -12.5, -156.25), rtol=1e-14)

    def test_hand_value(self):
        assert compute_Q([1.0, -1.0, 2.0], 10)[0] == pytest.approx(2.25 / math.sqrt(3), rel=1e-14)

    def test_exact_centering(self):
        t = np.full(8, math.sqrt(1.25))
        assert compute_Q(t, 10)[0] == pytest.approx(0.0, abs=1e-13)

    def test_needs_sixth_moment(self):
        with pytest.raises(MomentUndefined):
            compute_Q([1.0, 2.0], 6)


class TestThreshold:
    def test_values(self):
        assert threshold_level(200, 116) == pytest.approx(3.6623 / math.sqrt(116), abs=1e-4)
        assert threshold_level(100, 236) == pytest.approx(3.4808 / math.sqrt(236), abs=1e-4)

    @pytest.mark.parametrize("zeta", [0.0, 1.0, 2.0])
    def test_zeta_domain(self, zeta):
        with pytest.raises(DomainError):
            threshold_level(100, 100, zeta=zeta)


class TestAggregates:
    def test_orthogonal_rows(self):
        q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(30, 5)))
        agg = residual_correlation_aggregates(q.T, tau=0.01)
        assert (agg.s2, agg.s4, agg.s6, agg.s8) == pytest.approx((1, 1, 1, 1), abs=1e-12)
        assert agg.retained_offdiag == 0

    def test_strong_pair(self):
        agg = residual_correlation_aggregates(rows_with_correlation(0.8), tau=0.5)
        assert agg.s2 == pytest.approx(1.64, rel=1e-12)
        assert agg.s4 == pytest.approx(1.4096, rel=1e-12)
        assert agg.retained_offdiag == 1

    def test_weak_pair_thresholded(self):
        agg = residual_correlation_aggregates(rows_with_correlation(0.3), tau=0.5)
        assert agg == CorrelationAggregates.identity(2, tau=0.5)

    @pytest.mark.parametrize("block", [1, 3, 7, 256])
    def test_block_size_matches_dense(self, rng, block):
        E = rng.normal(size=(23, 15))
        E[5] += 2 * E[3]
        agg = residual_correlation_aggregates(E, tau=0.2, block_size=block)
        U = E / np.linalg.norm(E, axis=1, keepdims=True)
        R = U @ U.T
        Rt = np.where(np.abs(R) > 0.2, R, 0.0)
        np.fill_diagonal(Rt, 1.0)
        for k, s in zip((2, 4, 6, 8), (agg.s2, agg.s4, agg.s6, agg.s8)):
            assert s == pytest.approx(np.sum(Rt**k) / 23, rel=1e-12)

    def test_ordering(self, rng):
        E = rng.normal(size=(40, 20))
        agg = residual_correlation_aggregates(E, tau=0.1)
        assert agg.s2 >= agg.s4 >= agg.s6 >= agg.s8 >= 1.0


class TestB:
    def test_identity_limit(self):
        B = build_B(CorrelationAggregates.identity(10), 10**8)
        assert_allclose(B.diag, (2, 96, 10170), rtol=1e-5)

    def test_finite_v(self):
        assert build_B(CorrelationAggregates.identity(10), 100)[2, 2] == pytest.approx(2.14)

    def test_b46(self):
        agg = CorrelationAggregates(1.3, 1.3, 1.3, 1.3, 0.1, 3, 10)
        assert build_B(agg, 50)[4, 6] == pytest.approx(900 * 1.3)

    def test_symmetric_positive(self):
        B = build_B(CorrelationAggregates(1.5, 1.2, 1.1, 1.05, 0.1, 3, 10), 40)
        assert_allclose(B.values, B.values.T)
        assert np.all(B.diag > 0)

    def test_small_v(self):
        with pytest.raises(MomentUndefined):
            build_B(CorrelationAggregates.identity(5), 12)


class TestStandardize:
    def test_centered(self):
        t, p = standardize((0, 0, 0), build_B(CorrelationAggregates.identity(5), 50))
        assert t == (0.0, 0.0, 0.0)
        assert p == (0.5, 0.5, 0.5)

    def test_values(self):
        B = BMatrix(np.diag([2.14, 100.0, 1.0]), 100)
        t, p = standardize((2.0, -5.0, 0.0), B)
        assert t[0] == pytest.approx(1.3672, abs=1e-4)
        assert p[0] == pytest.approx(0.0858, abs=1e-4)
        assert t[1] == pytest.approx(-0.5)
        assert p[1] == pytest.approx(0.6915, abs=1e-4)

    def test_nonpositive(self):
        with pytest.raises(NonpositiveVariance):
            standardize((1, 1, 1), BMatrix(np.diag([1.0, 0.0, 1.0]), 100))

    def test_monotone(self):
        B = build_B(CorrelationAggregates.identity(5), 50)
        ps = [standardize((q, q, q), B)[1][0] for q in np.linspace(-3, 3, 25)]
        assert np.all(np.diff(ps) < 0)


class TestMax:
    def test_zero_m(self):
        assert gumbel_sf(0.0) == pytest.approx(1 - math.exp(-1 / math.sqrt(math.pi)), abs=1e-12)
        assert gumbel_sf(0.0) == pytest.approx(0.43124, abs=1e-4)

    def test_all_zero(self):
        l_inf, m, p = max_test(np.zeros(100))
        assert l_inf == 0.0
        assert m == pytest.approx(-2 * math.log(100) + math.log(math.log(100)), abs=1e-12)
        assert m == pytest.approx(-7.6824, abs=1e-3)
        assert 0.999 < p <= 1.0

    def test_monotone_to_zero(self):
        ps = gumbel_sf(np.linspace(-5, 80, 200))
        assert np.all(np.diff(ps) < 0)
        assert ps[-1] < 1e-15

    def test_too_few(self):
        with pytest.raises(TooFewAssets):
            max_test([1.0, 2.0])


class TestCombinations:
    def test_median(self):
        assert cauchy_combination([0.5] * 4) == pytest.approx((0.0, 0.5), abs=1e-15)

    def test_antisymmetric(self):
        t, p = cauchy_combination([0.01, 0.99])
        assert t == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(0.5, abs=1e-12)

    def test_round_trip(self):
        t, p = cauchy_combination([0.05])
        assert t == pytest.approx(math.tan(0.45 * math.pi), rel=1e-12)
        assert p == pytest.approx(0.05, rel=1e-12)

    @given(st.floats(1e-12, 1 - 1e-12))
    def test_single_identity(self, p):
        assert cauchy_combination([p])[1] == pytest.approx(p, rel=1e-6, abs=1e-12)

    def test_clamped_extremes(self):
        t, p = cauchy_combination([0.0, 0.5])
        assert math.isfinite(t) and 0.0 < p < 1e-14

    @pytest.mark.parametrize("p2,pinf,expected", [(0.5, 0.5, 0.75), (0.0, 0.7, 0.0), (0.025, 0.9, 0.049375)])
    def test_minp(self, p2, pinf, expected):
        assert minp_combination(p2, pinf) == pytest.approx(expected, abs=1e-15)


class TestRun:
    def test_report_fields(self, rng):
        Y, F = gaussian_panel(rng, n=30, t=60, p=2)
        r = run_alpha_tests(ReturnPanel(Y), FactorPanel(F))
        for p in r.p_values().values():
            assert 0.0 <= p <= 1.0
        assert r.m_gumbel == pytest.approx(r.l_inf - 2 * math.log(30) + math.log(math.log(30)))
        assert r.p2 == pytest.approx(stats.norm.sf(r.t2), rel=1e-10)
        assert r.v == 57 and r.n_assets == 30 and r.t_obs == 60 and r.n_factors == 2
        d = json.loads(r.to_json())
        assert d["retained_offdiag"] == r.aggregates.retained_offdiag

    def test_golden_fixture(self, data_dir):
        panel = np.load(data_dir / "golden_panel.npz")
        report = run_alpha_tests(panel["returns"], panel["factors"])
        assert report.to_json(indent=2) + "\n" == (data_dir / "golden_report.json").read_text()

    def test_too_few_assets(self, rng):
        Y, F = gaussian_panel(rng, n=2, t=30)
        with pytest.raises(TooFewAssets):
            run_alpha_tests(Y, F)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        Y, F = gaussian_panel(rng, n=25, t=40, p=2)
        Y[3] += 0.9 * Y[7]
        base = run_alpha_tests(Y, F)
        perm = run_alpha_tests(Y[rng.permutation(25)], F)
        a, b = base.to_dict(), perm.to_dict()
        for key in a:
            assert b[key] == pytest.approx(a[key], rel=1e-12, abs=1e-12), key

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(1e-3, 1e3), min_size=25, max_size=25))
    def test_scale_invariance(self, scales):
        rng = np.random.default_rng(5)
        Y, F = gaussian_panel(rng, n=25, t=40, p=2)
        base = run_alpha_tests(Y, F)
        scaled = run_alpha_tests(Y * np.asarray(scales)[:, None], F)
        a, b = base.to_dict(), scaled.to_dict()
        for key in a:
            assert b[key] == pytest.approx(a[key], rel=1e-10, abs=1e-10), key

    def test_single_large_alpha_is_detected(self):
        rng = np.random.default_rng(3)
        hits = 0
        reps = 200
        for _ in range(reps):
            Y, F = gaussian_panel(rng, n=100, t=240, p=3)
            fit = fit_regression(ReturnPanel(Y), FactorPanel(F))
            Y[0] += 10.0 / math.sqrt(fit.w_T)
            hits += run_alpha_tests(Y, F).p_inf < 0.001
        assert hits / reps >= 0.95


@pytest.mark.slow
class TestNullCalibration:
    """Cross-sectionally independent Gaussian errors, T = 240, N = 100, 2000 replications."""

    @pytest.mark.parametrize("field", ["p2", "p4", "p6", "p_inf", "p_minp", "p_cauchy"])
    def test_rejection_band(self, null_stats, field):
        freq = np.mean(null_stats(100)[field] < 0.05)
        assert 0.03 <= freq <= 0.09

    @pytest.mark.parametrize("field", ["t2", "t4", "t6"])
    def test_standard_normal_marginals(self, null_stats, field):
        assert stats.kstest(null_stats(100)[field], "norm").pvalue > 0.01

    @pytest.mark.parametrize("pair,expected", [
        (("q2", "q4"), 12 / math.sqrt(2 * 96)),
        (("q2", "q6"), 90 / math.sqrt(2 * 10170)),
        (("q4", "q6"), 900 / math.sqrt(96 * 10170)),
    ])
    def test_q_correlations(self, null_stats, pair, expected):
        s = null_stats(100)
        assert np.corrcoef(s[pair[0]], s[pair[1]])[0, 1] == pytest.approx(expected, abs=0.05)
