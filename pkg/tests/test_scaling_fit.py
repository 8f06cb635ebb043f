import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poik import dist_core as dc
from poik import scaling_fit as sf
from poik.dist_core import LN2, OrderKParams
from poik.errors import DomainError, SingularSystem
from poik.median_solver import solve_lambda_star, verify_boundary


class TestFormulas:
    @pytest.mark.parametrize("n, k, expected", [(30, 5, 29), (0, 1, 0), (100, 20, 97)])
    def test_base_median(self, n, k, expected):
        assert sf.base_median(n, k) == expected

    @pytest.mark.parametrize("n, k, expected", [(30, 5, 28), (12, 2, 11), (42, 6, 40)])
    def test_mode_conjecture(self, n, k, expected):
        assert sf.mode_conjecture(n, k) == expected

    def test_mode_conjecture_against_table(self):
        assert dc.mode(OrderKParams(6, 42 / 21)).modes == (40,)

    def test_mode_conjecture_domain(self):
        with pytest.raises(DomainError):
            sf.mode_conjecture(29, 5)

    def test_delta_eval(self):
        assert sf.delta_k_eval(sf.REFERENCE_DELTA_FIT, 2) == pytest.approx(0.85791, abs=1e-5)
        assert sf.delta_k_eval(sf.REFERENCE_DELTA_FIT, 20) == pytest.approx(3.11504 + 0.57765625 - 1 / 320,
                                                                      rel=1e-14)
        assert sf.delta_k_eval(sf.REFERENCE_DELTA_FIT, 20) == pytest.approx(3.68953, abs=1e-4)
        assert sf.delta_k_eval(sf.DeltaFit(0, 0, 0), 123) == 0

    def test_delta_eval_vs_solver(self):
        mu = solve_lambda_star(20, 20).mu_star
        assert mu - 20 == pytest.approx(sf.delta_k_eval(sf.REFERENCE_DELTA_FIT, 20), abs=0.05)

    @pytest.mark.parametrize("k", [1, 7, 100, 5000])
    def test_series_nu_zero_exact(self, k):
        pred = sf.mu_series_eval(sf.REFERENCE_SERIES_FIT, k, 0)
        assert pred == pytest.approx((k + 1) * LN2 / 2, rel=1e-12)
        assert pred == pytest.approx(solve_lambda_star(k, 0).mu_star, rel=1e-12)

    def test_series_baseline(self):
        zero = sf.SeriesFit((0, 0), (0, 0), (0, 0))
        assert sf.mu_series_eval(zero, 50, 50) == pytest.approx(51 * LN2 / 2, rel=1e-15)

    def test_series_k1000(self):
        k = 1000
        mu = solve_lambda_star(k, k).mu_star
        pred = sf.mu_series_eval(sf.REFERENCE_SERIES_FIT, k, k)
        assert abs(mu - pred) / (k + 1) <= 0.01

    def test_a0_pinned(self):
        assert sf.REFERENCE_SERIES_FIT.a0 == LN2 / 2
        assert sf.fit_mu_series(_synthetic_series(sf.REFERENCE_SERIES_FIT)).a0 == LN2 / 2


def _synthetic_series(fit, ks=(50, 100, 300), points=11):
    return [(k, nu, sf.mu_series_eval(fit, k, nu)) for k in ks for nu in sf.series_grid(k, points)]


class TestFits:
    def test_delta_round_trip(self):
        true = sf.DeltaFit(0.155752, 0.57765625, -1 / 16)
        samples = [(k, k + sf.delta_k_eval(true, k)) for k in range(2, 60)]
        fit = sf.fit_delta_k(samples)
        for a, b in zip((fit.slope, fit.intercept, fit.inv_k_coefficient),
                        (true.slope, true.intercept, true.inv_k_coefficient)):
            assert a == pytest.approx(b, abs=1e-10)
        assert sf.residual_report(fit, samples, "delta_k").max_abs < 1e-10

    def test_delta_from_solver(self):
        fit = sf.fit_delta_k(sf.delta_samples(range(2, 201)))
        assert fit.slope == pytest.approx(0.155752, abs=0.01)

    def test_delta_singular(self):
        with pytest.raises(SingularSystem):
            sf.fit_delta_k([(5, 6.0), (5, 6.1), (9, 11.0)])

    @pytest.mark.parametrize("weighting", ["relative", "uniform"])
    def test_series_round_trip(self, weighting):
        fit = sf.fit_mu_series(_synthetic_series(sf.REFERENCE_SERIES_FIT), weighting=weighting)
        for got, want in zip((fit.a1, fit.a2, fit.a3), (sf.REFERENCE_SERIES_FIT.a1,
                                                        sf.REFERENCE_SERIES_FIT.a2,
                                                        sf.REFERENCE_SERIES_FIT.a3)):
            np.testing.assert_allclose(got, want, atol=1e-10)

    def test_series_singular(self):
        with pytest.raises(SingularSystem):
            sf.fit_mu_series(_synthetic_series(sf.REFERENCE_SERIES_FIT, ks=(100,)))
        with pytest.raises(SingularSystem):
            sf.fit_mu_series(_synthetic_series(sf.REFERENCE_SERIES_FIT, points=3))
        with pytest.raises(ValueError):
            sf.fit_mu_series(_synthetic_series(sf.REFERENCE_SERIES_FIT), weighting="magic")

    def test_residual_report(self):
        rep = sf.ResidualReport.from_points([(1, 0.5), (2, -0.25), (3, 0.0)])
        assert rep.max_abs == 0.5
        assert rep.bias == pytest.approx(0.25 / 3)
        with pytest.raises(DomainError):
            sf.residual_report(sf.REFERENCE_DELTA_FIT, [], "delta_k")
        with pytest.raises(ValueError):
            sf.residual_report(sf.REFERENCE_DELTA_FIT, [(2, 3.0)], "nope")

    def test_series_grid(self):
        g = sf.series_grid(100)
        assert g[0] == 0 and g[-1] == 100 and len(g) == 21


class TestSweeps:
    def test_exact_at_pinned_mean(self):
        (rec,) = sf.sweep_base_median_diff(5, 30, 30)
        assert (rec.median, rec.base_median, rec.scaled_diff) == (29, 29, 0.0)
        assert rec.scaled_mean == 6.0

    def test_left_edge_k1000(self):
        first = sf.sweep_base_median_diff(1000, n_hi=sf.default_n_lo(1000))[0]
        assert first.scaled_diff == pytest.approx(LN2 / 2 - 1 / 8, abs=0.005)

    def test_step_and_order(self):
        recs = sf.sweep_base_median_diff(100, 40, 140, step=10)
        assert [r.n for r in recs] == list(range(40, 141, 10))
        assert recs == sf.sweep_base_median_diff(100, 40, 140, step=10, jobs=2)

    def test_bad_range(self):
        with pytest.raises(DomainError):
            sf.sweep_base_median_diff(10, 20, 10)
        with pytest.raises(DomainError):
            sf.sweep_base_median_diff(10, 0, 10)

    def test_violations_are_reported(self):
        # the base median drops below the median for k=100 just past n = 60
        recs = sf.sweep_base_median_diff(100, 60, 80)
        bad = sf.base_median_violations(recs)
        assert bad and all(r.base_median < r.median for r in bad)

    def test_curves_converge(self):
        xs = np.linspace(0.5, 5.0, 91)

        def curve(k):
            return np.array([sf.sweep_base_median_diff(k, round(x * k), round(x * k))[0].scaled_diff
                             for x in xs])

        small = np.abs(curve(100) - curve(200)).max()
        large = np.abs(curve(1000) - curve(2000)).max()
        assert large < small

    def test_nu_mu_k20(self):
        pairs = sf.sweep_nu_mu(20, 40)
        nu, mu = np.array(pairs).T
        assert mu[0] == pytest.approx(21 * LN2 / 2, rel=1e-14)
        assert mu[0] == pytest.approx(7.2785, abs=1e-3)  # 21*ln2/2 = 7.27805
        assert np.all(np.diff(mu) > 0)
        d2 = np.abs(np.diff(mu, 2))  # d2[i] is centred on nu = i + 1
        assert d2[20:].max() < d2[:19].min()
        for n_, m in pairs:
            r = solve_lambda_star(20, int(n_))
            assert r.mu_star == m
            assert verify_boundary(r)

    def test_nu_mu_domain(self):
        with pytest.raises(DomainError):
            sf.sweep_nu_mu(5, -1)

    def test_parallel_map_order(self):
        assert sf.parallel_map(abs, [-3, 2, -1, 5], jobs=2) == [3, 2, 1, 5]


@given(st.integers(2, 40), st.data())
def test_prop_base_median_on_proven_range(k, data):
    kappa = k * (k + 1) // 2
    n = data.draw(st.integers(kappa, 4 * kappa))
    (rec,) = sf.sweep_base_median_diff(k, n, n)
    assert rec.median == rec.base_median


@given(st.integers(2, 25), st.data())
def test_prop_mode_on_proven_range(k, data):
    kappa = k * (k + 1) // 2
    n = data.draw(st.integers(2 * kappa, 5 * kappa))
    assert sf.mode_conjecture(n, k) in dc.mode(OrderKParams(k, n / kappa)).modes
