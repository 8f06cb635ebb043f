import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poik import dist_core as dc
from poik import oracle
from poik.dist_core import LN2, OrderKParams
from poik.errors import DomainError, GuardExceeded
from poik.verify import chi_square_against_table


class TestConvolution:
    def test_standard_poisson(self):
        t = oracle.pmf_by_convolution(OrderKParams(1, 1.0), 5)
        expected = math.exp(-1) * np.array([1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120])
        np.testing.assert_allclose(t.probabilities, expected, rtol=1e-14)

    def test_matches_combinatorial(self):
        params = OrderKParams(2, 0.5)
        t = oracle.pmf_by_convolution(params, 4)
        for n in range(5):
            assert t.pmf(n) == pytest.approx(dc.pmf_combinatorial(params, n), rel=1e-13)

    def test_constant_term(self):
        t = oracle.pmf_by_convolution(OrderKParams(3, 0.2), 0)
        assert t.n_max == 0
        assert t.pmf(0) == pytest.approx(math.exp(-0.6), rel=1e-15)

    def test_far_tail_not_truncated(self):
        # entries far below 1e-16 are still carried exactly in degree
        params = OrderKParams(1, 4.0)
        t = oracle.pmf_by_convolution(params, 40)
        assert t.pmf(40) == pytest.approx(math.exp(-4) * 4.0**40 / math.factorial(40), rel=1e-12)

    @pytest.mark.parametrize("k, lam", [(1, 3.0), (4, 0.7), (10, 1.9)])
    def test_sums_to_one(self, k, lam):
        params = OrderKParams(k, lam)
        t = oracle.pmf_by_convolution(params, dc.support_bound(params))
        assert math.fsum(t.probabilities) == pytest.approx(1.0, abs=1e-12)

    def test_guard(self):
        with pytest.raises(GuardExceeded):
            oracle.pmf_by_convolution(OrderKParams(10, 5.5), 10)
        with pytest.raises(GuardExceeded):
            oracle.pmf_by_convolution(OrderKParams(1, 1.0), 5001)

    def test_taylor_depth(self):
        d = oracle.taylor_depth(2.0)
        assert 2.0**d / math.factorial(d) < 1e-16 <= 2.0 ** (d - 1) / math.factorial(d - 1)


class TestSampler:
    def test_reproducible(self):
        params = OrderKParams(4, 0.9)
        a = oracle.sample(params, 7, 1000)
        b = oracle.sample(params, 7, 1000)
        assert a.count == 1000
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, oracle.sample(params, 8, 1000).values)

    def test_moments(self):
        params = OrderKParams(5, 0.4)
        v = oracle.sample(params, 11, 1_000_000).values.astype(float)
        sd = math.sqrt(dc.variance(params))
        assert abs(v.mean() - 6.0) < 3 * sd / 1000
        # standard error of the sample variance from the fourth central moment
        m4 = np.mean((v - v.mean()) ** 4)
        se = math.sqrt((m4 - v.var() ** 2) / len(v))
        assert abs(v.var(ddof=1) - 22.0) < 5 * se

    def test_empirical_median(self):
        batch = oracle.sample(OrderKParams(5, 2.0), 3, 1_000_000)
        assert oracle.empirical_median(batch) == 29

    def test_empirical_cdf(self):
        batch = oracle.sample(OrderKParams(7, LN2 / 7), 5, 1_000_000)
        assert oracle.empirical_cdf(batch, int(batch.values.max())) == 1.0
        assert oracle.empirical_cdf(batch, -1) == 0.0
        assert oracle.empirical_cdf(batch, 0) == pytest.approx(0.5, abs=0.002)

    def test_bad_count(self):
        with pytest.raises(DomainError):
            oracle.sample(OrderKParams(1, 1.0), 0, 0)

    @pytest.mark.parametrize("k, lam", [(2, 0.5), (5, 2.0), (20, 0.1)])
    def test_chi_square(self, k, lam):
        batch = oracle.sample(OrderKParams(k, lam), 20231009, 1_000_000)
        _, p = chi_square_against_table(batch)
        assert p > 1e-3

    def test_chi_square_detects_wrong_rate(self):
        batch = oracle.sample(OrderKParams(5, 2.0), 1, 1_000_000)
        wrong = oracle.SampleBatch(OrderKParams(5, 2.02), batch.seed, batch.values)
        _, p = chi_square_against_table(wrong)
        assert p < 1e-6


@given(st.integers(1, 12), st.floats(0.01, 1.5), st.integers(0, 40))
def test_prop_oracle_matches_recurrence(k, lam, n_max):
    params = OrderKParams(k, lam)
    a = oracle.pmf_by_convolution(params, n_max).probabilities
    b = dc.pmf_table(params, n_max).probabilities
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-300)
