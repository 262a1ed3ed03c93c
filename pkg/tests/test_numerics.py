import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from sparsescan.numerics import (
    bernstein_beta_bound,
    binom_critical,
    binom_sf,
    log_reg_inc_beta,
    reg_inc_beta,
)

U_GRID = [k / 100 for k in range(1, 100)]

# log I_u(5, 100) at u = 1e-6: 50-digit mpmath sum of P(Bin(104, u) >= 5)
LOG_BETA_FIXTURE = -50.74074362905691051972839


def exact_upper_tail(c, n, u):
    """P(Bin(n, u) >= c) in exact rational arithmetic."""
    p = Fraction(u)
    q = 1 - p
    return float(sum(math.comb(n, k) * p**k * q ** (n - k) for k in range(c, n + 1)))


class TestRegIncBeta:
    def test_uniform(self):
        assert reg_inc_beta(0.5, 1, 1) == pytest.approx(0.5, abs=1e-15)

    def test_first_order_statistic(self):
        assert reg_inc_beta(0.2, 1, 3) == pytest.approx(0.488, abs=1e-14)

    def test_binomial_identity(self):
        assert reg_inc_beta(0.3, 2, 9) == pytest.approx(exact_upper_tail(2, 10, 0.3), abs=1e-14)

    def test_endpoints(self):
        assert reg_inc_beta(0.0, 2.5, 3.5) == 0.0
        assert reg_inc_beta(1.0, 2.5, 3.5) == 1.0

    @pytest.mark.parametrize("args", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            reg_inc_beta(*args)

    def test_against_scipy_wide_shapes(self):
        rng = np.random.default_rng(3)
        a = np.exp(rng.uniform(np.log(0.05), np.log(5000), 3000))
        b = np.exp(rng.uniform(np.log(0.05), np.log(5000), 3000))
        mean = a / (a + b)
        sd = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
        x = np.clip(mean + sd * rng.normal(0, 3, 3000), 1e-300, 1 - 1e-16)
        mine = np.array([reg_inc_beta(*t) for t in zip(x, a, b)])
        assert np.max(np.abs(mine - special.betainc(a, b, x))) <= 1e-12

    def test_fractional_shapes(self):
        for x in (1e-8, 0.01, 0.3, 0.9, 0.999):
            assert reg_inc_beta(x, 0.25, 0.5) == pytest.approx(special.betainc(0.25, 0.5, x), abs=1e-13)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.floats(0.1, 200.0),
        st.floats(0.1, 200.0),
    )
    def test_monotone_in_u(self, u1, u2, a, b):
        lo, hi = sorted((u1, u2))
        assert reg_inc_beta(lo, a, b) <= reg_inc_beta(hi, a, b) + 1e-15


class TestLogRegIncBeta:
    def test_uniform(self):
        assert log_reg_inc_beta(0.5, 1, 1) == pytest.approx(math.log(0.5), rel=1e-14)

    def test_minimum_of_uniforms(self):
        expect = math.log(1 - 0.99**10)
        assert log_reg_inc_beta(0.01, 1, 10) == pytest.approx(expect, rel=1e-12)

    def test_extended_precision_fixture(self):
        assert log_reg_inc_beta(1e-6, 5, 100) == pytest.approx(LOG_BETA_FIXTURE, rel=1e-12)

    def test_far_below_float_range(self):
        # I_u(k, n-k+1) ~ C(n, k) u^k for tiny u; stays finite where exp underflows
        got = log_reg_inc_beta(1e-200, 3, 1000)
        lead = math.log(math.comb(1002, 3)) + 3 * math.log(1e-200)
        assert math.isfinite(got)
        assert got == pytest.approx(lead, rel=1e-9)

    def test_consistent_with_plain_value(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            a, b = np.exp(rng.uniform(-2, 8, 2))
            u = rng.uniform()
            plain = reg_inc_beta(u, a, b)
            if plain >= 1e-300:
                assert abs(math.exp(log_reg_inc_beta(u, a, b)) - plain) <= 1e-12

    def test_against_scipy_log_cdf(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            k = int(rng.integers(1, 3000))
            n = k + int(rng.integers(0, 5000))
            u = 10.0 ** rng.uniform(-12, 0) * k / n
            want = stats.beta.logcdf(u, k, n - k + 1)
            if np.isfinite(want) and want > -700:
                assert log_reg_inc_beta(u, k, n - k + 1) == pytest.approx(want, rel=1e-9)


class TestBinomSf:
    def test_certain_event(self):
        assert binom_sf(0, 20, 0.3) == 1.0

    def test_top_two_terms(self):
        assert binom_sf(9, 10, 0.5) == pytest.approx(11 / 1024, abs=1e-16)

    def test_beyond_range(self):
        assert binom_sf(21, 20, 0.3) == 0.0
        with pytest.raises(ValueError):
            binom_sf(22, 20, 0.3)

    def test_matches_exact_sums(self):
        for n in (1, 2, 7, 30):
            for c in range(n + 2):
                for u in (0.001, 0.2, 0.5, 0.77, 0.999):
                    assert binom_sf(c, n, u) == pytest.approx(exact_upper_tail(c, n, u), abs=1e-14)

    def test_duality_with_beta(self):
        worst = 0.0
        for n in range(1, 31):
            for k in range(1, n + 1):
                for u in U_GRID:
                    worst = max(worst, abs(binom_sf(k, n, u) - reg_inc_beta(u, k, n - k + 1)))
        assert worst <= 1e-12

    def test_large_n_against_scipy(self):
        for n, p in ((5000, 1e-3), (30000, 2e-3), (1000, 0.4)):
            for c in np.unique(np.linspace(0, n, 60).astype(int)):
                assert binom_sf(int(c), n, p) == pytest.approx(stats.binom.sf(c - 1, n, p), abs=1e-13)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 300), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.data())
    def test_monotone(self, n, p1, p2, data):
        c = data.draw(st.integers(0, n))
        lo, hi = sorted((p1, p2))
        assert binom_sf(c, n, lo) <= binom_sf(c, n, hi) + 1e-14
        assert binom_sf(c + 1, n, hi) <= binom_sf(c, n, hi) + 1e-14


class TestBinomCritical:
    def test_fair_coin(self):
        assert binom_critical(10, 0.5, 0.05) == 9
        assert binom_sf(8, 10, 0.5) > 0.05

    def test_alpha_near_one(self):
        # P(N >= 0) = 1 exceeds every alpha < 1, so the smallest region is N >= 1
        assert binom_critical(25, 0.3, 1 - 1e-12) == 1
        assert binom_critical(25, 0.3, 1 - 1e-12) == min(
            c for c in range(27) if exact_upper_tail(c, 25, 0.3) <= 1 - 1e-12
        )

    def test_unattainable(self):
        assert binom_critical(1, 0.9, 0.05) == 2

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 2000), st.floats(0.0, 1.0), st.floats(1e-6, 0.999))
    def test_minimality(self, n, p, alpha):
        c = binom_critical(n, p, alpha)
        assert 0 <= c <= n + 1
        assert binom_sf(c, n, p) <= alpha
        if c >= 1:
            assert binom_sf(c - 1, n, p) > alpha


class TestBernsteinBound:
    def test_at_mean(self):
        assert bernstein_beta_bound(0.25, 5, 20) == 1.0

    def test_at_zero(self):
        for k in (1, 4, 9):
            assert bernstein_beta_bound(0.0, k, 10) == pytest.approx(math.exp(-1.5 * k), rel=1e-14)

    def test_dominates_exact(self):
        exact = exact_upper_tail(5, 20, 0.1)
        assert bernstein_beta_bound(0.1, 5, 20) >= exact
        assert reg_inc_beta(0.1, 5, 16) == pytest.approx(exact, abs=1e-14)

    def test_domain(self):
        with pytest.raises(ValueError):
            bernstein_beta_bound(0.5, 2, 10)

    def test_dominates_on_grid(self):
        for n in range(1, 31):
            for k in range(1, n + 1):
                for u in U_GRID:
                    if n * u <= k:
                        assert bernstein_beta_bound(u, k, n) >= reg_inc_beta(u, k, n - k + 1)
