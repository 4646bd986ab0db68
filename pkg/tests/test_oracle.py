"""Closed-form moments, checked against exact enumeration.

In the extreme regime each observation component has the same value y and
the member values are independent, so given ``u = F(y)`` the number of
members below y in any component is Binomial(m - 1, u), independently across
components. Integrating over ``u ~ U(0, 1)`` with Beta integrals gives exact
joint moments of two components' ranks.
"""
from fractions import Fraction
from math import comb, factorial

import pytest

from rankcal.errors import InvalidParameterError
from rankcal.oracle import (
    band_depth_component_moments,
    cross_rank_moments,
    expected_preranks,
    faulhaber_power_sums,
    oracle_report,
    prerank_variances,
    rank_covariance,
)


def beta_int(a, b):
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 1))


def joint_moment(m, f1, f2):
    """E[f1(R) f2(R')] for two ranks of the observation in the extreme regime."""
    n = m - 1
    total = Fraction(0)
    for r in range(m):
        for s in range(m):
            w = comb(n, r) * comb(n, s) * beta_int(r + s, 2 * n - r - s)
            total += f1(r + 1) * f2(s + 1) * w
    return total


def uniform_mean(m, f):
    return Fraction(sum(f(r) for r in range(1, m + 1)), m)


class TestExamples:
    def test_expected_preranks(self):
        assert expected_preranks(20) == (10.5, 76.0)
        assert expected_preranks(2) == (1.5, 1.0)

    def test_variances_m20_d5(self):
        a_m, a_o, b_m, b_o = prerank_variances(20, 5)
        assert a_m == pytest.approx(6.65)
        assert a_o == pytest.approx(30.7167, abs=5e-5)
        assert b_m == pytest.approx(3952.76)
        assert b_o == pytest.approx(4472.60)
        assert b_m == pytest.approx(399 * 2972 / 300)
        assert b_o == pytest.approx(b_m + 116964 * 4 / 900)

    def test_rank_covariance(self):
        assert rank_covariance(20) == pytest.approx(361 / 12)
        assert rank_covariance(2, exact=True) == Fraction(1, 12)

    def test_faulhaber(self):
        assert faulhaber_power_sums(3) == (6, 14, 36, 98)
        assert faulhaber_power_sums(1) == (1, 1, 1, 1)

    def test_report(self):
        rep = oracle_report(20, 5).to_dict()
        assert rep["var_avg_obs"] == pytest.approx(30.7167, abs=5e-5)
        assert set(rep) >= {"m", "d", "expected_prerank_avg", "var_bd_obs", "rank_covariance"}

    @pytest.mark.parametrize("call", [lambda: expected_preranks(1), lambda: prerank_variances(20, 0),
                                      lambda: faulhaber_power_sums(1001),
                                      lambda: rank_covariance(2.5)])
    def test_invalid(self, call):
        with pytest.raises(InvalidParameterError):
            call()


class TestAgainstEnumeration:
    @pytest.mark.parametrize("m", [2, 3, 7, 50, 1000])
    def test_faulhaber_matches_sums(self, m):
        want = tuple(sum(i ** p for i in range(1, m + 1)) for p in range(1, 5))
        assert faulhaber_power_sums(m) == want

    @pytest.mark.parametrize("m", [2, 3, 5, 20])
    def test_expected_preranks_exact(self, m):
        avg, bd = expected_preranks(m, exact=True)
        assert avg == uniform_mean(m, lambda r: r)
        assert bd == uniform_mean(m, lambda r: (m - r) * (r - 1) + m - 1)

    @pytest.mark.parametrize("m", [2, 3, 5, 20])
    def test_rank_covariance_exact(self, m):
        mu = Fraction(m + 1, 2)
        cov = joint_moment(m, lambda r: r, lambda r: r) - mu * mu
        assert cov == rank_covariance(m, exact=True)

    @pytest.mark.parametrize("m", [2, 3, 5, 20])
    def test_cross_moments_exact(self, m):
        e11, e12, e22 = cross_rank_moments(m, exact=True)
        assert e11 == joint_moment(m, lambda r: r, lambda r: r)
        assert e12 == joint_moment(m, lambda r: r, lambda r: r * r)
        assert e22 == joint_moment(m, lambda r: r * r, lambda r: r * r)

    @pytest.mark.parametrize("m,d", [(3, 1), (5, 2), (20, 5), (11, 7)])
    def test_average_variances_exact(self, m, d):
        a_m, a_o, _, _ = prerank_variances(m, d, exact=True)
        var_r = uniform_mean(m, lambda r: r * r) - Fraction(m + 1, 2) ** 2
        assert a_m == var_r / d
        assert a_o == var_r / d + rank_covariance(m, exact=True) * (d - 1) / d

    @pytest.mark.parametrize("m", [3, 5, 20])
    def test_band_depth_component_moments_exact(self, m):
        g = lambda r: (m + 1) * r - r * r  # noqa: E731
        eg = uniform_mean(m, g)
        var, cov = band_depth_component_moments(m, exact=True)
        assert var == uniform_mean(m, lambda r: g(r) ** 2) - eg * eg
        assert cov == joint_moment(m, g, g) - eg * eg
        assert var == Fraction((m * m - 1) * (m * m - 4), 180)
        assert cov == Fraction((m - 1) ** 2 * (m - 2) ** 2, 180)

    def test_published_band_depth_member_variance_disagrees(self):
        # the closed form for the band-depth member variance is not the
        # variance of (m + 1) R - R^2 with R uniform; document the gap
        var, cov = band_depth_component_moments(20)
        assert var == pytest.approx(877.8)
        assert cov == pytest.approx(649.8)
        _, _, b_m, b_o = prerank_variances(20, 5)
        assert b_m / (var / 5) > 20
        assert b_o - b_m == pytest.approx(cov * 4 / 5)


class TestIdentities:
    @pytest.mark.parametrize("m", [2, 5, 20, 100, 500])
    @pytest.mark.parametrize("d", [1, 2, 5, 100])
    def test_average_gap(self, m, d):
        a_m, a_o, _, _ = prerank_variances(m, d)
        assert a_o - a_m == pytest.approx((d - 1) * rank_covariance(m) / d, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("m", [2, 17, 333, 1000])
    def test_float_vs_exact(self, m):
        exact = prerank_variances(m, 7, exact=True) + expected_preranks(m, exact=True)
        approx = prerank_variances(m, 7) + expected_preranks(m)
        for e, a in zip(exact, approx):
            assert abs(a - float(e)) <= 1e-12 * abs(float(e))


def test_appendix_monte_carlo_matches_exact_moments():
    from rankcal.verify import appendix_moments

    m, d = 20, 5
    emp = appendix_moments(m, d, n_cases=30000, seed=4100)
    var_g, cov_g = band_depth_component_moments(m)
    a_m, a_o, _, _ = prerank_variances(m, d)
    exact = {
        "var_avg_member": a_m,
        "var_avg_obs": a_o,
        "var_bd_member": var_g / d,
        "var_bd_obs": var_g / d + cov_g * (d - 1) / d,
        "rank_covariance": rank_covariance(m),
    }
    for key, want in exact.items():
        assert emp[key] == pytest.approx(want, rel=0.05), key
