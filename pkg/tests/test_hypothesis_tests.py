import math

import numpy as np
import pytest
from scipy import special

from corrdet.errors import DomainError, InvalidInputs
from corrdet.hypothesis_tests import (
    equivalent_sample_size,
    normal_cdf,
    normal_quantile,
    null_moments,
    p_value,
    p_values,
    test_uncorrelated as uncorrelated,
    test_uniformity as uniformity,
    uniformity_moments,
)
from corrdet.matrix_core import sym_sqrt
from corrdet.moments import INFINITE_KURTOSIS
from corrdet.population import PopulationSpec, build_correlation
from corrdet.sampler import NoiseDistribution, apply_population, draw_noise
from corrdet.vine import draw_vine, level_shapes, reconstruct_matrix

Z95 = 1.6448536269514727


def test_normal_quantile_golden():
    assert normal_quantile(0.95) == pytest.approx(Z95, rel=1e-15)
    assert normal_cdf(Z95) == pytest.approx(0.95, rel=1e-15)
    for bad in (0.0, 1.0, -0.1, math.nan):
        with pytest.raises(DomainError):
            normal_quantile(bad)


def test_p_value_sides():
    assert p_value(-Z95, "lower") == pytest.approx(0.05, rel=1e-14)
    assert p_value(Z95, "upper") == pytest.approx(0.05, rel=1e-14)
    assert p_value(Z95, "two") == pytest.approx(0.10, rel=1e-14)
    assert p_value(0.0, "two") == 1.0
    with pytest.raises(InvalidInputs):
        p_value(0.0, "left")


def test_vectorized_p_values_agree():
    t = np.array([-3.0, -0.5, 0.0, 0.7, 2.5])
    for sided in ("lower", "upper", "two"):
        assert np.array_equal(p_values(t, sided), [p_value(v, sided) for v in t])


def test_null_moments_ignore_kurtosis():
    ref = null_moments(30, 80, True)
    for k in (9.0, INFINITE_KURTOSIS):
        assert null_moments(30, 80, True, k) == ref


def test_uncorrelated_is_pivotal_in_declared_kurtosis():
    y = draw_noise(NoiseDistribution("t", 5.0), 20, 60, 1)
    ref = uncorrelated(y)
    for k in (9.0, INFINITE_KURTOSIS):
        out = uncorrelated(y, kurtosis=k)
        assert out.statistic == ref.statistic and out.p_value == ref.p_value


def test_uncorrelated_accepts_identity_and_rejects_strong_correlation():
    x = draw_noise(NoiseDistribution(), 40, 200, 2)
    assert not uncorrelated(x).reject
    r_half = sym_sqrt(build_correlation(PopulationSpec("equi", 40, 0.3)))
    out = uncorrelated(apply_population(x, r_half))
    assert out.reject and out.p_value < 1e-6 and out.statistic < 0


def test_uncorrelated_statistic_definition():
    y = draw_noise(NoiseDistribution(), 20, 50, 3)
    out = uncorrelated(y, centered=False, sided="two")
    m = null_moments(20, 50, False)
    assert out.statistic == pytest.approx((out.logdet - m.mu) / m.sigma, rel=1e-14)
    assert out.moments == m


def test_singular_sample_correlation_is_flagged_rejection():
    y = draw_noise(NoiseDistribution(), 20, 40, 4)
    y[4] = 2.0 * y[3] + 1.0
    out = uncorrelated(y)
    assert out.reject and out.p_value == 0.0 and out.flags == ("singular",)
    assert out.as_dict()["flags"] == ["singular"]


def test_uncorrelated_validation():
    y = draw_noise(NoiseDistribution(), 5, 30, 4)
    with pytest.raises(InvalidInputs):
        uncorrelated(y, alpha=1.5)
    with pytest.raises(InvalidInputs):
        uncorrelated(y, sided="both")
    with pytest.raises(InvalidInputs):
        uncorrelated(draw_noise(NoiseDistribution(), 6, 6, 0), centered=True)


def test_uniformity_moments_golden():
    # non-centered moments at n = p + 1 (40-digit evaluation)
    m = uniformity_moments(100)
    assert m.mu == pytest.approx(-96.048914321958352830, rel=1e-14)
    assert m.sigma2 == pytest.approx(5.8637486527606480849, rel=1e-13)
    assert m.mu == pytest.approx(-0.5 * math.log(2 / 101) - 99 + 100 / 101, rel=1e-14)


def _vine_logdet_moments(p, eta):
    # partials are 2B - 1 with B ~ Beta(b, b): log(1 - rho^2) = log 4 + log B + log(1 - B)
    b = level_shapes(p, eta)
    c = p - np.arange(1, p)
    mean = np.sum(c * (math.log(4) + 2 * special.digamma(b) - 2 * special.digamma(2 * b)))
    var = np.sum(c * (2 * special.polygamma(1, b) - 4 * special.polygamma(1, 2 * b)))
    return mean, var


def _sample_correlation_logdet_moments(p, n):
    # non-centered normal data, R = I: det R_hat = prod_i Beta((n-i+1)/2, (i-1)/2)
    i = np.arange(2, p + 1)
    mean = np.sum(special.digamma((n - i + 1) / 2) - special.digamma(n / 2))
    var = np.sum(special.polygamma(1, (n - i + 1) / 2) - special.polygamma(1, n / 2))
    return mean, var


@pytest.mark.parametrize("p", [10, 100, 1000])
@pytest.mark.parametrize("eta", [0.6, 1.0, 2.5])
def test_vine_law_matches_equivalent_sample_size(p, eta):
    vm, vv = _vine_logdet_moments(p, eta)
    sm, sv = _sample_correlation_logdet_moments(p, equivalent_sample_size(p, eta))
    assert vm == pytest.approx(sm, rel=1e-12)
    assert vv == pytest.approx(sv, rel=1e-12)


def test_uniformity_at_the_mean_has_zero_statistic():
    out = uniformity(-96.048914321958352830, 100)
    assert abs(out.statistic) < 1e-12 and out.p_value == pytest.approx(1.0) and not out.reject
    assert out.sided == "two"


def test_uniformity_matrix_path_matches_logdet_path():
    s = draw_vine(12, 1.0, 5)
    m = reconstruct_matrix(s)
    a = uniformity(matrix=m)
    b = uniformity(a.logdet, 12)
    assert a.statistic == b.statistic
    with pytest.raises(InvalidInputs):
        uniformity(matrix=m, p=11)


def test_uniformity_validation():
    with pytest.raises(InvalidInputs):
        uniformity(0.5, 10)
    with pytest.raises(InvalidInputs):
        uniformity(-1.0, 1)
    with pytest.raises(InvalidInputs):
        uniformity(-1.0)
    with pytest.raises(InvalidInputs):
        uniformity(-1.0, 10, alpha=0.0)


def test_as_dict_keys():
    d = uniformity(-90.0, 100).as_dict()
    assert list(d) == ["statistic", "p_value", "reject", "mu", "sigma2", "flags"]
