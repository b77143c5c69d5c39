import math

import numpy as np
import pytest
from scipy import special

from corrdet.errors import InvalidParameter, NumericalBreakdown
from corrdet.matrix_core import cholesky_logdet
from corrdet.vine import (
    VineSample,
    draw_vine,
    draw_vine_logdet,
    level_shapes,
    logdet_from_partials,
    reconstruct_matrix,
)


def test_level_shapes():
    assert np.array_equal(level_shapes(4, 1.0), np.array([2.0, 1.5, 1.0]))
    # the first level carries the marginal shape eta - 1 + p/2
    assert level_shapes(10, 1.7)[0] == pytest.approx(5.7)


def test_deterministic_in_seed():
    a, b = draw_vine(8, 1.5, 3), draw_vine(8, 1.5, 3)
    assert np.array_equal(a.partials, b.partials)
    assert not np.array_equal(a.partials, draw_vine(8, 1.5, 4).partials)
    assert draw_vine_logdet(8, 1.5, 3) == draw_vine_logdet(8, 1.5, 3)


def test_only_strict_upper_triangle_is_used():
    s = draw_vine(6, 1.0, 0)
    assert np.array_equal(np.tril(s.partials), np.zeros((6, 6)))
    assert np.all(np.abs(s.partials) < 1.0)


def test_two_by_two():
    s = draw_vine(2, 1.0, 11)
    rho = s.partials[0, 1]
    r = reconstruct_matrix(s)
    assert np.array_equal(r, np.array([[1.0, rho], [rho, 1.0]]))
    assert logdet_from_partials(s) == pytest.approx(math.log(1 - rho * rho), rel=1e-14)


def test_three_by_three_recursion():
    part = np.zeros((3, 3))
    part[0, 1], part[0, 2], part[1, 2] = 0.3, -0.5, 0.4
    r = reconstruct_matrix(VineSample(3, 1.0, part))
    assert r[0, 1] == 0.3 and r[0, 2] == -0.5
    expected = 0.4 * math.sqrt((1 - 0.09) * (1 - 0.25)) + 0.3 * -0.5
    assert r[1, 2] == pytest.approx(expected, rel=1e-15)
    assert cholesky_logdet(r) == pytest.approx(math.log(0.91 * 0.75 * 0.84), rel=1e-13)


def _partial(r, a, j):
    # partial correlation of (a, j) given variables 0..a-1
    idx = list(range(a)) + [a, j]
    omega = np.linalg.inv(r[np.ix_(idx, idx)])
    return -omega[-2, -1] / math.sqrt(omega[-2, -2] * omega[-1, -1])


def test_partials_are_recovered_from_matrix():
    s = draw_vine(7, 0.8, 21)
    r = reconstruct_matrix(s)
    for a in range(6):
        for j in range(a + 1, 7):
            assert _partial(r, a, j) == pytest.approx(s.partials[a, j], abs=1e-12)


@pytest.mark.parametrize("eta", [0.5, 1.0, 3.0])
def test_reconstructions_are_valid_correlation_matrices(eta):
    for r in range(1000):
        s = draw_vine(20, eta, (eta * 10, r))
        m = reconstruct_matrix(s)
        assert np.array_equal(np.diagonal(m), np.ones(20))
        assert np.array_equal(m, m.T)
        assert np.max(np.abs(m - np.eye(20))) < 1.0
        assert cholesky_logdet(m) == pytest.approx(logdet_from_partials(s), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p,eta", [(2, 1.0), (30, 0.5), (300, 2.0)])
def test_streamed_logdet_matches_partials(p, eta):
    for r in range(5):
        assert draw_vine_logdet(p, eta, (1, r)) == pytest.approx(
            logdet_from_partials(draw_vine(p, eta, (1, r))), rel=1e-14)


def _expected_logdet(p, eta):
    # rho = 2B - 1 gives log(1 - rho^2) = log 4 + log B + log(1 - B)
    b = level_shapes(p, eta)
    counts = p - np.arange(1, p)
    return float(np.sum(counts * (math.log(4) + 2 * special.digamma(b) - 2 * special.digamma(2 * b))))


@pytest.mark.parametrize("p,eta", [(10, 1.0), (50, 0.5), (200, 2.5)])
def test_logdet_mean_matches_exact_expectation(p, eta):
    vals = np.array([draw_vine_logdet(p, eta, (7, r)) for r in range(2000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - _expected_logdet(p, eta)) < 4 * se


def test_invalid_arguments():
    with pytest.raises(InvalidParameter):
        draw_vine(1, 1.0, 0)
    with pytest.raises(InvalidParameter):
        draw_vine(3, 0.0, 0)
    with pytest.raises(InvalidParameter):
        draw_vine_logdet(3, -1.0, 0)


def test_breakdown_near_unit_partial():
    part = np.zeros((3, 3))
    part[0, 1] = 1.0 - 1e-16
    with pytest.raises(NumericalBreakdown):
        reconstruct_matrix(VineSample(3, 1.0, part))
