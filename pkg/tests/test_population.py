import math
import warnings

import numpy as np
import pytest

from corrdet.errors import InvalidParameter
from corrdet.matrix_core import cholesky_logdet, trace_sq_deviation
from corrdet.population import (
    AssumptionWarning,
    PopulationSpec,
    build_correlation,
    check_assumptions,
    closed_form_logdet,
    closed_form_trace_sq,
    parse_population,
)


def test_zero_coefficient_normalizes_to_identity():
    assert PopulationSpec("ar1", 4, 0.0).family == "identity"
    assert PopulationSpec("equi", 4, 0.0).label == "identity"
    assert np.array_equal(build_correlation(PopulationSpec("equi", 3, 0.0)), np.eye(3))


def test_ar1_entries():
    r = build_correlation(PopulationSpec("ar1", 4, 0.5))
    assert r[0, 3] == 0.125 and r[2, 1] == 0.5
    assert np.array_equal(np.diagonal(r), np.ones(4))


def test_equi_entries():
    r = build_correlation(PopulationSpec("equi", 3, 0.2))
    assert np.array_equal(r, np.array([[1, 0.2, 0.2], [0.2, 1, 0.2], [0.2, 0.2, 1]]))


@pytest.mark.parametrize("bad", [("ar1", 1.0), ("ar1", -1.0), ("equi", 1.0), ("equi", -0.1), ("toeplitz", 0.1)])
def test_invalid_parameters(bad):
    with pytest.raises(InvalidParameter):
        PopulationSpec(bad[0], 5, bad[1])


def test_small_closed_forms_by_hand():
    # p=2: det = 1 - a^2 for both families
    assert closed_form_logdet(PopulationSpec("ar1", 2, 0.5)) == pytest.approx(math.log(0.75), rel=1e-15)
    assert closed_form_logdet(PopulationSpec("equi", 2, 0.5)) == pytest.approx(math.log(0.75), rel=1e-15)
    # equicorrelation p=3, rho=0.5: det = (1-rho)^2 (1+2 rho) = 0.5
    assert closed_form_logdet(PopulationSpec("equi", 3, 0.5)) == pytest.approx(math.log(0.5), rel=1e-15)
    assert closed_form_trace_sq(PopulationSpec("ar1", 3, 0.5)) == pytest.approx(2 * (0.25 + 0.25 + 0.0625))


@pytest.mark.parametrize("family,coef", [("ar1", 0.5), ("ar1", -0.8), ("equi", 0.3)])
@pytest.mark.parametrize("p", [2, 17, 120])
def test_closed_forms_match_dense(family, coef, p):
    spec = PopulationSpec(family, p, coef)
    r = build_correlation(spec)
    assert closed_form_logdet(spec) == pytest.approx(cholesky_logdet(r), rel=1e-11)
    assert closed_form_trace_sq(spec) == pytest.approx(trace_sq_deviation(r), rel=1e-12)


def test_explicit_population_validation():
    m = np.array([[1.0, 0.2], [0.2, 1.0]])
    spec = PopulationSpec("explicit", 2, matrix=m)
    assert np.array_equal(build_correlation(spec), m)
    assert closed_form_logdet(spec) is None
    with pytest.raises(InvalidParameter):
        PopulationSpec("explicit", 2, matrix=np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(InvalidParameter):
        PopulationSpec("explicit", 2, matrix=np.array([[1.0, 1.5], [1.5, 1.0]]))
    with pytest.raises(InvalidParameter):
        PopulationSpec("explicit", 3, matrix=m)
    with pytest.raises(InvalidParameter):
        PopulationSpec("explicit", 2)


def test_parse_population(tmp_path):
    assert parse_population("identity", 3).family == "identity"
    assert parse_population("ar1:0.5", 3) == PopulationSpec("ar1", 3, 0.5)
    assert parse_population("EQUI:0.1", 4).coef == 0.1
    path = tmp_path / "r.csv"
    path.write_text("1,0.3\n0.3,1\n")
    spec = parse_population(f"file:{path}")
    assert spec.family == "explicit" and spec.dim == 2
    for bad in ["ar1", "ar1:x", "foo:1", "identity:2"]:
        with pytest.raises(InvalidParameter):
            parse_population(bad, 3)
    with pytest.raises(InvalidParameter):
        parse_population("ar1:0.5")
    with pytest.raises(InvalidParameter):
        parse_population(f"file:{path}", 3)


def test_check_assumptions_warns_but_never_raises():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_assumptions(np.eye(3)) == []
    big = build_correlation(PopulationSpec("equi", 40, 0.9))  # top eigenvalue 36.1
    with pytest.warns(AssumptionWarning):
        issues = check_assumptions(big)
    assert len(issues) == 1 and "spectral norm" in issues[0]
    nearly_singular = np.array([[1.0, 1 - 1e-10], [1 - 1e-10, 1.0]])
    with pytest.warns(AssumptionWarning):
        assert "minimum eigenvalue" in check_assumptions(nearly_singular)[0]
