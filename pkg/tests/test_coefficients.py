import numpy as np
import pytest
from hypothesis import given, strategies as st

from wentzell.coefficients import (
    CoefficientSet,
    Field,
    check_principal_symbol,
    principal_symbol,
    validate_coefficients,
)
from wentzell.errors import ConfigError, NotEllipticError
from wentzell.mesh import build_interval_mesh, build_rectangle_mesh

SQ = build_rectangle_mesh(1, 1, 4, 4)
IV = build_interval_mesh(0, 1, 8)


def failed(report):
    return [c.name for c in report.failures()]


def test_reference_passes():
    rep = validate_coefficients(SQ, CoefficientSet())
    assert rep.passed
    margins = {c.name: c.margin for c in rep.checks}
    assert margins["alpha >= eta on Omega"] == pytest.approx(0.5)


def test_negative_delta_fails():
    rep = validate_coefficients(IV, CoefficientSet(delta=-1.0))
    assert failed(rep) == ["delta >= 0 on Gamma"]
    rep = validate_coefficients(IV, CoefficientSet(delta={"boundary": [0.0, -1.0]}))
    assert not rep.passed


def test_indefinite_Q_fails():
    rep = validate_coefficients(SQ, CoefficientSet(Q=[[1, 2], [2, 1]]))
    assert any("positive definite" in n for n in failed(rep))
    margin = {c.name: c.margin for c in rep.checks}
    assert min(margin.values()) == pytest.approx(-1.0 - 0.5)


def test_asymmetric_Q_fails():
    rep = validate_coefficients(SQ, CoefficientSet(Q=[[2, 0.1], [0, 2]]))
    assert "Q symmetric" in failed(rep)


def test_expression_coefficients():
    c = CoefficientSet(alpha="1 + x*x", beta="2 + cos(pi*x)")
    assert validate_coefficients(IV, c).passed
    vals = c.alpha.on_cells(IV)
    assert vals.shape == (8, 2) and np.all(vals >= 1)


def test_bad_specs():
    with pytest.raises(ConfigError):
        Field("__import__('os')")
    with pytest.raises(ConfigError):
        Field(True)
    with pytest.raises(ConfigError):
        Field({"cells": [1.0, 2.0]}).on_cells(IV)


def test_symbol_examples():
    xi = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    np.testing.assert_allclose(principal_symbol(CoefficientSet(), SQ, xi), 1.0)
    np.testing.assert_allclose(principal_symbol(CoefficientSet(Q=2.0, alpha=3.0), SQ, xi), 12.0)
    a0 = principal_symbol(CoefficientSet(Q=[[1, 0], [0, 4]]), SQ, np.array([[0.0, 1.0]]))
    np.testing.assert_allclose(a0, 16.0)


def test_symbol_sector_bound():
    rep = check_principal_symbol(CoefficientSet(), SQ, np.pi / 2)
    assert rep.a0_min == pytest.approx(1.0) and rep.a0_max == pytest.approx(1.0)
    # lambda = r i: |r i + 1| / (r + 1) has minimum 1/sqrt(2) at r = 1
    assert rep.lower_bound == pytest.approx(1 / np.sqrt(2), rel=1e-6)
    wide = check_principal_symbol(CoefficientSet(), SQ, 0.9 * np.pi)
    assert 0 < wide.lower_bound < rep.lower_bound


def test_symbol_not_elliptic():
    with pytest.raises(NotEllipticError):
        check_principal_symbol(CoefficientSet(alpha=-1.0), SQ, np.pi / 2)


def test_spec_roundtrip():
    c = CoefficientSet(Q=[[1, 0], [0, "2+x"]], alpha=2.0, gamma={"boundary": [0, 1]})
    again = CoefficientSet(**{k: v for k, v in c.to_spec().items()})
    assert again.to_spec() == c.to_spec()


@given(st.floats(0.6, 5), st.floats(0.6, 5), st.floats(0, 3), st.floats(-0.4, 0.4))
def test_spd_Q_passes(q1, q2, delta, off):
    Q = [[q1, off], [off, q2]]
    rep = validate_coefficients(SQ, CoefficientSet(Q=Q, delta=delta))
    lam_min = np.linalg.eigvalsh(np.array(Q)).min()
    assert rep.passed == (lam_min >= 0.5)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_symbol_scaling(q, a):
    xi = np.array([[0.6, 0.8]])
    np.testing.assert_allclose(principal_symbol(CoefficientSet(Q=q, alpha=a), SQ, xi), q * q * a, rtol=1e-12)
