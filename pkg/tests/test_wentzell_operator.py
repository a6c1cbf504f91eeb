import numpy as np
import pytest
from hypothesis import given, strategies as st

from wentzell.coefficients import CoefficientSet
from wentzell.elliptic_core import realize
from wentzell.errors import HypothesisViolation, ShapeError, UnsupportedError
from wentzell.mesh import build_interval_mesh, build_rectangle_mesh
from wentzell.wentzell_operator import (
    ProductState,
    assemble_power_form,
    assemble_product_mass,
    assemble_wentzell_form,
    project_to_coupled,
)

IV = build_interval_mesh(0, 1, 16)
SQ = build_rectangle_mesh(1, 1, 4, 4)


def system(mesh=IV, gamma=0.0, delta=0.0, alpha=1.0, beta=1.0, Q=1.0, k=1, mode=None):
    op = realize(mesh, CoefficientSet(Q=Q, delta=delta), mode=mode)
    return assemble_wentzell_form(op, alpha, gamma, beta, k=k)


def test_product_mass_examples():
    one = np.ones(IV.num_nodes)
    assert one @ assemble_product_mass(IV, 1.0) @ one == pytest.approx(3.0, rel=1e-12)
    assert one @ assemble_product_mass(IV, 2.0) @ one == pytest.approx(2.0, rel=1e-12)
    one = np.ones(SQ.num_nodes)
    assert one @ assemble_product_mass(SQ, 1.0) @ one == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(HypothesisViolation):
        assemble_product_mass(IV, 0.0)


def test_product_state():
    f = ProductState.from_functions(IV, "x*x")
    assert f.is_coupled(IV) and f.u2.tolist() == [0.0, 1.0]
    g = ProductState.from_functions(IV, "x", 2.0)
    assert not g.is_coupled(IV)
    with pytest.raises(ShapeError):
        ProductState(np.zeros(3), np.zeros(2)).check(IV)


@pytest.mark.parametrize("kw", [{}, {"gamma": 1.0}, {"delta": 0.5}, {"alpha": "1 + x"}, {"beta": "2 + x"},
                                {"Q": "1 + x*x"}, {"mode": "lumped"}])
def test_form_invariants(kw):
    s = system(**kw)
    A = s.A
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    L = np.linalg.cholesky(s.M_H.toarray())
    T = np.linalg.solve(L, np.linalg.solve(L, A).T)
    assert np.linalg.eigvalsh((T + T.T) / 2).min() >= -1e-10 * np.abs(A).max()
    if s.gram is not None:
        np.testing.assert_allclose(s.gram.T @ s.gram, A, atol=1e-9 * np.abs(A).max())


def test_kernel_constant():
    for s in (system(), system(SQ), system(Q="1 + x", alpha="2 + x")):
        one = np.ones(s.size)
        assert np.abs(s.A @ one).max() <= 1e-10 * np.abs(s.A).sum(axis=1).max()


def test_alpha_scaling():
    s1, s3 = system(gamma=0.7), system(gamma=0.7, alpha=3.0)
    G = s1.boundary_gamma.toarray()
    np.testing.assert_allclose(s3.A - G, 3 * (s1.A - G), rtol=1e-12, atol=1e-12 * np.abs(s1.A).max())


def test_power_one_matches_default():
    op = realize(IV, CoefficientSet(delta=0.3))
    a = assemble_wentzell_form(op, 2.0, 0.5, 1.5)
    b = assemble_power_form(op, 2.0, 0.5, 1.5, power=1)
    assert np.abs(a.A - b.A).max() <= 1e-12 * np.abs(a.A).max()


def test_higher_order_restrictions():
    with pytest.raises(UnsupportedError):
        system(delta=0.5, k=2)
    with pytest.raises(UnsupportedError):
        system(Q=2.0, k=2)
    s = system(build_interval_mesh(0, 1, 8), k=2)
    assert s.order_power == 2 and s.metadata["power"] == 4


def test_projection_examples():
    f = ProductState.from_functions(IV, "x*x")
    np.testing.assert_allclose(project_to_coupled(IV, 1.0, f).u1, f.u1, atol=1e-13)
    s = system()
    g = ProductState(np.zeros(IV.num_nodes), np.ones(2))
    p = project_to_coupled(IV, 1.0, g)
    assert s.inner(p.u1, p.u1) <= 2.0
    pp = project_to_coupled(IV, 1.0, p)
    np.testing.assert_allclose(pp.u1, p.u1, atol=1e-12)


@given(st.integers(0, 10**6), st.floats(0.5, 4))
def test_projection_is_orthogonal(seed, beta):
    rng = np.random.default_rng(seed)
    f = ProductState(rng.standard_normal(IV.num_nodes), rng.standard_normal(2))
    p = project_to_coupled(IV, beta, f)
    s = system(beta=beta)
    v = rng.standard_normal(IV.num_nodes)  # any coupled test state
    # <f - Pf, v>_H = 0 with the decoupled product inner product
    r1, r2 = f.u1 - p.u1, f.u2 - p.u2
    val = r1 @ (s.op.M_omega @ v) + (s.beta_weights * r2) @ v[IV.boundary_nodes]
    assert abs(val) <= 1e-10 * (1 + np.abs(f.u1).max() + np.abs(f.u2).max()) * np.abs(v).max()
