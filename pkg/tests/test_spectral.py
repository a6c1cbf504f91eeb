import dataclasses

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wentzell.coefficients import CoefficientSet
from wentzell.elliptic_core import realize
from wentzell.errors import NotSPDError, PreconditionError
from wentzell.mesh import build_interval_mesh, build_rectangle_mesh
from wentzell.spectral import (
    boundary_determinant,
    eig_generalized,
    kernel_dimension,
    oracle_eigenvalues_interval,
    rayleigh_quotients,
)
from wentzell.wentzell_operator import assemble_wentzell_form

# reference roots (q = a = b = 1, g = d = 0, L = 1), frozen from the oracle and
# confirmed below by an independent 50-digit determinant in the cosh/sinh basis
REF_ROOTS = [0.0, 19.29971261403178, 649.7476985860128, 4247.648937966397, 15509.97455074507,
             41442.79276629875, 91398.8726398835]


def system(n=64, gamma=0.0, delta=0.0, alpha=1.0, beta=1.0, mesh=None, k=1):
    mesh = mesh or build_interval_mesh(0, 1, n)
    op = realize(mesh, CoefficientSet(delta=delta), mode="consistent")
    return assemble_wentzell_form(op, alpha, gamma, beta, k=k)


def mp_determinant(lam, q=1, a=1, b=1, g=0, d=0, L=1):
    """Boundary determinant in the cosh/sinh/cos/sin basis at 50 digits."""
    mp.mp.dps = 50
    lam = mp.mpf(lam)
    w = (lam / (q * q * a)) ** mp.mpf(0.25)

    def derivs(x):
        fs = [lambda t: mp.cosh(w * t), lambda t: mp.sinh(w * t), lambda t: mp.cos(w * t), lambda t: mp.sin(w * t)]
        return [[mp.diff(f, x, k) for f in fs] for k in range(4)]

    rows = []
    for x, nu in ((0, -1), (L, 1)):
        D = derivs(mp.mpf(x))
        rows.append([q * nu * D[1][j] + d * D[0][j] for j in range(4)])
        rows.append([-b * a * q * q * nu * D[3][j] - b * d * a * q * D[2][j] + (g - lam) * D[0][j] for j in range(4)])
    return mp.det(mp.matrix(rows))


def test_identity_operator():
    s = system(16)
    s = dataclasses.replace(s, A=s.M_H.toarray(), gram=None)
    d = eig_generalized(s)
    np.testing.assert_allclose(d.eigenvalues, 1.0, rtol=1e-12)


def test_kernel_and_invariants():
    d = eig_generalized(system(64))
    s = d.system
    assert kernel_dimension(d) == 1
    e = d.eigenvectors[:, 0]
    np.testing.assert_allclose(e / e[0], 1.0, atol=1e-10)
    G = d.eigenvectors.T @ (s.M_H @ d.eigenvectors)
    assert np.abs(G - np.eye(s.size)).max() <= 1e-10
    assert d.residuals.max() <= 1e-9
    assert np.all(np.diff(d.eigenvalues) >= 0)
    assert d.complete and d.eigenvalues.dtype.kind == "f"


def test_kernel_dimension_cases():
    assert kernel_dimension(eig_generalized(system(32, delta=0.5))) == 0
    neg = eig_generalized(system(32, gamma=-1.0))
    assert kernel_dimension(neg) == 0 and neg.eigenvalues[0] < 0 and neg.method == "eigh"
    assert eig_generalized(system(32, gamma=1.0)).eigenvalues[0] > 0


def test_count_and_determinism():
    s = system(16)
    with pytest.raises(PreconditionError):
        eig_generalized(s, s.size + 1)
    with pytest.raises(PreconditionError):
        eig_generalized(s, 0)
    a, b = eig_generalized(s, 5), eig_generalized(s, 5)
    assert a.count == 5 and not a.complete
    assert np.array_equal(a.eigenvalues, b.eigenvalues) and np.array_equal(a.eigenvectors, b.eigenvectors)


def test_not_spd_mass():
    s = system(8)
    bad = dataclasses.replace(s, M_H=-s.M_H)
    with pytest.raises(NotSPDError):
        eig_generalized(bad)


def test_rayleigh_consistency():
    for s in (system(64), system(16, k=2), system(32, gamma=0.5, delta=0.2)):
        d = eig_generalized(s)
        rq = rayleigh_quotients(d)
        nz = np.abs(d.eigenvalues) > 1e-12 * d.eigenvalues[-1]  # kernel modes are zero to roundoff
        np.testing.assert_allclose(rq[nz], d.eigenvalues[nz], rtol=1e-10)


def test_alpha_scaling():
    d1 = eig_generalized(system(48))
    d5 = eig_generalized(system(48, alpha=5.0))
    np.testing.assert_allclose(d5.eigenvalues[1:], 5 * d1.eigenvalues[1:], rtol=1e-10)
    np.testing.assert_allclose(np.abs(d5.eigenvectors[:, 1:6]), np.abs(d1.eigenvectors[:, 1:6]), atol=1e-8)


def test_oracle_reference_roots():
    res = oracle_eigenvalues_interval(1, 1, 1, 0, 0, 1, 7)
    assert res.complete and res.zero_is_root
    np.testing.assert_allclose(res.eigenvalues, REF_ROOTS, rtol=1e-10)


@pytest.mark.parametrize("k", range(1, 7))
def test_oracle_roots_independent(k):
    lam = REF_ROOTS[k]
    lo, hi = mp_determinant(lam * (1 - 1e-9)), mp_determinant(lam * (1 + 1e-9))
    assert mp.sign(lo) != mp.sign(hi)


def test_oracle_robin_root_independent():
    lam = oracle_eigenvalues_interval(1, 1, 2, 1, 0.5, 1, 2).eigenvalues[1]
    assert mp.sign(mp_determinant(lam * (1 - 1e-9), b=2, g=1, d=0.5)) != mp.sign(
        mp_determinant(lam * (1 + 1e-9), b=2, g=1, d=0.5))


def test_oracle_scaling_in_a():
    r1 = oracle_eigenvalues_interval(1, 1, 1, 0, 0, 1, 5).eigenvalues
    r4 = oracle_eigenvalues_interval(1, 4, 1, 0, 0, 1, 5).eigenvalues
    np.testing.assert_allclose(r4[1:], 4 * np.array(r1[1:]), rtol=1e-10)


def test_oracle_partial_and_errors():
    res = oracle_eigenvalues_interval(1, 1, 1, 0, 0, 1, 50, lam_max=1e4)
    assert not res.complete and len(res.eigenvalues) == 4
    with pytest.raises(PreconditionError):
        oracle_eigenvalues_interval(1, 1, 1, 0, -1, 1, 3)
    assert np.isfinite(boundary_determinant(1e8))


@pytest.mark.parametrize("g,d,b,a", [(0, 0, 1, 1), (1, 0.5, 2, 1), (0, 0.5, 1, 1), (0.5, 0, 1, 3)])
def test_discrete_matches_oracle(g, d, b, a):
    lam_o = np.array(oracle_eigenvalues_interval(1, a, b, g, d, 1, 4).eigenvalues)
    dec = eig_generalized(system(256, gamma=g, delta=d, alpha=a, beta=b), 4)
    np.testing.assert_allclose(dec.eigenvalues[lam_o > 0], lam_o[lam_o > 0], rtol=5e-4)


def test_discrete_oracle_convergence():
    ref = np.array(REF_ROOTS[1:6])
    errs = [np.abs(eig_generalized(system(n), 6).eigenvalues[1:6] - ref) / ref for n in (64, 128, 256)]
    assert np.all(errs[0] > errs[1]) and np.all(errs[1] > errs[2])


def test_2d_kernel():
    d = eig_generalized(system(mesh=build_rectangle_mesh(1, 1, 6, 6)))
    assert kernel_dimension(d) == 1 and d.residuals.max() <= 1e-9


@settings(max_examples=15)
@given(st.floats(0.2, 5), st.floats(0.5, 3))
def test_oracle_q_scaling(q, length):
    # x = L y: lambda(q, L, b) = q^2 lambda(1, 1, b L) / L^4 when g = d = 0
    r = oracle_eigenvalues_interval(q, 1, 1, 0, 0, length, 3).eigenvalues[1]
    r1 = oracle_eigenvalues_interval(1, 1, length, 0, 0, 1, 3).eigenvalues[1]
    assert r == pytest.approx(r1 * q * q / length**4, rel=1e-8)
