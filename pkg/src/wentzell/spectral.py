"""Generalized eigenproblem A x = lambda M_H x and a 1D determinant oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .errors import NotSPDError, PreconditionError
from .wentzell_operator import WentzellSystem


@dataclass(eq=False)
class EigenDecomposition:
    """Ascending eigenpairs, eigenvectors M_H-orthonormal in coupled coordinates."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    system: WentzellSystem = field(repr=False)
    method: str = "svd"

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def complete(self) -> bool:
        return self.count == self.system.size

    def coefficients(self, f) -> np.ndarray:
        """<f, e_k>_H for a coupled vector or a (possibly decoupled) ProductState."""
        u = self.system.coupled_vector(f)
        return self.eigenvectors.T @ (self.system.M_H @ u)


def _fix_signs(V: np.ndarray, M_H) -> np.ndarray:
    """Deterministic sign: positive H-pairing with the constant, else positive peak."""
    pair = np.ones(V.shape[0]) @ (M_H @ V)
    peak = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    scale = np.sqrt(np.ones(V.shape[0]) @ (M_H @ np.ones(V.shape[0])))
    s = np.where(np.abs(pair) > 1e-8 * scale, np.sign(pair), np.sign(peak))
    s[s == 0] = 1.0
    return V * s


def eig_generalized(system: WentzellSystem, count: int | None = None) -> EigenDecomposition:
    """The ``count`` smallest eigenpairs of (A, M_H).

    M_H = R^T R (Cholesky) reduces the pencil to a standard symmetric problem.
    If the system has a Gram factor F (A = F^T F, gamma >= 0), the eigenvalues
    are the squared singular values of F R^{-1}; otherwise R^{-T} A R^{-1} is
    passed to a symmetric eigensolver.
    """
    N = system.size
    count = N if count is None else count
    if int(count) != count or not 1 <= count <= N:
        raise PreconditionError(f"eigenvalue count must lie in [1, {N}], got {count}")
    count = int(count)
    try:
        R = sla.cholesky(system.M_H.toarray(), lower=False)
    except sla.LinAlgError:
        raise NotSPDError("product mass M_H is not positive definite") from None

    if system.gram is not None:
        C = sla.solve_triangular(R, system.gram.T, trans="T").T  # F R^{-1}
        _, s, Vt = sla.svd(C, full_matrices=False, lapack_driver="gesdd")
        lam = s[::-1] ** 2
        Y = Vt[::-1].T
        method = "svd"
    else:
        T = sla.solve_triangular(R, system.A, trans="T")
        T = sla.solve_triangular(R, T.T, trans="T")
        lam, Y = sla.eigh((T + T.T) / 2)
        method = "eigh"
    lam, Y = lam[:count], Y[:, :count]
    X = sla.solve_triangular(R, Y)
    X = _fix_signs(X, system.M_H)
    A = system.A
    normA = np.linalg.norm(A, np.inf) or 1.0
    res = np.linalg.norm(A @ X - (system.M_H @ X) * lam, axis=0) / normA
    return EigenDecomposition(np.asarray(lam), X, res, system, method)


def kernel_dimension(decomp: EigenDecomposition, tol: float = 1e-10) -> int:
    """Number of eigenvalues with |lambda| <= tol * max(1, lambda_last)."""
    lam = decomp.eigenvalues
    return int(np.sum(np.abs(lam) <= tol * max(1.0, float(lam[-1]))))


def rayleigh_quotients(decomp: EigenDecomposition) -> np.ndarray:
    """e^T A e / e^T M_H e per eigenvector.

    With a Gram factor the numerator is evaluated as ||F e||^2: the dense
    product e^T A e carries an absolute error of eps ||A||, which swamps
    the small eigenvalues on fine meshes.
    """
    X = decomp.eigenvectors
    sys_ = decomp.system
    if sys_.gram is not None:
        FX = sys_.gram @ X
        num = np.einsum("ik,ik->k", FX, FX)
    else:
        num = np.einsum("ik,ik->k", X, sys_.A @ X)
    den = np.einsum("ik,ik->k", X, sys_.M_H @ X)
    return num / den


# ---------------------------------------------------------------------------
# 1D oracle


@dataclass
class OracleResult:
    eigenvalues: list
    complete: bool
    zero_is_root: bool
    scan_ceiling: float


def _endpoint_rows(lam, q, a, b, g, d, length):
    """The two boundary rows at x = 0 (nu = -1) and x = length (nu = +1).

    Unknown coefficients refer to the basis cos(wx), sin(wx), exp(-wx),
    exp(-w(L-x)) of solutions of q^2 a u'''' = lam u, w = (lam/(q^2 a))^(1/4).
    Robin row:     q nu u' + d u = 0.
    Wentzell row:  -b a q^2 nu u''' - b d a q u'' + (g - lam) u = 0,
    i.e. b (d_nu^Q(alpha B u) + delta alpha B u) + gamma u = lam u with B u = -q u''.
    """
    w = (lam / (q * q * a)) ** 0.25
    rows = []
    for x, nu in ((0.0, -1.0), (length, 1.0)):
        D = np.empty((4, 4))
        for k in range(4):
            D[k] = [
                w**k * np.cos(w * x + k * np.pi / 2),
                w**k * np.sin(w * x + k * np.pi / 2),
                (-w) ** k * np.exp(-w * x),
                w**k * np.exp(-w * (length - x)),
            ]
        rows.append(q * nu * D[1] + d * D[0])
        rows.append(-b * a * q * q * nu * D[3] - b * d * a * q * D[2] + (g - lam) * D[0])
    return np.array(rows)


def boundary_determinant(lam, q=1.0, a=1.0, b=1.0, g=0.0, d=0.0, length=1.0) -> float:
    """Sign-faithful determinant of the 4x4 boundary system for lam > 0.

    Rows are scaled by positive factors only, so sign changes coincide with
    eigenvalues; the decaying-exponential basis keeps entries bounded by 1.
    """
    Mx = _endpoint_rows(lam, q, a, b, g, d, length)
    Mx /= np.max(np.abs(Mx), axis=1, keepdims=True)
    return float(np.linalg.det(Mx))


def _zero_is_root(q, a, b, g, d, length) -> bool:
    # polynomial basis 1, x, x^2, x^3 at lam = 0
    rows = []
    for x, nu in ((0.0, -1.0), (length, 1.0)):
        D = np.array([
            [1.0, x, x * x, x**3],
            [0.0, 1.0, 2 * x, 3 * x * x],
            [0.0, 0.0, 2.0, 6 * x],
            [0.0, 0.0, 0.0, 6.0],
        ])
        rows.append(q * nu * D[1] + d * D[0])
        rows.append(-b * a * q * q * nu * D[3] - b * d * a * q * D[2] + g * D[0])
    Mx = np.array(rows)
    norms = np.max(np.abs(Mx), axis=1)
    if np.any(norms == 0):
        return True
    return abs(np.linalg.det(Mx / norms[:, None])) <= 1e-12


def oracle_eigenvalues_interval(q: float, a: float, b: float, g: float, d: float, length: float, count: int,
                                lam_min: float = 1e-6, lam_max: float = 1e8, per_decade: int = 64,
                                rtol: float = 1e-12) -> OracleResult:
    """Eigenvalues of the constant-coefficient Wentzell problem on (0, length).

    Non-negative roots only: lam = 0 is tested exactly, positive roots are
    bracketed by sign changes on a geometric grid and refined with Brent's
    method.
    """
    if not (q > 0 and a > 0 and b > 0 and d >= 0 and length > 0):
        raise PreconditionError("oracle requires q, a, b, length > 0 and d >= 0")
    if count < 1:
        raise PreconditionError("count must be at least 1")
    roots = [0.0] if _zero_is_root(q, a, b, g, d, length) else []
    decades = np.log10(lam_max / lam_min)
    grid = np.geomspace(lam_min, lam_max, int(round(decades * per_decade)) + 1)
    f = lambda lam: boundary_determinant(lam, q, a, b, g, d, length)  # noqa: E731
    vals = np.array([f(x) for x in grid])
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-300, rtol=rtol, maxiter=500))
        if len(roots) >= count:
            break
    return OracleResult(roots[:count], len(roots) >= count, bool(roots and roots[0] == 0.0), float(lam_max))
