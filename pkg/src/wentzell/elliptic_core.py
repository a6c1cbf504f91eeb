"""Second-order building blocks: the form <Q grad u, grad v> + <delta u, v>_Gamma.

``RealizedOperator`` bundles the interior mass M, the stiffness K and the
boundary Robin mass; its action ``B_h u = M^{-1} (K + M_gd) u`` is the
discrete Neumann (delta = 0) or Robin realization of B = -div Q grad.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import CoefficientSet, Field, MatrixField, validate_coefficients
from .errors import AssemblyError, HypothesisViolation, PreconditionError, ShapeError, SingularSystemError
from .mesh import Mesh, boundary_trace_map

DENSE_LIMIT = 4096
CONSISTENT_LIMIT = 2048


def default_mode(mesh: Mesh) -> str:
    return "consistent" if mesh.num_elements <= CONSISTENT_LIMIT else "lumped"


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices ``local[e, a, b]`` into a global sparse matrix."""
    el = mesh.elements
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    N = mesh.num_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()


def lump(M) -> sp.csr_matrix:
    return sp.diags(np.asarray(M.sum(axis=1)).ravel()).tocsr()


def assemble_mass(mesh: Mesh, weight=None, lumped: bool = False) -> sp.csr_matrix:
    """Nodal mass matrix of int_Omega c phi_j phi_i; c defaults to 1.

    The lumped variant is the row-sum diagonal of the consistent matrix.
    """
    w, phi, _ = mesh.quadrature()
    if weight is None:
        c = np.ones((mesh.num_elements, w.size))
    else:
        c = Field(weight).on_cells(mesh)
    local = np.einsum("q,eq,qa,qb->eab", w, c, phi, phi)
    M = _scatter(mesh, local)
    return lump(M) if lumped else M


def assemble_stiffness(mesh: Mesh, Q) -> sp.csr_matrix:
    """Stiffness matrix K_ij = int (grad phi_j)^T Q grad phi_i.

    ``Q`` may be a :class:`CoefficientSet`; assembly is then refused unless
    the coefficients pass validation.
    """
    if isinstance(Q, CoefficientSet):
        if not Q._validated:
            report = validate_coefficients(mesh, Q)
            if not report.passed:
                raise HypothesisViolation("refusing to assemble with unvalidated coefficients: "
                                          + ", ".join(c.name for c in report.failures()))
        Q = Q.Q
    Qv = MatrixField(Q).on_cells(mesh)
    w, _, dphi = mesh.quadrature()
    local = np.einsum("q,qai,eqij,qbj->eab", w, dphi, Qv, dphi)
    local = (local + np.swapaxes(local, 1, 2)) / 2
    return _scatter(mesh, local)


def assemble_boundary_mass(mesh: Mesh, weight=1.0) -> sp.csr_matrix:
    """Diagonal N x N matrix with weight(x_j) * surface weight_j at boundary nodes."""
    vals = Field(weight).on_boundary(mesh) * mesh.boundary_weights
    diag = np.zeros(mesh.num_nodes)
    diag[mesh.boundary_nodes] = vals
    return sp.diags(diag).tocsr()


@dataclass(eq=False)
class RealizedOperator:
    """Discrete Neumann/Robin realization B_h = M^{-1}(K + M_gamma_delta)."""

    M_omega: sp.csr_matrix
    K: sp.csr_matrix
    M_gamma_delta: sp.csr_matrix
    mode: str
    semibound: float
    mesh: Mesh | None = None
    _lu: object = field(default=None, repr=False)

    @property
    def S(self) -> sp.csr_matrix:
        """The Robin stiffness K + M_gamma_delta."""
        return (self.K + self.M_gamma_delta).tocsr()

    @property
    def size(self) -> int:
        return self.K.shape[0]

    @property
    def has_robin(self) -> bool:
        return self.M_gamma_delta.nnz > 0 and np.any(self.M_gamma_delta.diagonal() > 0)

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        if self.mode == "lumped":
            d = self.M_omega.diagonal()
            return rhs / (d[:, None] if np.ndim(rhs) == 2 else d)
        if self._lu is None:
            self._lu = spla.splu(self.M_omega.tocsc())
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.solve_mass(self.S @ u)

    def dense(self) -> np.ndarray:
        """B_h as a dense matrix."""
        return self.solve_mass(self.S.toarray())


def _smallest_generalized(S: sp.spmatrix, M: sp.spmatrix) -> float:
    """Smallest eigenvalue of S x = lambda M x, polished by its Rayleigh quotient."""
    N = S.shape[0]
    if N <= DENSE_LIMIT:
        _, vec = sla.eigh(S.toarray(), M.toarray(), subset_by_index=[0, 0])
        x = vec[:, 0]
    else:
        _, vec = spla.eigsh(S.tocsc(), k=1, M=M.tocsc(), sigma=-1e-3, which="LM")
        x = vec[:, 0]
    return float((x @ (S @ x)) / (x @ (M @ x)))


def discrete_realization(M_omega, K, M_gamma_delta, mode: str = "consistent", mesh: Mesh | None = None) -> RealizedOperator:
    """Bundle the assembled matrices into a realization and compute its semibound."""
    if mode not in ("lumped", "consistent"):
        raise ValueError(f"mode must be 'lumped' or 'consistent', got {mode!r}")
    M = sp.csr_matrix(M_omega)
    if mode == "lumped":
        M = lump(M)
        if np.any(M.diagonal() <= 0):
            raise AssemblyError("lumped mass has a non-positive diagonal entry")
    else:
        if M.shape[0] <= DENSE_LIMIT:
            try:
                np.linalg.cholesky(M.toarray())
            except np.linalg.LinAlgError:
                raise AssemblyError("consistent mass matrix is not positive definite") from None
        elif np.any(M.diagonal() <= 0):
            raise AssemblyError("consistent mass has a non-positive diagonal entry")
    K = sp.csr_matrix(K)
    Mgd = sp.csr_matrix(M_gamma_delta)
    lam_b = _smallest_generalized(K + Mgd, M)
    return RealizedOperator(M, K, Mgd, mode, lam_b, mesh)


def realize(mesh: Mesh, coeffs: CoefficientSet, mode: str | None = None) -> RealizedOperator:
    """Validate the coefficients, assemble, and return B_h for ``mesh``."""
    validate_coefficients(mesh, coeffs).raise_if_failed()
    mode = mode or default_mode(mesh)
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh, coeffs)
    Mgd = assemble_boundary_mass(mesh, coeffs.delta)
    return discrete_realization(M, K, Mgd, mode, mesh)


def weak_conormal_trace(op: RealizedOperator, u, w, E=None, W=None) -> np.ndarray:
    """Discrete co-normal derivative g of u given w = -div Q grad u.

    g is the unique boundary vector with
    v^T K u - v^T M w = (E v)^T W g for every discrete v,
    which is the variational definition of the co-normal trace.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    N = op.size
    if u.shape != (N,) or w.shape != (N,):
        raise ShapeError(f"expected vectors of length {N}, got {u.shape} and {w.shape}")
    if E is None or W is None:
        E, W = boundary_trace_map(op.mesh)
    return (E @ (op.K @ u - op.M_omega @ w)) / W.diagonal()


def solve_second_order(op: RealizedOperator, lam: float, f, g, E=None, W=None, tol: float = 1e-10) -> np.ndarray:
    """Weak solution of lam u - div Q grad u = f, d_nu^Q u + delta u = g.

    For lam = 0 and delta = 0 the problem is solvable only if
    int f + int g = 0; compatible data return the mean-zero solution.
    """
    if lam < 0:
        raise PreconditionError("lambda must be non-negative")
    if E is None or W is None:
        E, W = boundary_trace_map(op.mesh)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    N = op.size
    if f.shape != (N,) or g.shape != (E.shape[0],):
        raise ShapeError(f"data lengths {f.shape}, {g.shape} do not match ({N},), ({E.shape[0]},)")
    M = op.M_omega
    rhs = M @ f + E.T @ (W @ g)
    lhs = (lam * M + op.S).tocsc()
    if lam == 0 and not op.has_robin:
        ones = np.ones(N)
        m1 = M @ ones
        defect = float(ones @ rhs)
        scale = float(np.abs(M @ f).sum() + np.abs(W @ g).sum()) or 1.0
        if abs(defect) > tol * scale:
            raise SingularSystemError(
                f"Neumann problem with lambda = 0 needs int f + int g = 0; defect = {defect:.3e}", defect
            )
        rhs = rhs - defect / float(ones @ m1) * m1
        bordered = sp.bmat([[lhs, m1[:, None]], [m1[None, :], None]], format="csc")
        sol = spla.spsolve(bordered, np.append(rhs, 0.0))
        u = sol[:N]
    else:
        u = spla.spsolve(lhs, rhs)
    # normwise backward error
    res = np.linalg.norm(lhs @ u - rhs, np.inf)
    scale = spla.norm(lhs, np.inf) * np.linalg.norm(u, np.inf) + np.linalg.norm(rhs, np.inf)
    if scale > 0 and res > tol * scale:
        raise SingularSystemError(f"second-order solve residual {res:.3e} exceeds tolerance")
    return u
