"""The product space L2(Omega) x L2(Gamma, beta^{-1} dS) and the Wentzell form.

Conforming nodal functions satisfy u2 = tr u1 automatically, so operators
live on interior degrees of freedom ("coupled coordinates"); the boundary
part of the product inner product is folded into ``M_H``. Decoupled data
enter only through :func:`project_to_coupled`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import Field
from .elliptic_core import RealizedOperator, assemble_mass, assemble_stiffness
from .errors import HypothesisViolation, ShapeError, UnsupportedError
from .mesh import Mesh


@dataclass
class ProductState:
    """A pair (u1 on the nodes, u2 on the boundary nodes)."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)

    @classmethod
    def coupled(cls, mesh: Mesh, u1) -> "ProductState":
        u1 = np.asarray(u1, dtype=float)
        return cls(u1, u1[mesh.boundary_nodes].copy())

    @classmethod
    def from_functions(cls, mesh: Mesh, u1, u2=None) -> "ProductState":
        """Interpolate expressions/callables/constants; u2 defaults to the trace."""
        v1 = _interpolate(mesh.nodes, u1)
        if u2 is None:
            return cls.coupled(mesh, v1)
        return cls(v1, _interpolate(mesh.boundary_points(), u2))

    def check(self, mesh: Mesh):
        if self.u1.shape != (mesh.num_nodes,) or self.u2.shape != (mesh.num_boundary,):
            raise ShapeError(
                f"state of shape ({self.u1.shape}, {self.u2.shape}) does not match mesh "
                f"({mesh.num_nodes}, {mesh.num_boundary})"
            )

    def is_coupled(self, mesh: Mesh, tol: float = 1e-12) -> bool:
        self.check(mesh)
        scale = max(1.0, float(np.max(np.abs(self.u1), initial=0.0)))
        return bool(np.max(np.abs(self.u1[mesh.boundary_nodes] - self.u2), initial=0.0) <= tol * scale)

    def min(self) -> float:
        return float(min(self.u1.min(), self.u2.min(initial=np.inf)))


def _interpolate(points, spec):
    if isinstance(spec, (list, tuple, np.ndarray)):
        vals = np.asarray(spec, dtype=float)
        if vals.shape != (points.shape[0],):
            raise ShapeError(f"nodal table has {vals.size} values, expected {points.shape[0]}")
        return vals.copy()
    fld = Field(spec)
    if fld.is_constant:
        return np.full(points.shape[0], fld._value)
    return np.broadcast_to(fld._value(points), (points.shape[0],)).astype(float)


def _beta_weights(mesh: Mesh, beta) -> np.ndarray:
    b = Field(beta).on_boundary(mesh)
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise HypothesisViolation("beta must be bounded below by a positive constant on Gamma")
    return mesh.boundary_weights / b


def assemble_product_mass(mesh: Mesh, beta, M_omega=None) -> sp.csr_matrix:
    """M_H = M + E^T diag(w_j / beta_j) E on coupled coordinates."""
    M = assemble_mass(mesh) if M_omega is None else sp.csr_matrix(M_omega)
    diag = np.zeros(mesh.num_nodes)
    diag[mesh.boundary_nodes] = _beta_weights(mesh, beta)
    return (M + sp.diags(diag)).tocsr()


@dataclass(eq=False)
class WentzellSystem:
    """Discrete operator of the form a(u, v) = <alpha P u, P v> + <gamma u2, v2>_{Gamma,beta}.

    ``A`` is dense and symmetric on coupled coordinates. When gamma >= 0 the
    system also carries a Gram factor with A = gram.T @ gram, which lets
    eigenvalues be computed from singular values with small absolute error.
    """

    A: np.ndarray
    M_H: sp.csr_matrix
    order_power: int
    op: RealizedOperator
    mesh: Mesh
    M_alpha: sp.csr_matrix
    beta_weights: np.ndarray  # w_j / beta_j on boundary nodes
    gamma_weights: np.ndarray  # gamma_j w_j / beta_j on boundary nodes
    gram: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def E(self) -> sp.csr_matrix:
        return self.mesh.trace_operator()

    @property
    def boundary_gamma(self) -> sp.csr_matrix:
        diag = np.zeros(self.size)
        diag[self.mesh.boundary_nodes] = self.gamma_weights
        return sp.diags(diag).tocsr()

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ (self.M_H @ np.asarray(y)))

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def form(self, x, y) -> float:
        return float(np.asarray(x) @ (self.A @ np.asarray(y)))

    def project(self, f: ProductState) -> ProductState:
        return project_to_coupled(self.mesh, None, f, M_omega=self.op.M_omega, beta_weights=self.beta_weights)

    def coupled_vector(self, f) -> np.ndarray:
        """Coupled coordinates of ``f`` (projecting decoupled states)."""
        if isinstance(f, ProductState):
            f.check(self.mesh)
            return f.u1 if f.is_coupled(self.mesh) else self.project(f).u1
        f = np.asarray(f, dtype=float)
        if f.shape != (self.size,):
            raise ShapeError(f"expected a vector of length {self.size}, got {f.shape}")
        return f

    def state(self, u) -> ProductState:
        return ProductState.coupled(self.mesh, u)


def _is_laplacian(op: RealizedOperator, mesh: Mesh) -> bool:
    K0 = assemble_stiffness(mesh, 1.0)
    diff = abs(op.K - K0).max() if op.K.nnz else 0.0
    return diff <= 1e-12 * abs(K0).max()


def assemble_wentzell_form(op: RealizedOperator, alpha=1.0, gamma=0.0, beta=1.0, k: int = 1) -> WentzellSystem:
    """Assemble the Wentzell system (A, M_H) for the form of order 4k.

    k = 1: A = S M^{-1} M_alpha M^{-1} S + E^T diag(gamma w / beta) E with
    S = K + M_gamma_delta, i.e. the form <alpha B_h u, B_h v> of B(alpha B)
    with the Robin condition built into B_h. k >= 2 goes through
    :func:`assemble_power_form` with power 2k (Q = I and delta = 0 only).
    """
    if int(k) != k or k < 1:
        raise ValueError("order power k must be a positive integer")
    k = int(k)
    if k > 1:
        return assemble_power_form(op, alpha, gamma, beta, power=2 * k, order_power=k)
    mesh, M_alpha, beta_w, gamma_w = _prepare(op, alpha, gamma, beta)
    S = op.S
    Z = op.solve_mass(op.solve_mass(M_alpha.toarray()).T)  # M^{-1} M_alpha M^{-1}
    Z = (Z + Z.T) / 2
    A = S @ (S @ Z).T
    A = (A + A.T) / 2
    P = op.dense()
    return _finish(op, mesh, A, P, M_alpha, beta, beta_w, gamma_w, 1)


def assemble_power_form(op: RealizedOperator, alpha=1.0, gamma=0.0, beta=1.0, power: int = 1,
                        order_power: int | None = None) -> WentzellSystem:
    """Form <alpha P u, P v> + <gamma u2, v2>_{Gamma,beta} with P = B_h ** power.

    ``power = 2k`` realises the subsidiary form <Delta^k u, Delta^k v>, whose
    operator is the Neumann Laplacian to the power 2k; ``power = 1`` must
    reproduce :func:`assemble_wentzell_form` with k = 1.
    """
    mesh = op.mesh
    if int(power) != power or power < 1:
        raise ValueError("power must be a positive integer")
    if power > 1:
        if not _is_laplacian(op, mesh):
            raise UnsupportedError("higher-order powers are only defined for Q = I")
        if op.has_robin:
            raise UnsupportedError("higher-order powers are only defined for delta = 0")
    mesh, M_alpha, beta_w, gamma_w = _prepare(op, alpha, gamma, beta)
    P = np.linalg.matrix_power(op.dense(), int(power))
    A = P.T @ (M_alpha @ P)
    A = (A + A.T) / 2
    k = order_power if order_power is not None else max(1, int(power) // 2)
    return _finish(op, mesh, A, P, M_alpha, beta, beta_w, gamma_w, k, power=int(power))


def _prepare(op, alpha, gamma, beta):
    mesh = op.mesh
    if mesh is None:
        raise ValueError("the realization must carry its mesh")
    if np.any(Field(alpha).on_cells(mesh) <= 0):
        raise HypothesisViolation("alpha must be positive on Omega")
    M_alpha = assemble_mass(mesh, alpha, lumped=(op.mode == "lumped"))
    beta_w = _beta_weights(mesh, beta)
    gamma_w = Field(gamma).on_boundary(mesh) * beta_w
    return mesh, M_alpha, beta_w, gamma_w


def _finish(op, mesh, A, P, M_alpha, beta, beta_w, gamma_w, k, power=1):
    bn = mesh.boundary_nodes
    A[bn, bn] += gamma_w
    gram = None
    if np.all(gamma_w >= 0):
        L = np.linalg.cholesky(M_alpha.toarray())
        rows = np.zeros((bn.size, mesh.num_nodes))
        rows[np.arange(bn.size), bn] = np.sqrt(gamma_w)
        gram = np.vstack([L.T @ P, rows])
    return WentzellSystem(
        A=A,
        M_H=assemble_product_mass(mesh, beta, op.M_omega),
        order_power=k,
        op=op,
        mesh=mesh,
        M_alpha=M_alpha,
        beta_weights=beta_w,
        gamma_weights=gamma_w,
        gram=gram,
        metadata={"n": mesh.num_elements, "k": k, "power": power, "mode": op.mode},
    )


def _boundary_diag(mesh: Mesh, vals: np.ndarray) -> np.ndarray:
    d = np.zeros(mesh.num_nodes)
    d[mesh.boundary_nodes] = vals
    return d


def project_to_coupled(mesh: Mesh, beta, f: ProductState, M_omega=None, beta_weights=None) -> ProductState:
    """Orthogonal projection of (f1, f2) onto the coupled subspace in the product norm.

    Solves (M + E^T W_beta E) v = M f1 + E^T W_beta f2.
    """
    f.check(mesh)
    M = assemble_mass(mesh) if M_omega is None else sp.csr_matrix(M_omega)
    bw = _beta_weights(mesh, beta) if beta_weights is None else beta_weights
    d = _boundary_diag(mesh, bw)
    rhs = M @ f.u1
    rhs[mesh.boundary_nodes] += bw * f.u2
    v = spla.spsolve((M + sp.diags(d)).tocsc(), rhs)
    return ProductState.coupled(mesh, v)
