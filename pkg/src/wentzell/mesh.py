"""Uniform interval and rectangle meshes with nodal (P1 / Q1) shape functions.

Boundary quadrature is node-lumped: each boundary node carries the surface
measure of the half edges adjacent to it, so the boundary mass is diagonal.
In 1D the boundary is the two endpoints with counting measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDomainError, TooCoarseError

_GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform tensor-product mesh on an interval or a rectangle.

    ``nodes`` is (N, d); ``elements`` is (n_el, 2) in 1D and (n_el, 4) in 2D
    with counter-clockwise local ordering. ``boundary_nodes`` runs
    counter-clockwise around the rectangle starting at the lower-left corner.
    """

    dimension: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    boundary_weights: np.ndarray
    element_volumes: np.ndarray
    spacing: tuple
    shape: tuple  # element counts per direction
    origin: tuple = field(default=(0.0,))

    def __post_init__(self):
        for name in ("nodes", "elements", "boundary_nodes", "boundary_weights", "element_volumes"):
            getattr(self, name).setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def num_boundary(self) -> int:
        return self.boundary_nodes.shape[0]

    @property
    def volume(self) -> float:
        return float(np.sum(self.element_volumes))

    @property
    def surface(self) -> float:
        return float(np.sum(self.boundary_weights))

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    def boundary_points(self) -> np.ndarray:
        return self.nodes[self.boundary_nodes]

    def element_centers(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def quadrature(self):
        """Element quadrature rule shared by every element of the uniform mesh.

        Returns ``(ref_weights, phi, dphi)`` where ``phi[q, a]`` is shape
        function ``a`` at quadrature point ``q`` and ``dphi[q, a, :]`` its
        physical gradient. The 2-point Gauss rule (tensorised in 2D) is exact
        for products of two nodal shape functions.
        """
        if self.dimension == 1:
            (h,) = self.spacing
            s = _GAUSS2
            phi = np.stack([(1 - s) / 2, (1 + s) / 2], axis=1)
            dphi = np.tile(np.array([-1.0, 1.0]) / h, (2, 1))[:, :, None]
            w = np.full(2, h / 2)
            return w, phi, dphi
        hx, hy = self.spacing
        xi, eta = np.meshgrid(_GAUSS2, _GAUSS2, indexing="xy")
        xi, eta = xi.ravel(), eta.ravel()
        sa = np.array([-1.0, 1.0, 1.0, -1.0])
        ta = np.array([-1.0, -1.0, 1.0, 1.0])
        phi = (1 + xi[:, None] * sa) * (1 + eta[:, None] * ta) / 4
        dx = sa * (1 + eta[:, None] * ta) / 4 * (2 / hx)
        dy = (1 + xi[:, None] * sa) * ta / 4 * (2 / hy)
        dphi = np.stack([dx, dy], axis=2)
        w = np.full(4, hx * hy / 4)
        return w, phi, dphi

    def sample_points(self):
        """Points at which coefficients are sampled, shape (n_el, q, d).

        1D: the element midpoint repeated for each quadrature point (so a
        variable coefficient is treated as constant per cell). 2D: the
        physical 2x2 Gauss points.
        """
        _, phi, _ = self.quadrature()
        corners = self.nodes[self.elements]  # (n_el, k, d)
        if self.dimension == 1:
            mid = corners.mean(axis=1, keepdims=True)
            return np.repeat(mid, phi.shape[0], axis=1)
        return np.einsum("qa,ead->eqd", phi, corners)

    def trace_operator(self) -> sp.csr_matrix:
        """Selection matrix E with (E u)_j = u[boundary_nodes[j]]."""
        nb = self.num_boundary
        return sp.csr_matrix(
            (np.ones(nb), (np.arange(nb), self.boundary_nodes)), shape=(nb, self.num_nodes)
        )

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "nodes": self.nodes.tolist(),
            "elements": self.elements.tolist(),
            "boundary_nodes": self.boundary_nodes.tolist(),
            "boundary_weights": self.boundary_weights.tolist(),
            "element_volumes": self.element_volumes.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    """Mesh of (a, b) with ``n`` equal elements; Γ = {a, b} with unit weights."""
    if not a < b:
        raise InvalidDomainError(f"interval requires a < b, got a={a}, b={b}")
    if int(n) != n or n < 2:
        raise TooCoarseError(f"interval mesh needs n >= 2 elements, got {n}")
    n = int(n)
    x = np.linspace(a, b, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    h = (b - a) / n
    return Mesh(
        dimension=1,
        nodes=x[:, None].copy(),
        elements=elements,
        boundary_nodes=np.array([0, n]),
        boundary_weights=np.array([1.0, 1.0]),
        element_volumes=np.full(n, h),
        spacing=(h,),
        shape=(n,),
        origin=(float(a),),
    )


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Bilinear mesh of (0, lx) x (0, ly) with nx * ny rectangular cells."""
    if not (lx > 0 and ly > 0):
        raise InvalidDomainError(f"rectangle side lengths must be positive, got {lx}, {ly}")
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise TooCoarseError(f"rectangle mesh needs nx, ny >= 2, got {nx}, {ny}")
    nx, ny = int(nx), int(ny)
    hx, hy = lx / nx, ly / ny
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    I, J = I.ravel(), J.ravel()
    elements = np.column_stack([nid(I, J), nid(I + 1, J), nid(I + 1, J + 1), nid(I, J + 1)])

    # counter-clockwise perimeter walk from (0, 0)
    bottom = [nid(i, 0) for i in range(nx + 1)]
    right = [nid(nx, j) for j in range(1, ny + 1)]
    top = [nid(i, ny) for i in range(nx - 1, -1, -1)]
    left = [nid(0, j) for j in range(ny - 1, 0, -1)]
    boundary = np.array(bottom + right + top + left)

    weights = np.zeros(nodes.shape[0])
    for i in range(nx):
        for j in (0, ny):
            weights[nid(i, j)] += hx / 2
            weights[nid(i + 1, j)] += hx / 2
    for j in range(ny):
        for i in (0, nx):
            weights[nid(i, j)] += hy / 2
            weights[nid(i, j + 1)] += hy / 2

    return Mesh(
        dimension=2,
        nodes=nodes,
        elements=elements,
        boundary_nodes=boundary,
        boundary_weights=weights[boundary],
        element_volumes=np.full(nx * ny, hx * hy),
        spacing=(hx, hy),
        shape=(nx, ny),
        origin=(0.0, 0.0),
    )


def boundary_trace_map(mesh: Mesh):
    """Return the discrete trace ``E`` and the diagonal boundary weight ``W``."""
    return mesh.trace_operator(), sp.diags(mesh.boundary_weights).tocsr()
