"""Coefficient data (Q, alpha, beta, gamma, delta) and hypothesis checks.

Interior fields (Q, alpha) are sampled at the element sample points of the
mesh, boundary fields (beta, gamma, delta) at the boundary nodes. Validation
and assembly read the same samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, HypothesisViolation, NotEllipticError
from .expr import Expression
from .mesh import Mesh


class Field:
    """Scalar coefficient field.

    ``spec`` may be a number, an expression string, a callable on (m, d)
    point arrays, ``{"cells": [...]}`` (one value per element, interior
    fields only) or ``{"boundary": [...]}`` (one value per boundary node).
    """

    def __init__(self, spec: Any):
        self.spec = spec
        if isinstance(spec, Field):
            self.kind, self._value = spec.kind, spec._value
        elif isinstance(spec, bool):
            raise ConfigError("boolean is not a coefficient value")
        elif isinstance(spec, (int, float, np.floating, np.integer)):
            self.kind, self._value = "constant", float(spec)
        elif isinstance(spec, str):
            self.kind, self._value = "expr", Expression(spec)
        elif callable(spec):
            self.kind, self._value = "callable", spec
        elif isinstance(spec, dict) and set(spec) == {"cells"}:
            self.kind, self._value = "cells", np.asarray(spec["cells"], dtype=float)
        elif isinstance(spec, dict) and set(spec) == {"boundary"}:
            self.kind, self._value = "boundary", np.asarray(spec["boundary"], dtype=float)
        else:
            raise ConfigError(f"unrecognised coefficient specification: {spec!r}")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def on_cells(self, mesh: Mesh) -> np.ndarray:
        """Values at the element sample points, shape (n_el, q)."""
        pts = mesh.sample_points()
        n_el, q, d = pts.shape
        if self.kind == "constant":
            return np.full((n_el, q), self._value)
        if self.kind == "cells":
            if self._value.shape != (n_el,):
                raise ConfigError(f"per-cell table has {self._value.size} entries, mesh has {n_el} cells")
            return np.repeat(self._value[:, None], q, axis=1)
        if self.kind == "boundary":
            raise ConfigError("a boundary table cannot be used as an interior coefficient")
        vals = np.asarray(self._value(pts.reshape(-1, d)), dtype=float)
        return np.broadcast_to(vals, (n_el * q,)).reshape(n_el, q).copy()

    def on_boundary(self, mesh: Mesh) -> np.ndarray:
        """Values at the boundary nodes, shape (n_b,)."""
        nb = mesh.num_boundary
        if self.kind == "constant":
            return np.full(nb, self._value)
        if self.kind == "boundary":
            if self._value.shape != (nb,):
                raise ConfigError(f"boundary table has {self._value.size} entries, mesh has {nb} boundary nodes")
            return self._value.copy()
        if self.kind == "cells":
            raise ConfigError("a per-cell table cannot be used as a boundary coefficient")
        vals = np.asarray(self._value(mesh.boundary_points()), dtype=float)
        return np.broadcast_to(vals, (nb,)).copy()

    def to_spec(self):
        if self.kind == "constant":
            return self._value
        if self.kind == "expr":
            return self._value.source
        if self.kind in ("cells", "boundary"):
            return {self.kind: self._value.tolist()}
        raise ConfigError("callable coefficients are not serialisable")

    def __repr__(self):
        return f"Field({self.to_spec() if self.kind != 'callable' else self._value!r})"


class MatrixField:
    """Matrix-valued diffusion coefficient Q(x).

    Accepts a scalar field spec (meaning q(x) * I), a d x d nested list of
    scalar field specs, ``{"cells": [...]}`` with per-cell scalars or
    matrices, or a callable returning (m, d, d).
    """

    def __init__(self, spec: Any):
        self.spec = spec
        if isinstance(spec, MatrixField):
            self.kind, self._value = spec.kind, spec._value
        elif isinstance(spec, dict) and set(spec) == {"cells"} and np.ndim(spec["cells"]) == 3:
            self.kind, self._value = "cell-matrices", np.asarray(spec["cells"], dtype=float)
        elif isinstance(spec, (list, tuple)):
            rows = [[Field(e) for e in row] for row in spec]
            if len(rows) == 0 or any(len(r) != len(rows) for r in rows):
                raise ConfigError("Q must be a square matrix")
            self.kind, self._value = "entries", rows
        elif callable(spec) and not isinstance(spec, (str, Field)):
            self.kind, self._value = "callable", spec
        else:
            self.kind, self._value = "scalar", Field(spec)

    @property
    def is_identity(self) -> bool:
        return self.kind == "scalar" and self._value.is_constant and self._value._value == 1.0

    def on_cells(self, mesh: Mesh) -> np.ndarray:
        """Values at the element sample points, shape (n_el, q, d, d)."""
        d = mesh.dimension
        pts = mesh.sample_points()
        n_el, q, _ = pts.shape
        eye = np.eye(d)
        if self.kind == "scalar":
            return self._value.on_cells(mesh)[:, :, None, None] * eye
        if self.kind == "cell-matrices":
            if self._value.shape != (n_el, d, d):
                raise ConfigError(f"per-cell Q table must have shape ({n_el}, {d}, {d})")
            return np.repeat(self._value[:, None], q, axis=1)
        if self.kind == "entries":
            if len(self._value) != d:
                raise ConfigError(f"Q is {len(self._value)}x{len(self._value)} on a {d}D mesh")
            out = np.empty((n_el, q, d, d))
            for i in range(d):
                for j in range(d):
                    out[:, :, i, j] = self._value[i][j].on_cells(mesh)
            return out
        vals = np.asarray(self._value(pts.reshape(-1, d)), dtype=float)
        return vals.reshape(n_el, q, d, d)

    def to_spec(self):
        if self.kind == "scalar":
            return self._value.to_spec()
        if self.kind == "entries":
            return [[e.to_spec() for e in row] for row in self._value]
        if self.kind == "cell-matrices":
            return {"cells": self._value.tolist()}
        raise ConfigError("callable coefficients are not serialisable")


@dataclass
class CoefficientSet:
    """The coefficient data of the fourth-order Wentzell problem."""

    Q: Any = 1.0
    alpha: Any = 1.0
    beta: Any = 1.0
    gamma: Any = 0.0
    delta: Any = 0.0
    eta: float = 0.5
    kappa_Q: float = 0.5
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.Q = MatrixField(self.Q)
        for name in ("alpha", "beta", "gamma", "delta"):
            setattr(self, name, Field(getattr(self, name)))
        if not (self.eta > 0 and self.kappa_Q > 0):
            raise ConfigError("eta and kappa_Q must be positive")

    def to_spec(self) -> dict:
        return {
            "Q": self.Q.to_spec(),
            "alpha": self.alpha.to_spec(),
            "beta": self.beta.to_spec(),
            "gamma": self.gamma.to_spec(),
            "delta": self.delta.to_spec(),
            "eta": self.eta,
            "kappa_Q": self.kappa_Q,
        }


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    margin: float


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "margin": c.margin} for c in self.checks],
        }

    def raise_if_failed(self):
        if not self.passed:
            names = ", ".join(c.name for c in self.failures())
            raise HypothesisViolation(f"coefficient hypotheses violated: {names}")


def validate_coefficients(mesh: Mesh, coeffs: CoefficientSet, sym_tol: float = 1e-12) -> ValidationReport:
    """Check the standing hypotheses pointwise on the mesh samples.

    Margins are worst cases: min(alpha - eta), min(beta - eta), min(delta),
    min(lambda_min(Q) - kappa_Q) and the largest asymmetry of Q. Smoothness of
    Q is taken on trust.
    """
    Qv = coeffs.Q.on_cells(mesh).reshape(-1, mesh.dimension, mesh.dimension)
    asym = float(np.max(np.abs(Qv - np.swapaxes(Qv, 1, 2)))) if Qv.size else 0.0
    qmin = float(np.min(np.linalg.eigvalsh((Qv + np.swapaxes(Qv, 1, 2)) / 2)))
    a_margin = float(np.min(coeffs.alpha.on_cells(mesh))) - coeffs.eta
    b_margin = float(np.min(coeffs.beta.on_boundary(mesh))) - coeffs.eta
    d_margin = float(np.min(coeffs.delta.on_boundary(mesh)))
    gvals = coeffs.gamma.on_boundary(mesh)
    checks = [
        HypothesisCheck("Q symmetric", asym <= sym_tol, 0.0 - asym),
        HypothesisCheck("Q uniformly positive definite (<Q xi, xi> >= kappa_Q |xi|^2)", qmin - coeffs.kappa_Q >= 0, qmin - coeffs.kappa_Q),
        HypothesisCheck("alpha >= eta on Omega", a_margin >= 0, a_margin),
        HypothesisCheck("beta >= eta on Gamma", b_margin >= 0, b_margin),
        HypothesisCheck("delta >= 0 on Gamma", d_margin >= 0, d_margin),
        HypothesisCheck("gamma bounded and real", bool(np.all(np.isfinite(gvals))), float(np.min(gvals)) if gvals.size else 0.0),
    ]
    report = ValidationReport(checks)
    coeffs._validated = report.passed
    return report


def principal_symbol(coeffs: CoefficientSet, mesh: Mesh, xi: np.ndarray) -> np.ndarray:
    """a0(x, xi) = (xi^T Q xi) alpha (xi^T Q xi) at every sample point.

    ``xi`` has shape (s, d); the result has shape (n_samples_x, s).
    """
    d = mesh.dimension
    Qv = coeffs.Q.on_cells(mesh).reshape(-1, d, d)
    av = coeffs.alpha.on_cells(mesh).reshape(-1)
    quad = np.einsum("si,xij,sj->xs", xi, Qv, xi)
    return quad * av[:, None] * quad


@dataclass
class SymbolReport:
    a0_min: float
    a0_max: float
    lower_bound: float
    sector_angle: float

    def to_dict(self):
        return dict(a0_min=self.a0_min, a0_max=self.a0_max, lower_bound=self.lower_bound, sector_angle=self.sector_angle)


def unit_directions(dimension: int, samples: int) -> np.ndarray:
    if dimension == 1:
        return np.array([[1.0], [-1.0]])
    phi = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    return np.column_stack([np.cos(phi), np.sin(phi)])


def check_principal_symbol(coeffs: CoefficientSet, mesh: Mesh, sector_angle: float, samples: int = 64) -> SymbolReport:
    """Numerical parameter-ellipticity of lambda + B(alpha B) in the closed sector.

    With |xi| = 1, homogeneity reduces the estimate
    |lambda + a0| >= C (|lambda| + |xi|^4) to the rays lambda = r e^{+-i theta};
    r is sampled on [0, inf) through r = s / (1 - s). Returns the smallest
    observed ratio as C.
    """
    if not 0 < sector_angle < np.pi:
        raise ValueError("sector angle must lie in (0, pi)")
    xi = unit_directions(mesh.dimension, samples)
    a0 = principal_symbol(coeffs, mesh, xi).ravel()
    if np.any(a0 <= 0):
        raise NotEllipticError(f"principal symbol not positive: min a0 = {a0.min():.3e}")
    s = np.linspace(0.0, 1.0, 4 * samples + 1)[:-1]
    r = s / (1 - s)
    lam = r * np.exp(1j * sector_angle)  # the ray at -theta is the mirror image
    vals = np.unique(a0)
    ratio = np.abs(lam[None, :] + vals[:, None]) / (r[None, :] + 1.0)
    # xi -> 0 with lambda != 0 forces C <= 1
    bound = float(min(ratio.min(), 1.0))
    return SymbolReport(float(a0.min()), float(a0.max()), bound, float(sector_angle))
