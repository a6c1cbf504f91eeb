"""Time evolution u' + A u = 0 on the product space.

Two independent routes: the eigen-expansion
T(t) f = sum_k exp(-lam_k t) <f, e_k>_H e_k, and the theta scheme
(M_H + theta dt A) u^{m+1} = (M_H - (1 - theta) dt A) u^m.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotSPDError, PreconditionError
from .spectral import EigenDecomposition
from .wentzell_operator import ProductState, WentzellSystem, _beta_weights

GROWTH_CAP = 1e12


class TruncationWarning(UserWarning):
    """Spectral evolution with an incomplete eigenbasis."""

    def __init__(self, message, dropped_mass):
        super().__init__(message)
        self.dropped_mass = dropped_mass


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # (T, N) coupled coordinates
    method: str
    system: WentzellSystem = field(repr=False)
    capped: bool = False

    @property
    def states(self) -> list:
        return [self.system.state(v) for v in self.values]

    def norms(self) -> np.ndarray:
        MV = (self.system.M_H @ self.values.T).T
        return np.sqrt(np.maximum(np.einsum("ti,ti->t", self.values, MV), 0.0))

    def pairings(self) -> np.ndarray:
        return conserved_pairing(self.values.T, self.system.M_H)


def evolve_spectral(decomp: EigenDecomposition, f, times) -> Trajectory:
    """Evaluate the eigen-expansion of the semigroup at each time."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise PreconditionError("times must be non-negative")
    system = decomp.system
    u0 = system.coupled_vector(f)
    c = decomp.coefficients(u0)
    if not decomp.complete:
        dropped = max(system.inner(u0, u0) - float(c @ c), 0.0)
        warnings.warn(TruncationWarning(
            f"truncated eigenbasis ({decomp.count} of {system.size} modes); dropped mass <= {dropped:.3e}",
            dropped), stacklevel=2)
    lam = decomp.eigenvalues
    capped = False
    if lam[0] < 0:
        # e^{-lam_1 t} <= GROWTH_CAP * ||f||_H
        t_max = np.log(GROWTH_CAP * max(system.norm(u0), 1e-300)) / (-lam[0])
        keep = times <= t_max
        capped = not bool(np.all(keep))
        times = times[keep]
    # the t = 0 state is f itself when the basis is complete
    decay = np.exp(-np.outer(times, lam))
    values = (decay * c) @ decomp.eigenvectors.T
    return Trajectory(times, values, "spectral", system, capped)


class ThetaStepper:
    """Factorised theta-scheme step for a Wentzell system.

    For the fourth-order form (power 1) the step is solved as the sparse
    mixed system in (u, w = M^{-1} S u, p = M^{-1} M_alpha w):

        [M_H + th dt G   0        th dt S^T] [u]   [rhs]
        [-S              M        0        ] [w] = [0  ]
        [0              -M_alpha  M        ] [p]   [0  ]

    (G is the gamma boundary term), so A is never inverted densely and
    A 1 = S^T p vanishes exactly when S 1 = 0. Higher powers use a dense LU.

    When A 1 = 0 (gamma = delta = 0) the exact scheme conserves 1^T M_H u.
    With ||dt A|| up to ~1e10 the solve's roundoff breaks this at the 1e-8
    level for rough data, so ``conserve=True`` removes the drift along the
    kernel direction 1, which A leaves untouched.
    """

    def __init__(self, system: WentzellSystem, dt: float, theta: float, conserve: bool = True):
        if not dt > 0:
            raise PreconditionError("dt must be positive")
        if not 0.5 <= theta <= 1.0:
            raise PreconditionError("theta must lie in [0.5, 1]")
        self.system, self.dt, self.theta = system, float(dt), float(theta)
        if system.gram is None:
            # A may be indefinite (gamma < 0): the implicit matrix must stay SPD
            try:
                np.linalg.cholesky(system.M_H.toarray() + theta * dt * system.A)
            except np.linalg.LinAlgError:
                raise NotSPDError(
                    f"M_H + theta dt A is not positive definite (dt = {dt:g}, theta = {theta:g}); reduce dt"
                ) from None
        op = system.op
        self._m1 = None
        if conserve and not op.has_robin and not np.any(system.gamma_weights):
            self._m1 = system.M_H @ np.ones(system.size)
            self._mass = float(self._m1.sum())
        self._mixed = system.order_power == 1 and system.metadata.get("power", 1) == 1
        if self._mixed:
            S, M, Ma = op.S, op.M_omega, system.M_alpha
            G = system.boundary_gamma
            th = theta * dt
            self._block = sp.bmat(
                [[system.M_H + th * G, None, th * S.T], [-S, M, None], [None, -Ma, M]], format="csc"
            )
            self._lu = spla.splu(self._block)
        else:
            self._lu_dense = sla.lu_factor(system.M_H.toarray() + theta * dt * system.A)

    def apply_A(self, u: np.ndarray) -> np.ndarray:
        system = self.system
        if self._mixed:
            op = system.op
            w = op.solve_mass(op.S @ u)
            p = op.solve_mass(system.M_alpha @ w)
            return op.S.T @ p + system.boundary_gamma @ u
        return system.A @ u

    def step(self, u: np.ndarray) -> np.ndarray:
        system = self.system
        rhs = system.M_H @ u
        if self.theta < 1.0:
            rhs = rhs - (1.0 - self.theta) * self.dt * self.apply_A(u)
        N = system.size
        if self._mixed:
            new = self._lu.solve(np.concatenate([rhs, np.zeros(2 * N)]))[:N]
        else:
            new = sla.lu_solve(self._lu_dense, rhs)
        if self._m1 is not None:
            new += (self._m1 @ u - self._m1 @ new) / self._mass
        return new


def step_theta(system: WentzellSystem, f, dt: float, theta: float, nsteps: int, record_every: int = 1,
               conserve: bool = True) -> Trajectory:
    """Theta-scheme trajectory; theta = 1 is implicit Euler, 0.5 Crank-Nicolson."""
    if int(nsteps) != nsteps or nsteps < 0:
        raise PreconditionError("nsteps must be a non-negative integer")
    stepper = ThetaStepper(system, dt, theta, conserve)
    u = system.coupled_vector(f).copy()
    times, values = [0.0], [u.copy()]
    for m in range(1, int(nsteps) + 1):
        u = stepper.step(u)
        if m % record_every == 0 or m == nsteps:
            times.append(m * dt)
            values.append(u.copy())
    return Trajectory(np.array(times), np.array(values), f"theta(theta={theta:g}, dt={dt:g})", system)


@dataclass
class SteadyState:
    state: ProductState
    value: float
    regime: str  # "conserved" (gamma = delta = 0) or "exponentially-stable"


def steady_state(f: ProductState, mesh, beta, gamma=0.0, delta=0.0, M_omega=None) -> SteadyState:
    """Long-time limit of T(t) f.

    With gamma = delta = 0 this is the constant
    (int f1 + int beta^{-1} f2) / (|Omega| + int beta^{-1}) on both components;
    otherwise (gamma, delta >= 0, not both zero) it is 0.
    """
    from .coefficients import Field
    from .elliptic_core import assemble_mass

    f.check(mesh)
    g = Field(gamma).on_boundary(mesh)
    d = Field(delta).on_boundary(mesh)
    if np.any(g < 0):
        raise PreconditionError("steady state is classified only for gamma >= 0 (gamma < 0 may produce a growing mode)")
    if np.any(g != 0) or np.any(d != 0):
        zero = ProductState(np.zeros(mesh.num_nodes), np.zeros(mesh.num_boundary))
        return SteadyState(zero, 0.0, "exponentially-stable")
    M = assemble_mass(mesh) if M_omega is None else M_omega
    bw = _beta_weights(mesh, beta)
    ones = np.ones(mesh.num_nodes)
    num = float(ones @ (M @ f.u1) + bw @ f.u2)
    den = float(ones @ (M @ ones) + bw.sum())
    value = num / den
    return SteadyState(ProductState(np.full(mesh.num_nodes, value), np.full(mesh.num_boundary, value)), value, "conserved")


def conserved_pairing(state, M_H):
    """1^T M_H u = int_Omega u1 + int_Gamma beta^{-1} u2 for coupled states.

    ``state`` may be a coupled ProductState, a vector, or an (N, T) array of
    column states (returns one pairing per column).
    """
    u = state.u1 if isinstance(state, ProductState) else np.asarray(state, dtype=float)
    ones = np.ones(M_H.shape[0])
    return (M_H @ ones) @ u


@dataclass
class PositivityReport:
    times: np.ndarray
    minima: np.ndarray
    argmin: np.ndarray  # node index of the minimum per time
    t0: float | None
    epsilon: float
    dip: dict

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "epsilon": self.epsilon,
            "dip": self.dip,
            "times": self.times.tolist(),
            "minima": self.minima.tolist(),
        }


def default_epsilon(system: WentzellSystem, f) -> float:
    u = system.coupled_vector(f)
    ones = np.ones(system.size)
    return 1e-3 * float(conserved_pairing(u, system.M_H) / conserved_pairing(ones, system.M_H))


def positivity_scan(decomp: EigenDecomposition, f: ProductState, t_grid, epsilon: float | None = None) -> PositivityReport:
    """Track min T(t) f over all interior and boundary nodes.

    t0 is the first grid time after which the minimum never falls below
    epsilon up to the end of the grid (None if it does at the last time).
    """
    system = decomp.system
    f.check(system.mesh)
    if f.min() < 0:
        raise PreconditionError("positivity scan needs nonnegative initial data")
    if not (np.any(f.u1 > 0) or np.any(f.u2 > 0)):
        raise PreconditionError("positivity scan needs nonzero initial data")
    eps = default_epsilon(system, f) if epsilon is None else float(epsilon)
    traj = evolve_spectral(decomp, f, t_grid)
    # coupled states: boundary values are the traces, so nodes cover both components
    minima = traj.values.min(axis=1)
    argmin = traj.values.argmin(axis=1)
    ok = minima >= eps
    t0 = None
    if ok.size and ok[-1]:
        bad = np.nonzero(~ok)[0]
        t0 = float(traj.times[0] if bad.size == 0 else traj.times[bad[-1] + 1])
    j = int(np.argmin(minima))
    node = int(argmin[j])
    mesh = system.mesh
    dip = {
        "t": float(traj.times[j]),
        "node": node,
        "component": "boundary" if node in set(mesh.boundary_nodes.tolist()) else "interior",
        "position": mesh.nodes[node].tolist(),
        "value": float(minima[j]),
    }
    return PositivityReport(traj.times, minima, argmin, t0, eps, dip)


def bump(mesh, center, width) -> ProductState:
    """Nonnegative cos^2 bump of half-width ``width`` (coupled)."""
    r = np.linalg.norm(mesh.nodes - np.asarray(center, dtype=float), axis=1)
    u = np.where(r < width, np.cos(np.pi * r / (2 * width)) ** 2, 0.0)
    return ProductState.coupled(mesh, u)


def domain_center(mesh) -> np.ndarray:
    return (mesh.nodes.min(axis=0) + mesh.nodes.max(axis=0)) / 2


@dataclass
class NonPositivityInstance:
    width: float
    t: float
    node: int
    value: float
    max_f: float
    times: list  # the evaluated grid, so a replay repeats the same arithmetic
    index: int

    @property
    def ratio(self) -> float:
        return self.value / self.max_f


def nonpositivity_search(decomp: EigenDecomposition, widths=(0.02, 0.05, 0.1), times=None,
                         threshold: float = 1e-6) -> NonPositivityInstance | None:
    """Search centred bumps and short times for a negative excursion of T(t) f.

    Returns the most negative instance with min < -threshold * max f, or None.
    """
    times = np.geomspace(1e-6, 1e-2, 41) if times is None else np.asarray(times, dtype=float)
    mesh = decomp.system.mesh
    best = None
    for w in widths:
        f = bump(mesh, domain_center(mesh), w)
        traj = evolve_spectral(decomp, f, times)
        fmax = f.u1.max()
        j, node = np.unravel_index(np.argmin(traj.values), traj.values.shape)
        value = float(traj.values[j, node])
        if value < -threshold * fmax and (best is None or value / fmax < best.ratio):
            best = NonPositivityInstance(float(w), float(traj.times[j]), int(node), value, float(fmax),
                                         traj.times.tolist(), int(j))
    return best


def replay_instance(decomp: EigenDecomposition, inst: NonPositivityInstance) -> float:
    mesh = decomp.system.mesh
    f = bump(mesh, domain_center(mesh), inst.width)
    return float(evolve_spectral(decomp, f, inst.times).values[inst.index, inst.node])


def nonnegative_family(mesh, count: int, seed: int) -> list:
    """Seeded nonnegative initial data, cycling through four shapes:
    random coupled nodal data, a random bump, boundary-only data (0, g) and
    interior-only data (f, 0). The last two are decoupled."""
    rng = np.random.default_rng(seed)
    out = []
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    for i in range(count):
        kind = i % 4
        if kind == 0:
            out.append(ProductState.coupled(mesh, rng.uniform(0.0, 1.0, mesh.num_nodes)))
        elif kind == 1:
            c = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
            out.append(bump(mesh, c, rng.uniform(0.03, 0.2) * float(np.max(hi - lo))))
        elif kind == 2:
            out.append(ProductState(np.zeros(mesh.num_nodes), rng.uniform(0.0, 1.0, mesh.num_boundary)))
        else:
            out.append(ProductState(rng.uniform(0.0, 1.0, mesh.num_nodes), np.zeros(mesh.num_boundary)))
    return out


def decay_fit(times, distances) -> float | None:
    """Least-squares rate r in distance ~ C exp(-r t) over positive distances."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    keep = d > 1e-13 * max(d.max(initial=0.0), 1e-300)
    if keep.sum() < 2:
        return None
    slope = np.polyfit(t[keep], np.log(d[keep]), 1)[0]
    return float(-slope)
