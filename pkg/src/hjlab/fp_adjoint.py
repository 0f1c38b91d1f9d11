"""Adjoint Fokker–Planck solver with zero-flux walls and a point-mass initial datum.

The density solves ``ρ_t − εΔρ + div(bρ) = 0`` forward in time from ``τ``
with ``ερ_ν − (b·ν)ρ = 0`` on the walls.  One step from ``t`` to ``t + dt``
is::

    ρ' = (I − dt·ε·L)⁻¹ (I − dt·Bᵀ) ρ

where ``B`` is the upwind transport operator ``φ ↦ −b·Dφ`` built from face
velocities (the average of the two neighbouring cell values) and ``L`` the
Neumann Laplacian.  ``B`` annihilates constants and ``L`` is symmetric, so
the step conserves mass exactly; under ``dt·Σ_i max|b_i|/h_i <= 1/2`` every
factor is entrywise nonnegative.  Transport comes first so that a stored
density is an exact fixed point of the discrete stationary balance.
:func:`backward_step` applies the transpose, which is the
advection-diffusion part of the linearized Hamilton–Jacobi step, so the
two satisfy a discrete duality identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import CompatibilityError, InputError, PositivityFault, RangeError, SolverError, StabilityError
from .grid import Grid, ImplicitDiffusion, ScalarField, central_gradient
from .hamiltonian import HamiltonianSpec, grad

MASS_RTOL = 1e-12
NEG_TOL = -1e-14


# ---------------------------------------------------------------------------
# drifts


def face_velocities(grid: Grid, cell_b: np.ndarray) -> list[np.ndarray]:
    """Normal velocity at the interior faces of each axis.

    ``cell_b`` has shape ``(*grid.shape, dim)``; entry ``k`` of the result has
    ``cells[k] − 1`` entries along axis ``k``.
    """
    cell_b = np.asarray(cell_b, dtype=float)
    if cell_b.shape != grid.shape + (grid.dim,):
        raise CompatibilityError(f"drift must have shape {grid.shape + (grid.dim,)}, got {cell_b.shape}")
    out = []
    for k in range(grid.dim):
        c = cell_b[..., k]
        n = c.shape[k]
        lo = np.take(c, np.arange(n - 1), axis=k)
        hi = np.take(c, np.arange(1, n), axis=k)
        out.append(0.5 * (lo + hi))
    return out


@dataclass(frozen=True)
class Drift:
    """A velocity field ``b(x, t)`` given by its cell-center samples at each time."""

    grid: Grid
    sample: Callable[[float], np.ndarray]
    name: str = "custom"

    @classmethod
    def constant(cls, grid: Grid, b) -> "Drift":
        vec = np.broadcast_to(np.asarray(b, dtype=float), (grid.dim,))
        cells = np.broadcast_to(vec, grid.shape + (grid.dim,)).copy()
        return cls(grid, lambda t: cells, name=f"constant{tuple(vec.tolist())}")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable, name: str = "custom") -> "Drift":
        """``fn(points, t)`` receives cell centers of shape ``(*shape, dim)``."""
        pts = grid.points()
        return cls(grid, lambda t: np.asarray(fn(pts, t), dtype=float), name=name)

    def faces(self, t: float) -> list[np.ndarray]:
        b = self.sample(t)
        if not np.all(np.isfinite(b)):
            raise InputError(f"drift is not finite at t={t}")
        return face_velocities(self.grid, b)


def drift_from_solution(u_traj, hamiltonian: HamiltonianSpec | None = None) -> Drift:
    """``b = −D_pH(Du)`` from the stored steps of a solution, central gradient at cells.

    Between stored steps the nearest one is used; for exact pairing with the
    solution the trajectory should keep every step.
    """
    H = hamiltonian if hamiltonian is not None else u_traj.problem.hamiltonian
    g = u_traj.grid
    cache: dict[int, np.ndarray] = {}

    def sample(t):
        k = int(np.argmin(np.abs(u_traj.times - t)))
        if k not in cache:
            cache[k] = -grad(H, central_gradient(u_traj.values[k], g.h))
        return cache[k]

    return Drift(g, sample, name=f"-D_pH(Du), H={H.name}")


# ---------------------------------------------------------------------------
# one step and its transpose


def _check_cfl(faces, h, dt, t):
    c = dt * sum(float(np.max(np.abs(f))) / hk if f.size else 0.0 for f, hk in zip(faces, h))
    if c > 0.5 * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} violates dt·Σ max|b_i|/h_i <= 1/2 at t={t:.4g} (value {c:.3f})")


def _advect(rho, faces, h, dt):
    """``(I − dt·Bᵀ) ρ``: explicit upwind transport with closed walls."""
    if rho.ndim == 1:
        return _kernels.fp_advect_1d(rho, faces[0], h[0], dt, np.empty_like(rho))
    out = rho.copy()
    for k, (bf, hk) in enumerate(zip(faces, h)):
        n = rho.shape[k]
        lo = np.take(rho, np.arange(n - 1), axis=k)
        hi = np.take(rho, np.arange(1, n), axis=k)
        flux = (dt / hk) * (np.maximum(bf, 0) * lo + np.minimum(bf, 0) * hi)
        pad = [(0, 0)] * rho.ndim
        pad[k] = (0, 1)
        out -= np.pad(flux, pad)
        pad[k] = (1, 0)
        out += np.pad(flux, pad)
    return out


def _transport_transpose(phi, faces, h, dt):
    """``(I − dt·B) φ`` with ``Bφ = −b·Dφ`` upwinded against the drift."""
    out = phi.copy()
    for k, (bf, hk) in enumerate(zip(faces, h)):
        d = np.diff(phi, axis=k) / hk
        pad = [(0, 0)] * phi.ndim
        pad[k] = (0, 1)
        out += dt * np.pad(np.maximum(bf, 0) * d, pad)
        pad[k] = (1, 0)
        out += dt * np.pad(np.minimum(bf, 0) * d, pad)
    return out


def fp_step(rho: np.ndarray, faces, grid: Grid, eps: float, dt: float,
            diffusion: ImplicitDiffusion | None = None) -> np.ndarray:
    """Advance a density by one step: upwind transport, then implicit diffusion."""
    diffusion = diffusion if diffusion is not None else ImplicitDiffusion(grid, dt * eps)
    rho = np.ascontiguousarray(rho, dtype=float)
    return diffusion.solve(_advect(rho, faces, grid.h, dt), refine=True)


def backward_step(phi: np.ndarray, faces, grid: Grid, eps: float, dt: float,
                  diffusion: ImplicitDiffusion | None = None) -> np.ndarray:
    """Transpose of :func:`fp_step`: diffuse a test function, then transport it."""
    diffusion = diffusion if diffusion is not None else ImplicitDiffusion(grid, dt * eps)
    return _transport_transpose(diffusion.solve(np.asarray(phi, dtype=float), refine=True), faces, grid.h, dt)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class DensityTrajectory:
    """Densities at increasing times ``τ = t_0 < … < t_m = T`` with mass and min ledgers."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), *grid.shape)
    dt: float
    eps: float
    x0: tuple
    tau: float
    mass_ledger: np.ndarray = field(init=False)
    min_ledger: np.ndarray = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise InputError("values must have shape (n_times, *grid.shape)")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise InputError("time steps must be strictly increasing")
        flat = self.values.reshape(len(self.times), -1)
        self.mass_ledger = flat.sum(axis=1) * self.grid.cell_volume
        self.min_ledger = flat.min(axis=1)

    def __len__(self):
        return len(self.times)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        if not self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12:
            raise RangeError(f"t={t} lies outside the trajectory span [{self.times[0]}, {self.times[-1]}]")
        return int(np.argmin(np.abs(self.times - t)))

    def at(self, t: float) -> ScalarField:
        k = self.index_of(t)
        return ScalarField(self.grid, self.values[k], float(self.times[k]))

    def mass_drift(self) -> float:
        """Largest relative deviation of the mass ledger from the initial mass."""
        m0 = self.mass_ledger[0]
        return float(np.max(np.abs(self.mass_ledger - m0)) / abs(m0))


def solve_adjoint(drift: Drift, eps: float, x0, tau: float, dt: float, T: float | None = None,
                  mass: float = 1.0) -> DensityTrajectory:
    """March a point mass at ``x0`` from ``τ`` to ``T`` under ``drift``.

    The step from ``t`` to ``t + dt`` uses the drift at ``t + dt``, which
    matches the explicit Hamiltonian step of the backward solver.  ``T``
    defaults to 1; the step is shrunk so that ``T − τ`` is a whole number
    of steps.
    """
    g = drift.grid
    T = 1.0 if T is None else float(T)
    if not eps > 0:
        raise InputError(f"eps must be positive, got {eps}")
    if not 0 <= tau < T:
        raise InputError(f"need 0 <= tau < T, got tau={tau}, T={T}")
    if not dt > 0:
        raise InputError("dt must be positive")
    idx = g.locate(x0)
    n_steps = max(1, int(np.ceil((T - tau) / dt - 1e-9)))
    dt = (T - tau) / n_steps
    times = tau + dt * np.arange(n_steps + 1)
    times[-1] = T

    diffusion = ImplicitDiffusion(g, dt * eps)
    rho = np.zeros(g.shape)
    rho[idx] = mass / g.cell_volume
    out = np.empty((n_steps + 1,) + g.shape)
    out[0] = rho
    for j in range(n_steps):
        faces = drift.faces(times[j + 1])
        _check_cfl(faces, g.h, dt, times[j + 1])
        rho = diffusion.solve(_advect(rho, faces, g.h, dt), refine=True)
        if j == 0 and not np.all(np.isfinite(rho)):
            raise SolverError("non-finite density after the first step")
        out[j + 1] = rho
    traj = DensityTrajectory(g, times, out, dt, float(eps), tuple(np.atleast_1d(x0).tolist()), float(tau))
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite density values")
    worst = float(traj.min_ledger.min())
    if worst < NEG_TOL:
        k = int(np.argmin(traj.min_ledger))
        raise PositivityFault(f"density reached {worst:.3e} at t={times[k]:.4g}")
    if traj.mass_drift() > MASS_RTOL:
        raise SolverError(f"mass drifted by {traj.mass_drift():.2e} (relative)")
    return traj


def mass(traj: DensityTrajectory, t: float) -> float:
    """Total mass at the stored step nearest to ``t``."""
    return float(traj.mass_ledger[traj.index_of(t)])


def _field_on(traj: DensityTrajectory, fld) -> np.ndarray:
    if isinstance(fld, ScalarField):
        if not fld.grid.same_as(traj.grid):
            raise CompatibilityError("field and trajectory live on different grids")
        return np.broadcast_to(fld.values, traj.values.shape)
    if not fld.grid.same_as(traj.grid):
        raise CompatibilityError("field and trajectory live on different grids")
    tol = 0.25 * min(traj.dt, fld.dt)
    ks = np.array([int(np.argmin(np.abs(fld.times - t))) for t in traj.times])
    gap = np.abs(fld.times[ks] - traj.times)
    if np.any(gap > tol):
        raise CompatibilityError(
            f"field has no step within {tol:.2e} of t={traj.times[int(np.argmax(gap))]:.6g}"
        )
    return fld.values[ks]


def pair(traj: DensityTrajectory, fld, weight: Callable | None = None, rule: str = "trapezoid") -> float:
    """``∫ w(t) ∫ field·ρ dx dt`` over the trajectory's steps.

    ``fld`` is a space-time field with a step at every trajectory time, or a
    time-independent ScalarField.  ``weight`` maps an array of times to
    weights and defaults to 1.  ``rule="left"`` sums ``dt·F(t_j)`` over every
    step but the last one at ``t = T``; it matches the implicit dissipation
    of the solver and stays finite when the terminal datum has a kink,
    whose discrete Hessian at ``t = T`` is of size ``1/h``.
    """
    vals = _field_on(traj, fld)
    inner = np.sum((vals * traj.values).reshape(len(traj), -1), axis=1) * traj.grid.cell_volume
    if weight is not None:
        inner = inner * np.asarray(weight(traj.times), dtype=float)
    if rule == "trapezoid":
        return float(np.trapezoid(inner, traj.times))
    if rule == "left":
        return float(np.sum(inner[:-1] * np.diff(traj.times)))
    raise InputError(f"unknown quadrature rule {rule!r}")
