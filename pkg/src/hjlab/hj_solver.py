"""Terminal-value solver for viscous and inviscid Hamilton–Jacobi equations.

The problem ``−u_t − εΔu + H(Du) = f`` with ``∂_ν u = 0`` and ``u(T) = u_T``
is marched in reversed time ``s = T − t``::

    (I − dt·ε·L) w = uⁿ
    uⁿ⁺¹ = w − dt·Ĥ(D⁻w, D⁺w) + dt·f(t_n − dt/2)

where ``Ĥ`` is the Lax–Friedrichs flux and ``L`` the even-reflection
Neumann Laplacian.  The source is sampled at mid-step, so sources affine in
time are integrated exactly.  With ``ε = 0`` the march is the plain
monotone scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .errors import InputError, SolverError, StabilityError
from . import _kernels
from .grid import Grid, ImplicitDiffusion, ScalarField, one_sided_differences
from .hamiltonian import HamiltonianSpec, lf_flux, partial_sup, partial_sup_ball

SIGMA_SAFETY = 1.1
LINEAR_RTOL = 1e-12


@dataclass
class ProblemSpec:
    """Data of one terminal-value problem; catalog names resolve on construction."""

    grid: Grid
    T: float
    hamiltonian: HamiltonianSpec
    terminal: str = "constant"
    source: str = "zero"
    terminal_params: dict = field(default_factory=dict)
    source_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.T > 0:
            raise InputError(f"horizon T must be positive, got {self.T}")
        self.T = float(self.T)
        self.terminal_entry = catalog.load(
            self.terminal, "terminal", self.grid.dim, self.grid, self.T, **self.terminal_params
        )
        sp_params = dict(self.source_params)
        if self.source == "mms_cos":
            sp_params.setdefault("hamiltonian", self.hamiltonian)
        self.source_entry = catalog.load(
            self.source, "source", self.grid.dim, self.grid, self.T, **sp_params
        )
        self._source = catalog.SourceSampler(self.source_entry, self.grid)
        self._terminal = self.terminal_entry.sample(self.grid)

    def with_grid(self, grid: Grid) -> "ProblemSpec":
        return ProblemSpec(
            grid, self.T, self.hamiltonian, self.terminal, self.source,
            dict(self.terminal_params), dict(self.source_params),
        )

    def terminal_values(self) -> np.ndarray:
        return self._terminal.copy()

    def source_values(self, t: float) -> np.ndarray:
        return self._source(t)

    @property
    def source_is_zero(self) -> bool:
        return self.source == "zero"

    @property
    def M0(self) -> float | None:
        return self.terminal_entry.M0()

    def c_f_integral(self) -> float | None:
        return self.source_entry.c_f_integral(self.T)

    def c_f_sup(self) -> float | None:
        """``sup_t c_f(t)``; the time-constant c_f used in the second-order bound."""
        if self.source_entry.delta_plus is None:
            return None
        return max(self.source_entry.c_f(t) for t in np.linspace(0.0, self.T, 65))

    @property
    def flags(self) -> dict:
        term, src = self.terminal_entry, self.source_entry
        return {
            "lipschitz_data": term.lipschitz is not None and src.lipschitz is not None,
            "semi_superharmonic_terminal": term.delta_plus is not None
            and all(s >= 0 for s in term.normal_sign),
            "source_delta_bound": src.delta_plus is not None,
            "source_normal_nonneg": all(s >= 0 for s in src.normal_sign),
        }

    def lipschitz_bound(self) -> float:
        """A priori bound ``Lip(u_T) + ∫_0^T Lip_x f(t) dt`` for the solution on a convex box."""
        lt = self.terminal_entry.lipschitz_constant
        if lt is None:
            lt = float(np.max(np.abs(np.concatenate(
                [d.ravel() for d in one_sided_differences(self._terminal, self.grid.h)]
            ))))
        ts = np.linspace(0.0, self.T, 65)
        lip = self.source_entry.lipschitz
        if lip is not None:
            lf = [float(lip(t)) for t in ts]
        else:
            lf = [
                float(np.max(np.abs(np.concatenate(
                    [d.ravel() for d in one_sided_differences(self.source_values(t), self.grid.h)]
                ))))
                for t in ts
            ]
        return lt + float(np.trapezoid(lf, ts))

    def describe(self) -> dict:
        return {
            "extents": [list(e) for e in self.grid.extents],
            "cells": list(self.grid.cells),
            "T": self.T,
            "hamiltonian": self.hamiltonian.name,
            "terminal": self.terminal,
            "terminal_params": dict(self.terminal_params),
            "source": self.source,
            "source_params": {k: v for k, v in self.source_params.items() if k != "hamiltonian"},
            "flags": self.flags,
        }


@dataclass
class SpaceTimeField:
    """Snapshots of a solution on a fixed grid; ``times`` decrease from T to 0."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), *grid.shape)
    dt: float
    problem: ProblemSpec | None = None
    eps: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise InputError("values must have shape (n_times, *grid.shape)")
        if len(self.times) > 1 and np.any(np.diff(self.times) >= 0):
            raise InputError("time steps must be strictly decreasing")
        if not np.all(np.isfinite(self.values)):
            raise SolverError("trajectory contains non-finite values")

    def __len__(self):
        return len(self.times)

    @property
    def T(self) -> float:
        return float(self.times[0])

    @property
    def steps(self) -> list[tuple[float, ScalarField]]:
        return [(float(t), ScalarField(self.grid, v, float(t))) for t, v in zip(self.times, self.values)]

    def index_of(self, t: float, tol: float | None = None) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        tol = 0.5 * self.dt * (1 + 1e-9) if tol is None else tol
        if abs(self.times[k] - t) > tol + 1e-12:
            raise InputError(f"time {t} is not stored (nearest {self.times[k]})")
        return k

    def at(self, t: float) -> ScalarField:
        k = self.index_of(t, tol=np.inf)
        return ScalarField(self.grid, self.values[k], float(self.times[k]))

    def final(self) -> ScalarField:
        return ScalarField(self.grid, self.values[-1], float(self.times[-1]))


def stable_dt(problem: ProblemSpec, safety: float = 0.9) -> float:
    """Largest step satisfying ``dt·Σ_i σ_i/h_i <= 1/2`` for the a priori gradient bound.

    ``σ`` is floored at 1 so that diffusion-only problems still get a step
    comparable to the mesh size.
    """
    g = problem.grid
    sig = SIGMA_SAFETY * partial_sup_ball(problem.hamiltonian, problem.lipschitz_bound(), g.dim)
    sig = np.maximum(sig, 1.0)
    return safety / (2 * float(np.sum(sig / np.asarray(g.h))))


def _march(problem: ProblemSpec, eps: float, dt: float | None, sigma=None, save_every: int = 1,
           backend: str = "auto"):
    if eps < 0 or not math.isfinite(eps):
        raise InputError(f"viscosity must be finite and non-negative, got {eps}")
    g = problem.grid
    h = np.asarray(g.h)
    T = problem.T
    if dt is None:
        dt = stable_dt(problem)
    if not dt > 0:
        raise InputError("dt must be positive")
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    save_every = max(1, int(save_every))

    sig_fixed = None
    if sigma is not None:
        sig_fixed = np.asarray(sigma, dtype=float)
        if sig_fixed.ndim == 2 and sig_fixed.shape[0] != n_steps:
            raise InputError("per-step sigma must have one row per time step")
        if np.any(sig_fixed < 0):
            raise InputError("Lax-Friedrichs coefficients must be non-negative")

    diffusion = ImplicitDiffusion(g, dt * eps) if eps > 0 else None
    H = problem.hamiltonian
    if backend not in ("auto", "numpy"):
        raise InputError(f"backend must be 'auto' or 'numpy', got {backend!r}")
    fast = backend == "auto" and g.dim == 1 and H.kind in _kernels.KIND_CODES
    if fast:
        code = _kernels.KIND_CODES[H.kind]
        gamma, delta = float(H.gamma), float(H.delta)
    u = problem.terminal_values()
    zero_source = problem.source_is_zero

    saved_t, saved_u = [T], [u.copy()]
    sig_log = np.empty((n_steps, g.dim))
    for n in range(n_steps):
        t_n = T - n * dt
        if diffusion is not None:
            w = diffusion.solve(u)
            if n == 0:
                res = diffusion.relative_residual(w, u)
                if not res <= LINEAR_RTOL:
                    raise SolverError(f"implicit diffusion solve residual {res:.2e} > {LINEAR_RTOL}")
        else:
            w = u
        if sig_fixed is None:
            sig_req = None
        else:
            sig_req = sig_fixed[n] if sig_fixed.ndim == 2 else sig_fixed * np.ones(g.dim)
        if fast:
            s_in = -1.0 if sig_req is None else float(sig_req[0])
            u = np.empty_like(w)
            sig = np.array([_kernels.lf_update_1d(w, h[0], dt, code, gamma, delta, s_in,
                                                  SIGMA_SAFETY, u)])
        else:
            back, fwd = one_sided_differences(w, h)
            sig = SIGMA_SAFETY * partial_sup(H, back, fwd) if sig_req is None else sig_req
            u = w - dt * lf_flux(H, back, fwd, sig)
        sig_log[n] = sig
        cfl = dt * float(np.sum(sig / h))
        if cfl > 0.5 * (1 + 1e-12):
            raise StabilityError(
                f"dt={dt:.3e} violates dt·Σσ_i/h_i <= 1/2 at step {n} (value {cfl:.3f}); "
                f"sigma={sig.tolist()}"
            )
        if not zero_source:
            u += dt * problem.source_values(t_n - 0.5 * dt)
        if not np.isfinite(u).all():
            raise SolverError(f"non-finite values after step {n} (t={t_n - dt:.4g})")
        if (n + 1) % save_every == 0 or n + 1 == n_steps:
            saved_t.append(T - (n + 1) * dt)
            saved_u.append(u.copy())
    saved_t[-1] = 0.0
    return SpaceTimeField(
        g, np.array(saved_t), np.array(saved_u), dt * save_every, problem, eps,
        info={"n_steps": n_steps, "step": dt, "sigma": sig_log, "save_every": save_every},
    )


def solve_viscous(problem: ProblemSpec, eps: float, dt: float | None = None, *, sigma=None,
                  save_every: int = 1, backend: str = "auto") -> SpaceTimeField:
    """Solve the viscous terminal-value problem for ``ε > 0``.

    ``sigma`` overrides the Lax–Friedrichs coefficients: a per-axis vector
    used for every step, or one row per step.  By default each step uses
    1.1 times the sup of ``|∂H/∂p_i|`` over the current one-sided gradients.
    Only every ``save_every``-th step is kept (the last one always is).
    ``backend="numpy"`` disables the compiled 1D loop.
    """
    if not eps > 0:
        raise InputError(f"solve_viscous needs eps > 0, got {eps}")
    return _march(problem, float(eps), dt, sigma, save_every, backend)


def solve_inviscid(problem: ProblemSpec, dt: float | None = None, *, sigma=None,
                   save_every: int = 1, backend: str = "auto") -> SpaceTimeField:
    return _march(problem, 0.0, dt, sigma, save_every, backend)


def epsilon_derivative(problem: ProblemSpec, eps: float, eta: float, dt: float | None = None,
                       *, base: SpaceTimeField | None = None) -> SpaceTimeField:
    """Divided difference ``(u_{ε+η} − u_ε)/η`` of two viscous solves.

    Both solves share the Lax–Friedrichs coefficients of the ``ε`` solve, so
    the quotient carries no contribution from a change of numerical flux.
    """
    if not 0 < eta <= eps / 2:
        raise InputError(f"eta must lie in (0, eps/2], got eta={eta}, eps={eps}")
    u0 = base if base is not None else solve_viscous(problem, eps, dt)
    u1 = solve_viscous(problem, eps + eta, u0.info["step"], sigma=u0.info["sigma"],
                       save_every=u0.info["save_every"])
    v = (u1.values - u0.values) / eta
    return SpaceTimeField(u0.grid, u0.times, v, u0.dt, problem, eps,
                          info={"eta": eta, "base": u0, "perturbed": u1})
