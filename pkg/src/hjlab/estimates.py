"""A priori constants and certificates checked against solver output.

Certificates are plain dataclasses computed deterministically from
trajectories; each records the measured quantity, the bound it is compared
with, and a pass flag using the 5% multiplicative slack.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CompatibilityError, HypothesisError, InputError
from .fp_adjoint import DensityTrajectory, drift_from_solution, pair, solve_adjoint
from .grid import (
    ScalarField,
    central_gradient,
    hessian_values,
    interior_mask,
    laplacian_values,
)
from .hj_solver import ProblemSpec, SpaceTimeField, epsilon_derivative, solve_viscous

SLACK = 1.05


@dataclass(frozen=True)
class LipschitzCertificate:
    sup_grad: float
    weighted_hess: float
    C_L: float
    eps: float

    def __post_init__(self):
        for k in ("sup_grad", "weighted_hess", "C_L"):
            v = getattr(self, k)
            if not (math.isfinite(v) and v >= 0):
                raise InputError(f"{k} must be finite and non-negative, got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SecondOrderCertificate:
    alpha: float
    measured: float
    K: float
    M_0: float
    c_f: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# derived space-time fields


def _map_steps(u: SpaceTimeField, fn) -> SpaceTimeField:
    vals = np.stack([fn(v) for v in u.values])
    return SpaceTimeField(u.grid, u.times, vals, u.dt, u.problem, u.eps, dict(u.info))


def hessian_sq_field(u: SpaceTimeField) -> SpaceTimeField:
    """``|D²u|²`` (Frobenius) at every stored step."""
    return _map_steps(u, lambda v: np.sum(hessian_values(v, u.grid.h) ** 2, axis=(-2, -1)))


def laplacian_field(u: SpaceTimeField) -> SpaceTimeField:
    return _map_steps(u, lambda v: laplacian_values(v, u.grid.h))


def gradient_sq_field(u: SpaceTimeField) -> SpaceTimeField:
    """``|Du|²`` with the central gradient at every stored step."""
    return _map_steps(u, lambda v: np.sum(central_gradient(v, u.grid.h) ** 2, axis=-1))


def _check_compatible(u: SpaceTimeField, rho: DensityTrajectory):
    if not u.grid.same_as(rho.grid):
        raise CompatibilityError("solution and density live on different grids")


# ---------------------------------------------------------------------------
# hypotheses


def missing_hypotheses(problem: ProblemSpec, need_quadratic: bool) -> list[str]:
    """Names of the one-sided Laplacian hypotheses the problem does not satisfy."""
    flags = problem.flags
    missing = [k for k in ("semi_superharmonic_terminal", "source_delta_bound", "source_normal_nonneg")
               if not flags[k]]
    H = problem.hamiltonian
    if need_quadratic:
        if not (H.kind == "quadratic" or (H.kind == "power" and H.gamma == 2 and H.delta == 0)):
            missing.append("quadratic_hamiltonian")
    elif H.kind not in ("quadratic", "power"):
        missing.append("power_hamiltonian")
    return missing


def _require(problem, need_quadratic):
    if problem is None:
        raise HypothesisError("trajectory carries no problem; hypotheses cannot be checked")
    missing = missing_hypotheses(problem, need_quadratic)
    if missing:
        raise HypothesisError(f"hypotheses not satisfied: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# certificates


def lipschitz_certificate(u_traj: SpaceTimeField, rho_traj: DensityTrajectory, eps: float) -> LipschitzCertificate:
    """``C_L = sup|Du_ε| + 2ε·∬|D²u_ε|²ρ_ε`` for one density."""
    _check_compatible(u_traj, rho_traj)
    sup_grad = float(np.sqrt(np.max(gradient_sq_field(u_traj).values)))
    weighted = 2 * eps * pair(rho_traj, hessian_sq_field(u_traj), rule="left")
    weighted = max(weighted, 0.0)
    return LipschitzCertificate(sup_grad, weighted, sup_grad + weighted, float(eps))


def delta_u_plus_bound(u_traj: SpaceTimeField, M_0: float, c_f_integral: float,
                       check_hypotheses: bool = True) -> tuple[float, float, bool]:
    """Compare ``max (Δu_ε)⁺`` over interior cells and stored times with ``M_0 + ∫c_f``.

    The one-cell boundary collar is excluded.  ``check_hypotheses=False``
    skips the hypothesis gate for diagnostics; the result then certifies
    nothing.
    """
    if check_hypotheses:
        _require(u_traj.problem, need_quadratic=False)
    mask = interior_mask(u_traj.grid.shape, 1)
    lap = laplacian_field(u_traj).values[:, mask]
    measured = float(max(np.max(lap), 0.0))
    bound = float(M_0 + c_f_integral)
    return measured, bound, measured <= bound + 0.05 * (1 + bound)


def second_order_K(n: int, alpha: float, T: float, M_0: float, c_f: float) -> float:
    """``nα²T^{α−1}/(4(α−1)) + T^α M_0 + T^{α+1} c_f/(α+1)``."""
    if not 1 < alpha < 2:
        raise InputError(f"alpha must lie in (1, 2), got {alpha}")
    return (n * alpha**2 * T ** (alpha - 1) / (4 * (alpha - 1))
            + T**alpha * M_0 + T ** (alpha + 1) * c_f / (alpha + 1))


def weighted_second_order(u_traj: SpaceTimeField, rho_traj: DensityTrajectory, eps: float, alpha: float,
                          tau: float, M_0: float, c_f: float,
                          check_hypotheses: bool = True) -> SecondOrderCertificate:
    """Measured ``∬(t−τ)^α |D²u_ε|² ρ_ε`` against the closed-form bound ``K``."""
    if not 1 < alpha < 2:
        raise InputError(f"alpha must lie in (1, 2), got {alpha}")
    if check_hypotheses:
        _require(u_traj.problem, need_quadratic=True)
    _check_compatible(u_traj, rho_traj)
    measured = pair(rho_traj, hessian_sq_field(u_traj),
                    weight=lambda t: np.maximum(t - tau, 0.0) ** alpha, rule="left")
    K = second_order_K(u_traj.grid.dim, alpha, u_traj.T, M_0, c_f)
    return SecondOrderCertificate(alpha, measured, K, float(M_0), float(c_f), bool(measured <= SLACK * K))


def lower_bound_constant(beta: float, n: int, K: float, C_L: float, eps: float) -> float:
    """``(1/β)√(nK/(2(1−β))) ε^β + √(n C_L) ε``."""
    if not 0.5 < beta < 1:
        raise InputError(f"beta must lie in (1/2, 1), got {beta}")
    if K < 0 or C_L < 0:
        raise InputError("K and C_L must be non-negative")
    return math.sqrt(n * K / (2 * (1 - beta))) * eps**beta / beta + math.sqrt(n * C_L) * eps


def one_sided_sup(u_eps_slice: ScalarField, u_slice: ScalarField) -> tuple[float, float]:
    """``(max (u_ε − u)⁺, max (u − u_ε)⁺)``."""
    if not u_eps_slice.grid.same_as(u_slice.grid):
        raise CompatibilityError("slices live on different grids")
    d = u_eps_slice.values - u_slice.values
    return float(max(np.max(d), 0.0)), float(max(np.max(-d), 0.0))


def duality_residual(problem: ProblemSpec, eps: float, eta: float, x0, tau: float,
                     dt: float | None = None) -> float:
    """Relative gap in ``∫v(τ)ρ(τ) = ∫v(T)ρ(T) + ∬Δu ρ``.

    ``v`` is the divided difference ``(u_{ε+η} − u_ε)/η``.  The Laplacian,
    the drift and the density's viscosity are taken at the midpoint
    ``ε + η/2``, which makes the identity second order in ``η``.
    """
    v = epsilon_derivative(problem, eps, eta, dt)
    u0, u1 = v.info["base"], v.info["perturbed"]
    mid = SpaceTimeField(u0.grid, u0.times, 0.5 * (u0.values + u1.values), u0.dt, problem, eps + eta / 2)
    rho = solve_adjoint(drift_from_solution(mid), eps + eta / 2, x0, tau, u0.dt, T=problem.T)
    vol = problem.grid.cell_volume
    lhs = float(np.sum(v.values[v.index_of(tau)] * rho.values[0]) * vol)
    terminal = float(np.sum(v.values[0] * rho.values[-1]) * vol)
    rhs = terminal + pair(rho, laplacian_field(mid))
    return abs(lhs - rhs) / (1 + abs(lhs))
