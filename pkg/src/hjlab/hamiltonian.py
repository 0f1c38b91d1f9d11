"""Hamiltonians ``H(p)``, their gradients, and the Lax–Friedrichs flux.

Momenta are arrays whose last axis holds the components, so a whole grid
of gradients (shape ``(*cells, dim)``) is evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

KINDS = ("quadratic", "power", "custom", "zero")


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: str
    gamma: float = 2.0
    delta: float = 0.0
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    lipschitz_radius_hint: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown Hamiltonian kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "power":
            if not self.gamma > 1:
                raise InputError(f"power Hamiltonian needs gamma > 1, got {self.gamma}")
            if not self.delta >= 0:
                raise InputError(f"power Hamiltonian needs delta >= 0, got {self.delta}")
        if self.kind == "custom":
            if self.table is None:
                raise InputError("custom Hamiltonian needs a (p, H) table")
            p, v = (np.asarray(a, dtype=float) for a in self.table)
            if p.ndim != 1 or p.shape != v.shape or p.size < 2 or np.any(np.diff(p) <= 0):
                raise InputError("custom table needs >= 2 strictly increasing nodes")
            if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
                raise InputError("custom table must be finite")

    @classmethod
    def quadratic(cls) -> "HamiltonianSpec":
        return cls("quadratic")

    @classmethod
    def power(cls, gamma: float, delta: float = 0.0) -> "HamiltonianSpec":
        return cls("power", gamma=float(gamma), delta=float(delta))

    @classmethod
    def custom(cls, p_nodes, values) -> "HamiltonianSpec":
        """Piecewise-linear ``H`` of a scalar momentum, extrapolated linearly."""
        return cls("custom", table=(tuple(map(float, p_nodes)), tuple(map(float, values))))

    @classmethod
    def zero(cls) -> "HamiltonianSpec":
        return cls("zero")

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power(gamma={self.gamma:g}, delta={self.delta:g})"
        return self.kind

    @property
    def is_even(self) -> bool:
        if self.kind == "custom":
            p, v = (np.asarray(a) for a in self.table)
            return bool(np.allclose(np.interp(-p[::-1], p, v), v[::-1]))
        return True

    def __call__(self, p):
        return evaluate(self, p)


def _check_momentum(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        p = p[None]
    if not np.all(np.isfinite(p)):
        raise InputError("momentum must be finite")
    return p


def _custom_slopes(spec):
    p, v = (np.asarray(a, dtype=float) for a in spec.table)
    return p, v, np.diff(v) / np.diff(p)


def _custom_eval(spec, q):
    p, v, s = _custom_slopes(spec)
    out = np.interp(q, p, v)
    out = np.where(q < p[0], v[0] + s[0] * (q - p[0]), out)
    return np.where(q > p[-1], v[-1] + s[-1] * (q - p[-1]), out)


def _custom_grad(spec, q):
    p, _, s = _custom_slopes(spec)
    idx = np.clip(np.searchsorted(p, q, side="right") - 1, 0, s.size - 1)
    return s[idx]


def evaluate(spec: HamiltonianSpec, p) -> np.ndarray | float:
    """``H(p)``; the power kind returns ``(delta + |p|^2)^(gamma/2)``."""
    p = _check_momentum(p)
    if spec.kind == "quadratic":
        out = np.sum(p**2, axis=-1)
    elif spec.kind == "power":
        out = (spec.delta + np.sum(p**2, axis=-1)) ** (spec.gamma / 2)
    elif spec.kind == "zero":
        out = np.zeros(p.shape[:-1])
    else:
        if p.shape[-1] != 1:
            raise InputError("custom Hamiltonians are tabulated for scalar momenta only")
        out = _custom_eval(spec, p[..., 0])
    return out if np.ndim(out) else float(out)


def grad(spec: HamiltonianSpec, p) -> np.ndarray:
    """``D_p H(p)``, same shape as ``p``."""
    p = _check_momentum(p)
    if spec.kind == "quadratic":
        return 2 * p
    if spec.kind == "zero":
        return np.zeros_like(p)
    if spec.kind == "custom":
        if p.shape[-1] != 1:
            raise InputError("custom Hamiltonians are tabulated for scalar momenta only")
        return _custom_grad(spec, p)
    r2 = np.sum(p**2, axis=-1, keepdims=True)
    base = spec.delta + r2
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = spec.gamma * base ** ((spec.gamma - 2) / 2)
    # subgradient selection at the kink of |p|^gamma, gamma < 2
    coef = np.where(base > 0, coef, 0.0)
    return coef * p


def lax_friedrichs(spec: HamiltonianSpec, p_minus, p_plus, sigma) -> np.ndarray | float:
    """Monotone flux ``H((p⁻+p⁺)/2) − Σ_i σ_i (p⁺_i − p⁻_i)/2``."""
    p_minus = _check_momentum(p_minus)
    p_plus = _check_momentum(p_plus)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise InputError("Lax-Friedrichs coefficients must be non-negative")
    out = lf_flux(spec, p_minus, p_plus, sigma)
    return out if np.ndim(out) else float(out)


def lf_flux(spec: HamiltonianSpec, p_minus: np.ndarray, p_plus: np.ndarray, sigma) -> np.ndarray:
    """Unchecked :func:`lax_friedrichs` for the solver's inner loop."""
    mid = 0.5 * (p_minus + p_plus)
    jump = p_plus - p_minus
    if spec.kind == "quadratic":
        h_mid = np.einsum("...i,...i->...", mid, mid)
    else:
        h_mid = evaluate(spec, mid)
    return h_mid - 0.5 * (jump @ np.asarray(sigma, dtype=float))


def partial_sup(spec: HamiltonianSpec, p_minus, p_plus) -> np.ndarray:
    """Per-axis sup of ``|∂H/∂p_i|`` over the boxes spanned by ``p_minus, p_plus``.

    Each component is sampled at both endpoints and at the point of its
    range closest to zero, which captures the extremes of every kind in the
    catalog (the partials are monotone along rays and in each component).
    """
    p_minus = np.asarray(p_minus, dtype=float)
    p_plus = np.asarray(p_plus, dtype=float)
    dim = p_minus.shape[-1]
    if spec.kind == "zero":
        return np.zeros(dim)
    if spec.kind == "custom":
        _, _, s = _custom_slopes(spec)
        return np.full(dim, float(np.max(np.abs(s))))
    if spec.kind == "quadratic":
        big = np.maximum(np.abs(p_minus), np.abs(p_plus)).reshape(-1, dim)
        return 2 * np.max(big, axis=0)
    lo = np.minimum(p_minus, p_plus).reshape(-1, dim)
    hi = np.maximum(p_minus, p_plus).reshape(-1, dim)
    if dim == 1:
        return np.maximum(np.max(np.abs(grad(spec, lo)), axis=0), np.max(np.abs(grad(spec, hi)), axis=0))
    mid = np.clip(0.0, lo, hi)
    cands = [lo, hi, mid]
    best = np.zeros(dim)
    for combo in np.ndindex(*(3,) * dim):
        p = np.stack([cands[c][:, i] for i, c in enumerate(combo)], axis=-1)
        best = np.maximum(best, np.max(np.abs(grad(spec, p)), axis=0))
    return best


def partial_sup_ball(spec: HamiltonianSpec, radius: float, dim: int) -> np.ndarray:
    """Per-axis bound of ``|∂H/∂p_i|`` over the ball ``|p| <= radius``."""
    r = float(radius)
    if spec.kind == "zero":
        return np.zeros(dim)
    if spec.kind == "quadratic":
        return np.full(dim, 2 * r)
    if spec.kind == "custom":
        _, _, s = _custom_slopes(spec)
        return np.full(dim, float(np.max(np.abs(s))))
    # s -> gamma (delta + s^2)^((gamma-2)/2) s is increasing for gamma > 1
    if r == 0:
        return np.zeros(dim)
    return np.full(dim, spec.gamma * (spec.delta + r * r) ** ((spec.gamma - 2) / 2) * r)
