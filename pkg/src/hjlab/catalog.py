"""Closed catalog of terminal data ``u_T`` and sources ``f(x, t)``.

Every entry ships closed forms for its value, gradient and Laplacian and
declares hypothesis metadata: a Lipschitz constant, a one-sided Laplacian
bound (``M_0`` for terminal data, ``c_f(t)`` for sources) and the sign of
the outward normal derivative on each face.  Declarations are re-derived
numerically on a probe grid whenever an entry is loaded; a mismatch is a
:class:`~hjlab.errors.CatalogError`.

One-dimensional profiles are tensorized to 2D by summation over the axes,
``u(x, y) = φ(x) + φ(y)``.  ``radial_bump`` is genuinely two-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CatalogError
from .grid import Grid, ScalarField

PROBE_POINTS = 1024
PROBE_TOL = 1e-8
PI = math.pi


@dataclass(frozen=True)
class Profile:
    """A 1D profile ``φ`` with its first two derivatives, all vectorized in x."""

    value: Callable
    d1: Callable
    d2: Callable


@dataclass
class CatalogEntry:
    name: str
    role: str  # "terminal" or "source"
    arity: int
    params: dict
    value: Callable  # (points, t) -> array; points has shape (..., dim)
    gradient: Callable  # (points, t) -> array (..., dim)
    laplacian: Callable  # (points, t) -> array; Dirac parts are not represented
    lipschitz: Callable | None  # t -> sup_x |D value|, None when not Lipschitz
    delta_plus: Callable | None  # t -> sup_x (Δ value)^+, None when unbounded
    normal_sign: tuple[int, ...]  # sign of ∂_ν per face: (ax0 lo, ax0 hi, ax1 lo, ...)
    delta_plus_integral: Callable | None = None  # T -> ∫_0^T c_f(t) dt (sources)
    separable: tuple[Callable, Callable] | None = None  # (points -> φ, t -> g) with value = g(t)·φ
    description: str = ""
    verified: bool = field(default=False, repr=False)

    @property
    def lipschitz_constant(self) -> float | None:
        return None if self.lipschitz is None else float(self.lipschitz(None))

    def M0(self) -> float | None:
        return None if self.delta_plus is None else float(self.delta_plus(None))

    def c_f(self, t: float) -> float | None:
        return None if self.delta_plus is None else float(self.delta_plus(t))

    def c_f_integral(self, T: float) -> float | None:
        if self.delta_plus is None:
            return None
        if self.delta_plus_integral is not None:
            return float(self.delta_plus_integral(T))
        return float(self.delta_plus(None)) * T

    def sample(self, grid: Grid, t: float | None = None) -> np.ndarray:
        return np.asarray(self.value(grid.points(), t), dtype=float) * np.ones(grid.shape)


# ---------------------------------------------------------------------------
# 1D profiles


def _kink(center=0.5):
    return Profile(
        lambda x: np.abs(x - center),
        lambda x: np.sign(x - center),
        lambda x: np.zeros_like(x),
    )


def _tent():
    return Profile(
        lambda x: 0.5 - np.abs(x - 0.5),
        lambda x: -np.sign(x - 0.5),
        lambda x: np.zeros_like(x),
    )


def _poly2(a0, a1, a2):
    return Profile(
        lambda x: a0 + a1 * x + a2 * x**2,
        lambda x: a1 + 2 * a2 * x,
        lambda x: 2 * a2 * np.ones_like(x),
    )


def _cosine(amplitude, k):
    w = k * PI
    return Profile(
        lambda x: amplitude * np.cos(w * x),
        lambda x: -amplitude * w * np.sin(w * x),
        lambda x: -amplitude * w * w * np.cos(w * x),
    )


def _tensorize(profile: Profile, dim: int, time_factor=lambda t: 1.0):
    def value(pts, t):
        return time_factor(t) * np.sum(profile.value(pts), axis=-1)

    def gradient(pts, t):
        return time_factor(t) * profile.d1(pts)

    def laplacian(pts, t):
        return time_factor(t) * np.sum(profile.d2(pts), axis=-1)

    return value, gradient, laplacian


def _const(c):
    return lambda t: c


# ---------------------------------------------------------------------------
# factories: (dim, **params) -> CatalogEntry


def _terminal(name, profile, dim, lip, m0, signs, params, description):
    value, gradient, laplacian = _tensorize(profile, dim)
    return CatalogEntry(
        name=name,
        role="terminal",
        arity=dim,
        params=params,
        value=value,
        gradient=gradient,
        laplacian=laplacian,
        lipschitz=None if lip is None else _const(lip * math.sqrt(dim)),
        delta_plus=None if m0 is None else _const(m0 * dim),
        normal_sign=tuple(signs) * dim,
        description=description,
    )


def _constant(dim, value=0.0):
    v = float(value)
    prof = Profile(lambda x: np.full_like(x, v / dim), lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))
    return _terminal("constant", prof, dim, 0.0, 0.0, (0, 0), {"value": v}, "u_T ≡ value")


def _kink_entry(dim, center=0.5):
    return _terminal(
        "kink", _kink(float(center)), dim, 1.0, None, (1, 1), {"center": float(center)},
        "|x − center|: Lipschitz, convex corner (Δu_T = 2δ, M_0 unbounded)",
    )


def _tent_entry(dim):
    return _terminal(
        "tent", _tent(), dim, 1.0, 0.0, (-1, -1), {},
        "min(x, 1 − x): concave corner, incompatible with the Neumann condition",
    )


def _concave_bump(dim):
    return _terminal(
        "concave_bump", _poly2(-0.25, 1.0, -1.0), dim, 1.0, 0.0, (-1, -1), {},
        "−(x − 1/2)²: Δu_T = −2, ∂_ν u_T = −1 on both faces",
    )


def _concave_quadratic(dim, a=0.0):
    return _terminal(
        "concave_quadratic", _poly2(float(a), 0.0, -0.5), dim, 1.0, 0.0, (0, -1), {"a": float(a)},
        "a − x²/2: Δu_T = −1, ∂_ν u_T = −1 on the right face",
    )


def _half_parabola(dim):
    return _terminal(
        "half_parabola", _poly2(0.0, 0.0, 0.5), dim, 1.0, 1.0, (0, 1), {},
        "x²/2: Δu_T = 1 (M_0 = 1), ∂_ν u_T ≥ 0",
    )


def _cos_terminal(dim, amplitude=1.0, k=1):
    a, k = float(amplitude), int(k)
    return _terminal(
        "cos", _cosine(a, k), dim, abs(a) * k * PI, abs(a) * (k * PI) ** 2, (0, 0),
        {"amplitude": a, "k": k}, "amplitude·cos(kπx): smooth, compatible with ∂_ν u = 0",
    )


def _radial_bump(dim, amplitude=1.0, radius=0.3):
    if dim != 2:
        raise CatalogError("radial_bump is defined for 2D grids only")
    a, R = float(amplitude), float(radius)

    def g(pts):
        r2 = np.sum((pts - 0.5) ** 2, axis=-1)
        return r2, np.maximum(R * R - r2, 0.0)

    def value(pts, t):
        _, q = g(pts)
        return a * q * q

    def gradient(pts, t):
        _, q = g(pts)
        return (-4 * a * q)[..., None] * (pts - 0.5)

    def laplacian(pts, t):
        r2, q = g(pts)
        return np.where(q > 0, a * (16 * r2 - 8 * R * R), 0.0)

    lip = 8 * abs(a) * R**3 / (3 * math.sqrt(3))
    m0 = 8 * R * R * abs(a)
    return CatalogEntry(
        name="radial_bump", role="terminal", arity=2, params={"amplitude": a, "radius": R},
        value=value, gradient=gradient, laplacian=laplacian,
        lipschitz=_const(lip), delta_plus=_const(m0), normal_sign=(0, 0, 0, 0),
        description="amplitude·(R² − |x − c|²)₊², C^{1,1} and compactly supported",
    )


def _source(name, profile, dim, time_factor, lip_t, cf_t, cf_int, signs, params, description):
    value, gradient, laplacian = _tensorize(profile, dim, time_factor)
    return CatalogEntry(
        name=name, role="source", arity=dim, params=params,
        value=value, gradient=gradient, laplacian=laplacian,
        lipschitz=None if lip_t is None else (lambda t: math.sqrt(dim) * lip_t(t)),
        delta_plus=None if cf_t is None else (lambda t: dim * cf_t(t)),
        delta_plus_integral=None if cf_int is None else (lambda T: dim * cf_int(T)),
        normal_sign=tuple(signs) * dim,
        description=description,
        separable=(lambda pts: np.sum(profile.value(pts), axis=-1), time_factor),
    )


def _zero_source(dim):
    prof = Profile(np.zeros_like, np.zeros_like, np.zeros_like)
    return _source("zero", prof, dim, lambda t: 1.0, _const(0.0), _const(0.0), lambda T: 0.0, (0, 0), {}, "f ≡ 0")


def _unit_source(dim, value=1.0):
    v = float(value)
    prof = Profile(lambda x: np.full_like(x, v / dim), np.zeros_like, np.zeros_like)
    return _source(
        "unit", prof, dim, lambda t: 1.0, _const(0.0), _const(0.0), lambda T: 0.0, (0, 0),
        {"value": v}, "f ≡ value",
    )


def _cos_source(dim, amplitude=1.0, T=1.0):
    a = float(amplitude)
    span = float(T)

    def tf(t):
        return span if t is None else t

    # f = −a t cos(πx): Δf = a π² t cos(πx) <= |a| π² t
    return _source(
        "cos_source", _cosine(-a, 1), dim, tf,
        lambda t: abs(a) * PI * tf(t),
        lambda t: abs(a) * PI**2 * tf(t),
        lambda T: abs(a) * PI**2 * T * T / 2,
        (0, 0), {"amplitude": a, "T": span},
        "−amplitude·t·cos(πx): Δf ≤ π² t, ∂_ν f = 0",
    )


def _mms_cos(dim, eps, T, hamiltonian):
    """Source manufactured so that ``u*(x,t) = cos(πx)(1 + T − t)`` solves the viscous problem."""
    from .hamiltonian import evaluate

    eps, T = float(eps), float(T)
    base = _cosine(1.0, 1)

    def amp(t):
        return 1.0 + T - t

    def value(pts, t):
        lapl = np.sum(base.d2(pts), axis=-1)
        du = amp(t) * base.d1(pts)
        return np.sum(base.value(pts), axis=-1) - eps * amp(t) * lapl + evaluate(hamiltonian, du)

    def nan_like(pts, t):
        return np.full(pts.shape, np.nan)

    return CatalogEntry(
        name="mms_cos", role="source", arity=dim,
        params={"eps": eps, "T": T, "hamiltonian": hamiltonian.name},
        value=value, gradient=nan_like, laplacian=lambda pts, t: np.full(pts.shape[:-1], np.nan),
        lipschitz=None, delta_plus=None, normal_sign=(0, 0) * dim,
        description="manufactured source for u*(x,t) = Σ cos(πx_i)(1 + T − t)",
    )


TERMINALS: dict[str, Callable] = {
    "constant": _constant,
    "kink": _kink_entry,
    "tent": _tent_entry,
    "concave_bump": _concave_bump,
    "concave_quadratic": _concave_quadratic,
    "half_parabola": _half_parabola,
    "cos": _cos_terminal,
    "radial_bump": _radial_bump,
}

SOURCES: dict[str, Callable] = {
    "zero": _zero_source,
    "unit": _unit_source,
    "cos_source": _cos_source,
    "mms_cos": _mms_cos,
}

# entries whose metadata cannot be sampled (no closed-form derivatives)
_UNVERIFIABLE = {"mms_cos"}


def available(role: str) -> list[str]:
    return sorted(TERMINALS if role == "terminal" else SOURCES)


# ---------------------------------------------------------------------------
# load-time verification


def _probe_grid(grid: Grid) -> Grid:
    if grid.dim == 1:
        n = (PROBE_POINTS,)
    else:
        m = int(round(PROBE_POINTS ** (1 / grid.dim)))
        n = (m,) * grid.dim
    return Grid(grid.extents, n)


def _face_points(grid: Grid, m: int = 33):
    """Yield (face index, outward normal axis/sign, points on that face)."""
    k = 0
    for ax in range(grid.dim):
        for side, sign in ((0, -1), (1, 1)):
            coords = [np.linspace(a, b, m) for a, b in grid.extents]
            coords[ax] = np.array([grid.extents[ax][side]])
            pts = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, grid.dim)
            yield k, ax, sign, pts
            k += 1


def verify(entry: CatalogEntry, grid: Grid, T: float = 1.0) -> None:
    """Re-derive the declared metadata of ``entry`` by sampling; raise on mismatch."""
    if entry.name in _UNVERIFIABLE:
        return
    probe = _probe_grid(grid)
    pts = probe.points()
    times = [None] if entry.role == "terminal" else list(np.linspace(0.0, T, 5))
    for t in times:
        if entry.lipschitz is not None:
            g = np.linalg.norm(np.asarray(entry.gradient(pts, t)) * np.ones(pts.shape), axis=-1)
            bound = entry.lipschitz(t)
            if np.max(g) > bound + PROBE_TOL:
                raise CatalogError(
                    f"{entry.name}: sampled |Du| = {np.max(g):.6g} exceeds declared Lipschitz {bound:.6g}"
                )
        if entry.delta_plus is not None:
            lap = np.asarray(entry.laplacian(pts, t)) * np.ones(pts.shape[:-1])
            bound = entry.delta_plus(t)
            if np.max(np.maximum(lap, 0.0)) > bound + PROBE_TOL:
                raise CatalogError(
                    f"{entry.name}: sampled (Δu)+ = {np.max(lap):.6g} exceeds declared bound {bound:.6g}"
                )
        for k, ax, sign, fpts in _face_points(grid):
            dn = sign * np.asarray(entry.gradient(fpts, t))[..., ax]
            declared = entry.normal_sign[k]
            ok = {
                1: np.all(dn >= -PROBE_TOL),
                -1: np.all(dn <= PROBE_TOL),
                0: np.all(np.abs(dn) <= PROBE_TOL),
            }[declared]
            if not ok:
                raise CatalogError(
                    f"{entry.name}: normal derivative on face {k} does not have declared sign {declared:+d}"
                )
    entry.verified = True


def load(name: str, role: str, dim: int, grid: Grid | None = None, T: float = 1.0, **params) -> CatalogEntry:
    table = TERMINALS if role == "terminal" else SOURCES
    if name not in table:
        raise CatalogError(
            f"unknown {role} {name!r}; available: {', '.join(sorted(table))}"
        )
    if role == "source" and name in ("cos_source", "mms_cos"):
        params.setdefault("T", T)
    try:
        entry = table[name](dim, **params)
    except TypeError as exc:
        raise CatalogError(f"bad parameters for {role} {name!r}: {exc}") from None
    if grid is None:
        grid = Grid(((0.0, 1.0),) * dim, (PROBE_POINTS,) * dim)
    if entry.arity != grid.dim:
        raise CatalogError(f"{name} has arity {entry.arity} but the grid is {grid.dim}D")
    verify(entry, grid, T)
    return entry


class SourceSampler:
    """Space-time sampler ``t -> f(·, t)`` on a fixed grid."""

    def __init__(self, entry: CatalogEntry, grid: Grid):
        self.entry = entry
        self.grid = grid
        self._pts = grid.points()
        self._shape = None
        if entry.separable is not None:
            self._shape = np.asarray(entry.separable[0](self._pts), dtype=float) * np.ones(grid.shape)

    def __call__(self, t: float) -> np.ndarray:
        if self._shape is not None:
            return float(self.entry.separable[1](t)) * self._shape
        return np.asarray(self.entry.value(self._pts, t), dtype=float) * np.ones(self.grid.shape)

    def at(self, t: float) -> ScalarField:
        return ScalarField(self.grid, self(t), t)


def resolve(name: str, grid: Grid, role: str = "terminal", T: float = 1.0, **params):
    """Sample a catalog entry on ``grid``.

    Terminal data come back as a :class:`ScalarField` carrying the entry in
    ``meta["entry"]``; sources come back as a :class:`SourceSampler`.
    """
    entry = load(name, role, grid.dim, grid, T, **params)
    if role == "terminal":
        return ScalarField(grid, entry.sample(grid), meta={"entry": entry})
    return SourceSampler(entry, grid)
