"""Cell-centered tensor grids on boxes and finite-difference operators.

Homogeneous Neumann conditions are encoded by even reflection: the ghost
cell beyond a face carries the value of its mirror image inside the box.
With cell-centered nodes the mirror of the first cell is the first cell
itself, so the closure is ``u[-1] = u[0]`` and ``u[N] = u[N-1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (registers sp.linalg)

from .errors import CompatibilityError, InputError, InvalidDomainError, ResolutionError

MIN_CELLS = 8


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid over the box ``prod_i [a_i, b_i]``."""

    extents: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / n for (a, b), n in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.extents]))

    @cached_property
    def centers(self) -> tuple[np.ndarray, ...]:
        return tuple(
            a + (np.arange(n) + 0.5) * hi
            for (a, _), n, hi in zip(self.extents, self.cells, self.h)
        )

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (ij indexing)."""
        return tuple(np.meshgrid(*self.centers, indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell centers as an array of shape ``(*self.shape, dim)``."""
        return np.stack(self.mesh(), axis=-1)

    def locate(self, x) -> tuple[int, ...]:
        """Index of the cell containing point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise InputError(f"point must have {self.dim} coordinates, got {x.shape}")
        idx = []
        for xi, (a, b), n, hi in zip(x, self.extents, self.cells, self.h):
            if not a <= xi <= b:
                raise InputError(f"point {tuple(x)} lies outside the box {self.extents}")
            idx.append(min(int((xi - a) // hi), n - 1))
        return tuple(idx)

    def refine(self, factor: int) -> "Grid":
        return Grid(self.extents, tuple(n * factor for n in self.cells))

    def same_as(self, other: "Grid") -> bool:
        return self.cells == other.cells and np.allclose(
            np.asarray(self.extents), np.asarray(other.extents), rtol=0, atol=1e-14
        )


def build_grid(extents, cells) -> Grid:
    """Build a cell-centered grid; ``extents`` is a list of ``(a, b)`` pairs.

    A single interval and a single integer are accepted for 1D grids.
    """
    if np.isscalar(cells):
        cells = [cells]
    if len(extents) == 2 and np.isscalar(extents[0]):
        extents = [extents]
    if len(extents) != len(cells):
        raise InvalidDomainError("one cell count per axis is required")
    if len(cells) not in (1, 2):
        raise InvalidDomainError(f"only 1D and 2D boxes are supported, got dim={len(cells)}")
    ext = []
    for a, b in extents:
        a, b = float(a), float(b)
        if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
            raise InvalidDomainError(f"degenerate interval [{a}, {b}]")
        ext.append((a, b))
    cls = []
    for n in cells:
        if int(n) != n or n < MIN_CELLS:
            raise ResolutionError(f"need at least {MIN_CELLS} cells per axis, got {n}")
        cls.append(int(n))
    return Grid(tuple(ext), tuple(cls))


@dataclass
class ScalarField:
    """Samples of a real function at the cell centers of ``grid``."""

    grid: Grid
    values: np.ndarray
    t: float | None = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise CompatibilityError(
                f"field has {v.size} values but the grid has {self.grid.size} cells"
            )
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise InputError("field values must be finite")
        self.values = v


# ---------------------------------------------------------------------------
# raw-array stencils; ``u`` has shape grid.shape, ``h`` the per-axis spacing


def pad_even(u: np.ndarray, width: int = 1) -> np.ndarray:
    return np.pad(u, width, mode="symmetric")


def shifted(up: np.ndarray, axis: int, k: int, width: int = 1) -> np.ndarray:
    """``u[i + k]`` along ``axis`` from the padded array ``up``."""
    ndim = up.ndim
    n = up.shape[axis] - 2 * width
    sl = [slice(width, up.shape[d] - width) for d in range(ndim)]
    sl[axis] = slice(width + k, width + k + n)
    return up[tuple(sl)]


def one_sided_differences(u: np.ndarray, h) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences, each of shape ``(*u.shape, dim)``.

    Even reflection makes the outward difference at a boundary cell vanish.
    """
    back = np.zeros(u.shape + (u.ndim,))
    fwd = np.zeros(u.shape + (u.ndim,))
    for ax, hi in enumerate(h):
        d = np.diff(u, axis=ax) / hi
        n = u.shape[ax]
        lo = [slice(None)] * u.ndim + [ax]
        hi_ = [slice(None)] * u.ndim + [ax]
        lo[ax] = slice(1, n)
        hi_[ax] = slice(0, n - 1)
        back[tuple(lo)] = d
        fwd[tuple(hi_)] = d
    return back, fwd


def central_gradient(u: np.ndarray, h) -> np.ndarray:
    up = pad_even(u)
    return np.stack(
        [(shifted(up, ax, 1) - shifted(up, ax, -1)) / (2 * hi) for ax, hi in enumerate(h)],
        axis=-1,
    )


def laplacian_values(u: np.ndarray, h) -> np.ndarray:
    up = pad_even(u)
    out = np.zeros_like(u, dtype=float)
    for ax, hi in enumerate(h):
        out += (shifted(up, ax, 1) - 2 * shifted(up, ax, 0) + shifted(up, ax, -1)) / hi**2
    return out


def hessian_values(u: np.ndarray, h) -> np.ndarray:
    """Discrete Hessian, shape ``(*u.shape, dim, dim)``; mixed entries use the cross stencil."""
    dim = u.ndim
    up = pad_even(u)
    out = np.empty(u.shape + (dim, dim))
    for i in range(dim):
        out[..., i, i] = (
            shifted(up, i, 1) - 2 * shifted(up, i, 0) + shifted(up, i, -1)
        ) / h[i] ** 2
        for j in range(i + 1, dim):
            # second shift applied on the padded array to reach corner ghosts
            def corner(si, sj):
                sl = [slice(1, up.shape[d] - 1) for d in range(dim)]
                sl[i] = slice(1 + si, 1 + si + u.shape[i])
                sl[j] = slice(1 + sj, 1 + sj + u.shape[j])
                return up[tuple(sl)]

            mixed = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (
                4 * h[i] * h[j]
            )
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return out


def interior_mask(shape, width: int) -> np.ndarray:
    """Boolean mask of cells at least ``width`` cells away from every face."""
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(slice(width, n - width) for n in shape)] = True
    return mask


def neumann_laplacian_matrix(grid: Grid) -> sp.csc_matrix:
    """Sparse matrix of :func:`laplacian_values` (symmetric, zero row sums)."""
    mats = []
    for n, hi in zip(grid.cells, grid.h):
        main = -2.0 * np.ones(n)
        main[0] = main[-1] = -1.0
        off = np.ones(n - 1)
        mats.append(sp.diags([off, main, off], [-1, 0, 1]) / hi**2)
    if grid.dim == 1:
        return sp.csc_matrix(mats[0])
    eye = [sp.identity(n) for n in grid.cells]
    return sp.csc_matrix(sp.kron(mats[0], eye[1]) + sp.kron(eye[0], mats[1]))


# ---------------------------------------------------------------------------
# public field operators


def _values(u) -> tuple[np.ndarray, Grid]:
    if not isinstance(u, ScalarField):
        raise InputError("expected a ScalarField")
    return u.values, u.grid


def gradient(u: ScalarField, mode: str = "central"):
    """Discrete gradient with even-reflection ghosts.

    ``mode="central"`` returns one vector per cell, shape ``(*shape, dim)``.
    ``mode="upwind-pair"`` returns ``(backward, forward)`` one-sided
    differences, the arguments of a monotone numerical Hamiltonian.
    """
    v, g = _values(u)
    if mode == "central":
        return central_gradient(v, g.h)
    if mode == "upwind-pair":
        return one_sided_differences(v, g.h)
    raise InputError(f"unknown gradient mode {mode!r}")


def laplacian(u: ScalarField) -> ScalarField:
    v, g = _values(u)
    return ScalarField(g, laplacian_values(v, g.h), u.t)


def hessian_frobenius_sq(u: ScalarField) -> ScalarField:
    v, g = _values(u)
    hess = hessian_values(v, g.h)
    return ScalarField(g, np.sum(hess**2, axis=(-2, -1)), u.t)


def bochner_residual(u: ScalarField) -> float:
    """Max over the 2h-collar interior of ``Δ|Du|² − 2|D²u|² − 2 Du·DΔu``."""
    v, g = _values(u)
    du = central_gradient(v, g.h)
    w = np.sum(du**2, axis=-1)
    lap_w = laplacian_values(w, g.h)
    hess_sq = np.sum(hessian_values(v, g.h) ** 2, axis=(-2, -1))
    d_lap = central_gradient(laplacian_values(v, g.h), g.h)
    res = lap_w - 2 * hess_sq - 2 * np.sum(du * d_lap, axis=-1)
    mask = interior_mask(g.shape, 2)
    return float(np.max(np.abs(res[mask]))) if mask.any() else 0.0


def boundary_normal_difference(u: ScalarField) -> np.ndarray:
    """Outward one-sided differences ``(u_boundary − u_inner)/h`` at boundary cells.

    Faces are concatenated in the order (axis 0 low, axis 0 high, axis 1 low,
    axis 1 high); within a face cells follow C order.
    """
    v, g = _values(u)
    parts = []
    for ax, hi in enumerate(g.h):
        first = np.take(v, 0, axis=ax)
        second = np.take(v, 1, axis=ax)
        last = np.take(v, -1, axis=ax)
        before = np.take(v, -2, axis=ax)
        parts.append(((first - second) / hi).ravel())
        parts.append(((last - before) / hi).ravel())
    return np.concatenate(parts)


class ImplicitDiffusion:
    """Solver for ``(I − c·L) x = b`` with the Neumann Laplacian ``L`` and fixed ``c >= 0``.

    1D systems are tridiagonal and use a prefactored Thomas sweep; 2D
    systems use a sparse LU factorization.
    """

    def __init__(self, grid: Grid, coef: float):
        from . import _kernels

        self.grid = grid
        self.coef = float(coef)
        self._k = _kernels
        if grid.dim == 1:
            n, h = grid.cells[0], grid.h[0]
            r = self.coef / h**2
            self.lower = np.full(n, -r)
            self.upper = np.full(n, -r)
            self.diag = np.full(n, 1 + 2 * r)
            self.diag[0] = self.diag[-1] = 1 + r
            self.lower[0] = 0.0
            self.upper[-1] = 0.0
            self.cprime, self.denom = _kernels.thomas_factor(self.lower, self.diag, self.upper)
            self._lu = None
        else:
            self.matrix = sp.csc_matrix(
                sp.identity(grid.size, format="csc") - self.coef * neumann_laplacian_matrix(grid)
            )
            self._lu = sp.linalg.splu(self.matrix)

    def _solve(self, b):
        if self._lu is None:
            return self._k.thomas_solve(self.lower, self.cprime, self.denom, b, np.empty_like(b))
        return self._lu.solve(b.ravel()).reshape(b.shape)

    def solve(self, b: np.ndarray, refine: bool = False) -> np.ndarray:
        """``refine`` adds one residual correction computed in flux form.

        The stored matrix has column sums that differ from 1 by a rounding
        error fixed by ``c/h²``; the flux-form residual telescopes instead,
        so refined solves conserve ``Σx`` without a systematic drift.  Long
        mass-conserving runs need it.
        """
        x = self._solve(b)
        if refine:
            x += self._solve(b - self.apply_flux(x))
        return x

    def apply_flux(self, x: np.ndarray) -> np.ndarray:
        """``(I − c·L) x`` as ``x`` minus a difference of face fluxes."""
        src = np.asarray(x, dtype=float).reshape(self.grid.shape)
        out = src.copy()
        for ax, hk in enumerate(self.grid.h):
            flux = (self.coef / hk**2) * np.diff(src, axis=ax)
            lo = [slice(None)] * self.grid.dim
            hi = [slice(None)] * self.grid.dim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            out[tuple(lo)] -= flux
            out[tuple(hi)] += flux
        return out.reshape(np.shape(x))

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self._lu is None:
            return self._k.tridiag_matvec(self.lower, self.diag, self.upper, x, np.empty_like(x))
        return (self.matrix @ x.ravel()).reshape(x.shape)

    def relative_residual(self, x: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(self.apply(x) - b) / max(np.linalg.norm(b), 1e-300))
