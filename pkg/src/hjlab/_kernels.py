"""Compiled 1D inner loops: Lax–Friedrichs update, upwind Fokker–Planck update, Thomas solves.

These mirror the vectorized numpy code paths exactly and exist for speed;
the test-suite compares the two.
"""

import numpy as np
from numba import njit

KIND_CODES = {"zero": 0, "quadratic": 1, "power": 2}


@njit(cache=True, nogil=True, inline="always")
def _h(kind, gamma, delta, p):
    if kind == 0:
        return 0.0
    if kind == 1:
        return p * p
    base = delta + p * p
    return base ** (0.5 * gamma) if base > 0.0 else 0.0


@njit(cache=True, nogil=True, inline="always")
def _dh(kind, gamma, delta, p):
    if kind == 0:
        return 0.0
    if kind == 1:
        return 2.0 * p
    base = delta + p * p
    return gamma * base ** (0.5 * gamma - 1.0) * p if base > 0.0 else 0.0


@njit(cache=True, nogil=True)
def lf_sigma_1d(u, h, kind, gamma, delta):
    """``max |H'|`` over the one-sided differences of ``u``."""
    sigma = 0.0
    for i in range(u.shape[0] - 1):
        dh = abs(_dh(kind, gamma, delta, (u[i + 1] - u[i]) / h))
        if dh > sigma:
            sigma = dh
    return sigma


@njit(cache=True, nogil=True)
def lf_apply_1d(u, h, dt, kind, gamma, delta, sigma, out):
    """``out = u − dt·Ĥ(D⁻u, D⁺u)`` with zero differences across the walls.

    Kept separate from :func:`lf_sigma_1d`: fusing the two loops stops the
    Hamiltonian from being inlined and costs an order of magnitude.
    """
    n = u.shape[0]
    for i in range(n):
        back = (u[i] - u[i - 1]) / h if i > 0 else 0.0
        fwd = (u[i + 1] - u[i]) / h if i < n - 1 else 0.0
        out[i] = u[i] - dt * (_h(kind, gamma, delta, 0.5 * (back + fwd)) - 0.5 * sigma * (fwd - back))
    return out


def lf_update_1d(u, h, dt, kind, gamma, delta, sigma_in, safety, out):
    """Lax–Friedrichs step into ``out``; returns the coefficient used.

    ``sigma_in < 0`` selects ``safety · max |H'|`` over the one-sided
    differences of ``u``.
    """
    sigma = sigma_in if sigma_in >= 0 else safety * lf_sigma_1d(u, h, kind, gamma, delta)
    lf_apply_1d(u, h, dt, kind, gamma, delta, sigma, out)
    return sigma


@njit(cache=True, nogil=True)
def thomas_factor(lower, diag, upper):
    """Forward-elimination coefficients for a constant tridiagonal matrix.

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``
    in row ``i``.  Returns ``(cprime, denom)``.
    """
    n = diag.shape[0]
    cprime = np.empty(n)
    denom = np.empty(n)
    denom[0] = diag[0]
    cprime[0] = upper[0] / denom[0]
    for i in range(1, n):
        denom[i] = diag[i] - lower[i] * cprime[i - 1]
        cprime[i] = upper[i] / denom[i] if i < n - 1 else 0.0
    return cprime, denom


@njit(cache=True, nogil=True)
def thomas_solve(lower, cprime, denom, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] / denom[0]
    for i in range(1, n):
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / denom[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cprime[i] * out[i + 1]
    return out


@njit(cache=True, nogil=True)
def tridiag_matvec(lower, diag, upper, x, out):
    n = x.shape[0]
    for i in range(n):
        s = diag[i] * x[i]
        if i > 0:
            s += lower[i] * x[i - 1]
        if i < n - 1:
            s += upper[i] * x[i + 1]
        out[i] = s
    return out


@njit(cache=True, nogil=True)
def fp_advect_1d(rho, face_b, h, dt, out):
    """Explicit upwind transport of ``rho`` with interior face velocities ``face_b`` (n−1 faces).

    Boundary faces carry no flux.
    """
    n = rho.shape[0]
    for i in range(n):
        out[i] = rho[i]
    r = dt / h
    for f in range(n - 1):
        c = face_b[f]
        flux = c * rho[f] if c > 0.0 else c * rho[f + 1]
        out[f] -= r * flux
        out[f + 1] += r * flux
    return out
