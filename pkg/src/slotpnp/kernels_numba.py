"""Numba-compiled stencil kernels for the solver hot loops.

One explicit-loop specialization per dimension; the module-level functions
dispatch on array rank.  Loops are sequential (no ``parallel=True``) so
reductions stay bitwise deterministic run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def _neg_lap_1d(f, h):
    n = f.shape[0]
    out = np.empty_like(f)
    inv_h2 = 1.0 / (h * h)
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i > 0 else n - 1
        out[i] = (2.0 * f[i] - f[ip] - f[im]) * inv_h2
    return out


@njit(cache=True)
def _neg_lap_2d(f, h):
    n0, n1 = f.shape
    out = np.empty_like(f)
    inv_h2 = 1.0 / (h * h)
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            out[i, j] = (4.0 * f[i, j] - f[ip, j] - f[im, j]
                         - f[i, jp] - f[i, jm]) * inv_h2
    return out


@njit(cache=True)
def _neg_lap_3d(f, h):
    n0, n1, n2 = f.shape
    out = np.empty_like(f)
    inv_h2 = 1.0 / (h * h)
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            for k in range(n2):
                kp = k + 1 if k + 1 < n2 else 0
                km = k - 1 if k > 0 else n2 - 1
                out[i, j, k] = (6.0 * f[i, j, k]
                                - f[ip, j, k] - f[im, j, k]
                                - f[i, jp, k] - f[i, jm, k]
                                - f[i, j, kp] - f[i, j, km]) * inv_h2
    return out


@njit(cache=True)
def _transport_1d(w, mx, g, dt, h):
    n = g.shape[0]
    out = np.empty_like(g)
    inv_h2 = 1.0 / (h * h)
    inv_dt = 1.0 / dt
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i > 0 else n - 1
        div = mx[i] * (g[ip] - g[i]) - mx[im] * (g[i] - g[im])
        out[i] = w[i] * g[i] * inv_dt - div * inv_h2
    return out


@njit(cache=True)
def _transport_2d(w, mx, my, g, dt, h):
    n0, n1 = g.shape
    out = np.empty_like(g)
    inv_h2 = 1.0 / (h * h)
    inv_dt = 1.0 / dt
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            div = (mx[i, j] * (g[ip, j] - g[i, j]) - mx[im, j] * (g[i, j] - g[im, j])
                   + my[i, j] * (g[i, jp] - g[i, j]) - my[i, jm] * (g[i, j] - g[i, jm]))
            out[i, j] = w[i, j] * g[i, j] * inv_dt - div * inv_h2
    return out


@njit(cache=True)
def _transport_3d(w, mx, my, mz, g, dt, h):
    n0, n1, n2 = g.shape
    out = np.empty_like(g)
    inv_h2 = 1.0 / (h * h)
    inv_dt = 1.0 / dt
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            for k in range(n2):
                kp = k + 1 if k + 1 < n2 else 0
                km = k - 1 if k > 0 else n2 - 1
                div = (mx[i, j, k] * (g[ip, j, k] - g[i, j, k])
                       - mx[im, j, k] * (g[i, j, k] - g[im, j, k])
                       + my[i, j, k] * (g[i, jp, k] - g[i, j, k])
                       - my[i, jm, k] * (g[i, j, k] - g[i, jm, k])
                       + mz[i, j, k] * (g[i, j, kp] - g[i, j, k])
                       - mz[i, j, km] * (g[i, j, k] - g[i, j, km]))
                out[i, j, k] = w[i, j, k] * g[i, j, k] * inv_dt - div * inv_h2
    return out


def neg_laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """-Δ_h f on a periodic grid, any of 1/2/3 dimensions."""
    if f.ndim == 1:
        return _neg_lap_1d(f, h)
    if f.ndim == 2:
        return _neg_lap_2d(f, h)
    return _neg_lap_3d(f, h)


def transport_apply(w: np.ndarray, mob: tuple[np.ndarray, ...], g: np.ndarray,
                    dt: float, h: float) -> np.ndarray:
    """w*g/dt - div(M grad g) with face mobilities M stored at index i <-> face i+1/2."""
    if g.ndim == 1:
        return _transport_1d(w, mob[0], g, dt, h)
    if g.ndim == 2:
        return _transport_2d(w, mob[0], mob[1], g, dt, h)
    return _transport_3d(w, mob[0], mob[1], mob[2], g, dt, h)
