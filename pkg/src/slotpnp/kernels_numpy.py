"""Pure-numpy stencil kernels (roll-based), the fallback backend.

Same contracts as :mod:`slotpnp.kernels_numba`; selected via the
``SLOTPNP_BACKEND`` environment variable (see :mod:`slotpnp.backend`).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def neg_laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """-Δ_h f on a periodic grid, any of 1/2/3 dimensions."""
    inv_h2 = 1.0 / (h * h)
    out = np.zeros_like(f)
    for ax in range(f.ndim):
        out += 2.0 * f - np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)
    return out * inv_h2


def transport_apply(w: np.ndarray, mob: tuple[np.ndarray, ...], g: np.ndarray,
                    dt: float, h: float) -> np.ndarray:
    """w*g/dt - div(M grad g) with face mobilities M stored at index i <-> face i+1/2."""
    inv_h2 = 1.0 / (h * h)
    out = w * g / dt
    for ax, m in enumerate(mob):
        flux = m * (np.roll(g, -1, axis=ax) - g)
        out -= (flux - np.roll(flux, 1, axis=ax)) * inv_h2
    return out
