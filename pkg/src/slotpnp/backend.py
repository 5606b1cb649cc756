"""Kernel backend selection.

The solver's inner loops (the matrix-vector products driven by the conjugate
gradient iterations) run through one of two interchangeable kernel modules:

* ``numba``  -- JIT-compiled explicit loops (default when numba imports)
* ``numpy``  -- pure-numpy roll-based stencils

Set ``SLOTPNP_BACKEND=numpy`` (or ``numba``) before import to force a choice.
Both backends implement the same stencils; they may differ in the last bits
of floating point because summation orders differ, so reproducibility
guarantees hold per backend.  ``benchmarks/bench_kernels.py`` compares them.
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels_numpy

_ENV_VAR = "SLOTPNP_BACKEND"


def _load(name: str):
    if name == "numpy":
        return kernels_numpy
    if name == "numba":
        from . import kernels_numba

        return kernels_numba
    raise ValueError(f"unknown backend '{name}' (expected 'numba' or 'numpy')")


def _default():
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested:
        return _load(requested)
    try:
        return _load("numba")
    except ImportError:
        return kernels_numpy


_KERNELS = _default()


def active_backend() -> str:
    return _KERNELS.NAME


def select_backend(name: str) -> str:
    """Swap the kernel backend (tests and benchmarks); returns previous name."""
    global _KERNELS
    previous = _KERNELS.NAME
    _KERNELS = _load(name.strip().lower())
    return previous


def neg_laplacian(f: np.ndarray, h: float) -> np.ndarray:
    return _KERNELS.neg_laplacian(f, h)


def transport_apply(w: np.ndarray, mob: tuple[np.ndarray, ...], g: np.ndarray,
                    dt: float, h: float) -> np.ndarray:
    return _KERNELS.transport_apply(w, mob, g, dt, h)
