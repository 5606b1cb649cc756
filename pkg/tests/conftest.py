import math

import numpy as np
import pytest

from slotpnp.grid import CellField, GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_smooth(spec: GridSpec, rng, amplitude=1.0) -> CellField:
    """Random periodic field built from a few low Fourier modes."""
    coords = spec.meshgrid()
    a, b = spec.interval
    two_pi = 2.0 * math.pi / (b - a)
    vals = np.zeros(spec.shape)
    for _ in range(3):
        term = np.full(spec.shape, rng.uniform(-1.0, 1.0))
        for ax in range(spec.dim):
            k = rng.integers(1, 3)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            term = term * np.cos(two_pi * k * (coords[ax] - a) + phase)
        vals += term
    return CellField(spec, amplitude * vals)


def random_zero_mean(spec: GridSpec, rng) -> CellField:
    vals = rng.standard_normal(spec.shape)
    return CellField(spec, vals - vals.mean())
