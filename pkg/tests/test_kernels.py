import numpy as np
import pytest

from slotpnp import backend
from slotpnp import kernels_numba, kernels_numpy
from slotpnp.grid import CellField, FaceField, GridSpec, laplacian, weighted_laplacian

from conftest import random_smooth


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_neg_laplacian_backends_agree(dim, rng):
    spec = GridSpec(dim, 6)
    f = rng.standard_normal(spec.shape)
    a = kernels_numpy.neg_laplacian(f, spec.h)
    b = kernels_numba.neg_laplacian(f, spec.h)
    np.testing.assert_allclose(a, b, atol=1e-12 * np.max(np.abs(a)))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_transport_backends_agree(dim, rng):
    spec = GridSpec(dim, 6)
    w = rng.uniform(0.5, 2.0, spec.shape)
    mob = tuple(rng.uniform(0.5, 2.0, spec.shape) for _ in range(dim))
    g = rng.standard_normal(spec.shape)
    a = kernels_numpy.transport_apply(w, mob, g, 0.1, spec.h)
    b = kernels_numba.transport_apply(w, mob, g, 0.1, spec.h)
    np.testing.assert_allclose(a, b, atol=1e-12 * np.max(np.abs(a)))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_kernels_match_grid_operators(dim, rng):
    spec = GridSpec(dim, 6)
    f = random_smooth(spec, rng)
    ref = -laplacian(f).values
    for mod in (kernels_numpy, kernels_numba):
        np.testing.assert_allclose(mod.neg_laplacian(f.values, spec.h), ref,
                                   atol=1e-12 * (np.max(np.abs(ref)) + 1e-30))
    w = rng.uniform(0.5, 2.0, spec.shape)
    mob = tuple(rng.uniform(0.5, 2.0, spec.shape) for _ in range(dim))
    g = random_smooth(spec, rng)
    dt = 0.2
    ref_t = (w * g.values / dt
             - weighted_laplacian(FaceField(spec, mob), g).values)
    for mod in (kernels_numpy, kernels_numba):
        np.testing.assert_allclose(mod.transport_apply(w, mob, g.values, dt, spec.h),
                                   ref_t, atol=1e-12 * np.max(np.abs(ref_t)))


def test_numpy_kernel_close_to_operator_path(rng):
    spec = GridSpec(2, 8)
    f = random_smooth(spec, rng)
    np.testing.assert_allclose(kernels_numpy.neg_laplacian(f.values, spec.h),
                               -laplacian(f).values, atol=1e-13)


def test_backend_selection_roundtrip():
    original = backend.active_backend()
    try:
        prev = backend.select_backend("numpy")
        assert backend.active_backend() == "numpy"
        assert prev == original
        backend.select_backend("numba")
        assert backend.active_backend() == "numba"
        with pytest.raises(ValueError):
            backend.select_backend("fortran")
    finally:
        backend.select_backend(original)


def test_backend_determinism(rng):
    # same inputs, same backend: bitwise identical results
    spec = GridSpec(2, 12)
    f = rng.standard_normal(spec.shape)
    for mod in (kernels_numpy, kernels_numba):
        assert np.array_equal(mod.neg_laplacian(f, spec.h),
                              mod.neg_laplacian(f, spec.h))


def test_solver_results_backend_independent_to_tolerance(rng):
    # a full solve agrees across backends within solver tolerance
    from slotpnp.poisson import PoissonProblem, solve_poisson

    spec = GridSpec(2, 16)
    vals = rng.standard_normal(spec.shape)
    rhs = CellField(spec, vals - vals.mean())
    original = backend.active_backend()
    try:
        backend.select_backend("numpy")
        a = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
        backend.select_backend("numba")
        b = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
    finally:
        backend.select_backend(original)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)
