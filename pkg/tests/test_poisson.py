import numpy as np
import pytest

from slotpnp.errors import IncompatibleRhsError, NonConvergenceError
from slotpnp.grid import CellField, GridSpec, laplacian, mean, norm
from slotpnp.oracle import dense_poisson_solve
from slotpnp.poisson import PoissonProblem, poisson_residual, solve_poisson

from conftest import random_zero_mean


def test_zero_rhs_gives_zero_field():
    spec = GridSpec(2, 8)
    psi = solve_poisson(PoissonProblem(1.0, CellField.zeros(spec)))
    assert np.all(psi.values == 0.0)


def test_eigenmode_solution():
    spec = GridSpec(1, 32)
    x = spec.axis_centers()
    kappa = 1.7
    lam = (4.0 / spec.h**2) * np.sin(np.pi * spec.h) ** 2
    exact = np.cos(2 * np.pi * x)
    rhs = CellField(spec, kappa * lam * exact)
    psi = solve_poisson(PoissonProblem(kappa, rhs), tol=1e-12)
    np.testing.assert_allclose(psi.values, exact, atol=1e-10)


def test_matches_dense_pseudo_inverse(rng):
    spec = GridSpec(2, 8)
    rhs = random_zero_mean(spec, rng)
    psi = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-13)
    ref = dense_poisson_solve(rhs, 1.0)
    np.testing.assert_allclose(psi.values, ref.values, atol=1e-10)


def test_zero_mean_gauge(rng):
    spec = GridSpec(2, 12)
    psi = solve_poisson(PoissonProblem(0.3, random_zero_mean(spec, rng)))
    assert abs(mean(psi)) <= 1e-14 * norm(psi, "linf") + 1e-300


def test_linearity(rng):
    spec = GridSpec(2, 10)
    rhs = random_zero_mean(spec, rng)
    psi1 = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
    psi3 = solve_poisson(PoissonProblem(1.0, CellField(spec, 3.0 * rhs.values)),
                         tol=1e-12)
    np.testing.assert_allclose(psi3.values, 3.0 * psi1.values,
                               atol=1e-10 * norm(psi1, "linf"))


def test_mirror_symmetry(rng):
    spec = GridSpec(1, 16)
    rhs = random_zero_mean(spec, rng)
    mirrored = CellField(spec, rhs.values[::-1])
    psi = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
    psi_m = solve_poisson(PoissonProblem(1.0, mirrored), tol=1e-12)
    np.testing.assert_allclose(psi_m.values, psi.values[::-1],
                               atol=1e-10 * (norm(psi, "linf") + 1e-30))


def test_small_mean_silently_projected(rng):
    spec = GridSpec(1, 16)
    rhs = random_zero_mean(spec, rng)
    shifted = CellField(spec, rhs.values + 1e-12 * norm(rhs, "linf"))
    psi = solve_poisson(PoissonProblem(1.0, shifted), tol=1e-12)
    ref = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
    np.testing.assert_allclose(psi.values, ref.values, atol=1e-9)


def test_incompatible_rhs_reports_mean():
    spec = GridSpec(2, 8)
    rhs = CellField.full(spec, 0.5)
    with pytest.raises(IncompatibleRhsError) as err:
        solve_poisson(PoissonProblem(1.0, rhs))
    assert err.value.mean_value == pytest.approx(0.5)


def test_iteration_cap_raises_with_residual(rng):
    spec = GridSpec(2, 24)
    rhs = random_zero_mean(spec, rng)
    with pytest.raises(NonConvergenceError) as err:
        solve_poisson(PoissonProblem(1.0, rhs), tol=1e-14, maxiter=2)
    assert err.value.residual > 0.0
    assert err.value.iterations == 2


def test_residual_definition_and_constant_shift(rng):
    spec = GridSpec(2, 8)
    rhs = random_zero_mean(spec, rng)
    problem = PoissonProblem(2.0, rhs)
    psi = solve_poisson(problem, tol=1e-12)
    res = poisson_residual(psi, problem)
    assert res <= 1e-11 * norm(rhs, "l2")
    assert poisson_residual(CellField.zeros(spec),
                            PoissonProblem(1.0, CellField.zeros(spec))) == 0.0
    # Δ_h annihilates constants: residual unchanged under a constant shift
    shifted = CellField(spec, psi.values + 4.2)
    assert poisson_residual(shifted, problem) == pytest.approx(res, abs=1e-12)


def test_fft_backend_agrees_with_cg(rng):
    for dim in (1, 2, 3):
        spec = GridSpec(dim, 8)
        rhs = random_zero_mean(spec, rng)
        cg = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-13)
        fft = solve_poisson(PoissonProblem(1.0, rhs), solver="fft")
        np.testing.assert_allclose(fft.values, cg.values, atol=1e-10)


def test_fft_residual_meets_default_tolerance(rng):
    spec = GridSpec(2, 16)
    rhs = random_zero_mean(spec, rng)
    problem = PoissonProblem(1.0, rhs)
    psi = solve_poisson(problem, solver="fft")
    assert poisson_residual(psi, problem) <= 1e-10 * norm(rhs, "l2")


def test_kappa_validation():
    spec = GridSpec(1, 4)
    with pytest.raises(ValueError):
        PoissonProblem(0.0, CellField.zeros(spec))


def test_exact_laplacian_relation(rng):
    # solve then apply the operator: -κ Δ_h ψ recovers the projected rhs
    spec = GridSpec(2, 10)
    rhs = random_zero_mean(spec, rng)
    kappa = 0.7
    psi = solve_poisson(PoissonProblem(kappa, rhs), tol=1e-13)
    np.testing.assert_allclose(-kappa * laplacian(psi).values, rhs.values,
                               atol=1e-9 * norm(rhs, "linf"))
