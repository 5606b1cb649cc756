import numpy as np
import pytest

from slotpnp.grid import CellField, GridSpec
from slotpnp.mobility import MeanKind
from slotpnp.oracle import (SIZE_CAP, dense_poisson_solve, dense_step,
                            dense_transport_matrix)
from slotpnp.poisson import PoissonProblem, solve_poisson
from slotpnp.transport import SchemeConfig, Species, State
from slotpnp.diagnostics import total_mass

from conftest import random_smooth, random_zero_mean

TWO_SPECIES = (Species("cation", 1.0), Species("anion", -1.0))


def make_cfg(dt=1.0, mean="harmonic"):
    return SchemeConfig(kappa=1.0, dt=dt, mean_kind=mean, species=TWO_SPECIES)


def test_flat_potential_row_sums():
    # ψ = 0, Δt = 1: stencil cancels off the diagonal mass term, row sums = 1
    spec = GridSpec(2, 6)
    op = dense_transport_matrix(CellField.zeros(spec), TWO_SPECIES[0], make_cfg())
    np.testing.assert_allclose(op.matrix.sum(axis=1), 1.0, atol=1e-12)


def test_matrix_symmetric(rng):
    spec = GridSpec(2, 6)
    psi = random_smooth(spec, rng)
    op = dense_transport_matrix(psi, TWO_SPECIES[0], make_cfg(dt=0.1))
    a = op.matrix
    assert np.max(np.abs(a - a.T)) <= 1e-14 * np.max(np.abs(a))


def test_matrix_positive_definite(rng):
    spec = GridSpec(1, 8)
    psi = random_smooth(spec, rng)
    op = dense_transport_matrix(psi, TWO_SPECIES[1], make_cfg(dt=0.2))
    eigs = np.linalg.eigvalsh(op.matrix)
    assert eigs.min() > 0.0


@pytest.mark.parametrize("mean", list(MeanKind))
def test_m_matrix_sign_pattern(mean, rng):
    # positive diagonal, non-positive off-diagonal: the structural source of
    # positivity preservation
    spec = GridSpec(2, 5)
    psi = random_smooth(spec, rng)
    op = dense_transport_matrix(psi, TWO_SPECIES[0],
                                make_cfg(dt=0.3, mean=mean))
    a = op.matrix.copy()
    diag = np.diag(a).copy()
    assert np.all(diag > 0.0)
    np.fill_diagonal(a, 0.0)
    assert np.all(a <= 1e-14 * diag.max())


def test_apply_equals_matrix_on_basis_vectors(rng):
    # exhaustive for n <= 8: the assembled columns reproduce the apply exactly
    spec = GridSpec(1, 8)
    psi = random_smooth(spec, rng)
    cfg = make_cfg(dt=0.1, mean="entropic")
    op = dense_transport_matrix(psi, TWO_SPECIES[0], cfg)
    from slotpnp.mobility import face_mobility
    from slotpnp.transport import apply_transport_operator

    s_vals = psi.values  # valence 1
    w = CellField(spec, np.exp(-s_vals))
    mob = face_mobility(CellField(spec, s_vals), cfg.mean_kind)
    basis = np.zeros(spec.shape)
    for j in range(spec.num_cells):
        basis.flat[j] = 1.0
        out = apply_transport_operator(w, mob, cfg.dt, CellField(spec, basis))
        col = op.matrix[:, j]
        scale = np.max(np.abs(col))
        assert np.max(np.abs(out.values.ravel() - col)) <= 1e-13 * scale
        basis.flat[j] = 0.0


def test_dense_poisson_eigenmode_and_zero():
    spec = GridSpec(1, 16)
    x = spec.axis_centers()
    lam = (4.0 / spec.h**2) * np.sin(np.pi * spec.h) ** 2
    exact = np.cos(2 * np.pi * x)
    psi = dense_poisson_solve(CellField(spec, lam * exact), 1.0)
    np.testing.assert_allclose(psi.values, exact, atol=1e-12)
    assert np.all(dense_poisson_solve(CellField.zeros(spec), 1.0).values == 0.0)


def test_dense_poisson_agrees_with_iterative(rng):
    spec = GridSpec(2, 8)
    rhs = random_zero_mean(spec, rng)
    direct = dense_poisson_solve(rhs, 2.0)
    iterative = solve_poisson(PoissonProblem(2.0, rhs), tol=1e-13)
    np.testing.assert_allclose(direct.values, iterative.values, atol=1e-10)


def _neutral_random_state(spec, rng):
    psi = random_smooth(spec, rng)
    psi = CellField(spec, psi.values - psi.values.mean())
    base = rng.uniform(0.5, 1.5, spec.shape)
    delta = rng.uniform(-0.3, 0.3, spec.shape)
    delta -= delta.mean()
    return State(psi, (CellField(spec, base), CellField(spec, base + delta)), 0.0)


def test_dense_step_mass_and_positivity(rng):
    spec = GridSpec(2, 6)
    cfg = make_cfg(dt=0.1, mean="geometric")
    for _ in range(100):
        st = _neutral_random_state(spec, rng)
        out = dense_step(st, cfg)
        for before, after in zip(st.concentrations, out.concentrations):
            assert np.all(after.values > 0.0)
            drift = abs(total_mass(after) - total_mass(before)) / total_mass(before)
            assert drift <= 1e-13


def test_dense_step_positivity_thousand_trials(rng):
    # 1000 random trials spread over the four means (1-D keeps it cheap)
    spec = GridSpec(1, 8)
    for mean in MeanKind:
        cfg = make_cfg(dt=0.4, mean=mean)
        for _ in range(250):
            st = _neutral_random_state(spec, rng)
            out = dense_step(st, cfg)
            assert all(np.all(c.values > 0.0) for c in out.concentrations)


def test_size_cap_enforced():
    spec = GridSpec(2, 70)  # 4900 > 4096
    with pytest.raises(ValueError):
        dense_transport_matrix(CellField.zeros(spec), TWO_SPECIES[0], make_cfg())
    assert SIZE_CAP == 4096
