"""Dense brute-force references for small grids.

These assemble the transport and Poisson operators as explicit matrices (by
applying the operators to basis vectors) and solve with dense linear algebra,
giving the matrix-free conjugate-gradient path an independent solve to be
certified against.  They ship in the library, not only in the tests, so the
command line ``verify`` mode can re-run the comparison on an installed build.
Sizes are capped at 4096 unknowns; performance is irrelevant here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CellField, GridSpec
from .mobility import face_mobility
from .poisson import _check_compatibility
from .transport import SchemeConfig, Species, State, apply_transport_operator

__all__ = ["SIZE_CAP", "DenseOperator", "dense_transport_matrix",
           "dense_poisson_solve", "dense_step"]

SIZE_CAP = 4096


@dataclass(frozen=True)
class DenseOperator:
    """Explicit matrix over flattened (C-order) cell indices."""

    spec: GridSpec
    matrix: np.ndarray

    def apply(self, f: CellField) -> CellField:
        return CellField(self.spec, (self.matrix @ f.values.ravel()).reshape(self.spec.shape))


def _check_size(spec: GridSpec) -> None:
    if spec.num_cells > SIZE_CAP:
        raise ValueError(f"dense oracle capped at {SIZE_CAP} cells, "
                         f"got {spec.num_cells}")


def _assemble(apply_fn, spec: GridSpec) -> np.ndarray:
    n = spec.num_cells
    mat = np.empty((n, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        mat[:, j] = apply_fn(CellField(spec, basis.reshape(spec.shape))).values.ravel()
        basis[j] = 0.0
    return mat


def dense_transport_matrix(psi_n: CellField, sp: Species,
                           cfg: SchemeConfig) -> DenseOperator:
    """Matrix of g -> (e^{-S} ⊙ g)/Δt - ∇_h·(M ∇_h g), S = q ψ^n."""
    spec = psi_n.spec
    _check_size(spec)
    s_vals = sp.valence * psi_n.values
    w = CellField(spec, np.exp(-s_vals))
    mob = face_mobility(CellField(spec, s_vals), cfg.mean_kind)
    mat = _assemble(lambda g: apply_transport_operator(w, mob, cfg.dt, g), spec)
    return DenseOperator(spec, mat)


def dense_poisson_matrix(spec: GridSpec, kappa: float) -> DenseOperator:
    """Matrix of ψ -> -κ Δ_h ψ (symmetric PSD, kernel = constants)."""
    _check_size(spec)
    from .grid import laplacian

    mat = _assemble(lambda f: CellField(spec, -kappa * laplacian(f).values), spec)
    return DenseOperator(spec, mat)


def dense_poisson_solve(rhs: CellField, kappa: float) -> CellField:
    """Minimum-norm (zero-mean) solution of -κ Δ_h ψ = rhs via pseudo-inverse."""
    spec = rhs.spec
    _check_size(spec)
    m = _check_compatibility(rhs, 1e-10)
    op = dense_poisson_matrix(spec, kappa)
    psi = np.linalg.pinv(op.matrix) @ (rhs.values.ravel() - m)
    psi -= psi.mean()
    return CellField(spec, psi.reshape(spec.shape))


def dense_step(state: State, cfg: SchemeConfig) -> State:
    """One full step with direct dense solves, mirroring transport.step."""
    spec = state.spec
    _check_size(spec)
    new_c = []
    for sp, c in zip(cfg.species, state.concentrations):
        op = dense_transport_matrix(state.psi, sp, cfg)
        s_vals = sp.valence * state.psi.values
        g = np.linalg.solve(op.matrix, (c.values / cfg.dt).ravel())
        new_c.append(CellField(spec, np.exp(-s_vals) * g.reshape(spec.shape)))
    t_next = state.time + cfg.dt
    charge = cfg.rho_f_at(t_next, spec).values.copy()
    for sp, c in zip(cfg.species, new_c):
        charge += sp.valence * c.values
    psi = dense_poisson_solve(CellField(spec, charge), cfg.kappa)
    return State(psi, tuple(new_c), t_next)
