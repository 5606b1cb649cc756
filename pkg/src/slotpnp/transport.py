"""Semi-implicit Slotboom time step.

One step advances every species through the implicit diffusion-drift solve

    (c^{n+1} - c^n) / Δt = ∇_h · ( e^{-q ψ^n} ∇_h ( c^{n+1} e^{q ψ^n} ) ),

with the electric potential lagged at ψ^n, then refreshes ψ^{n+1} from the
discrete Poisson equation with the updated charge density.

The linear solve is performed in the Slotboom variable g = c^{n+1} e^{S},
S = q ψ^n: with the cell weight w = e^{-S} (exact pointwise exponential) and
the face mobility M (the configured mean of e^{-S}) the system

    (w ⊙ g) / Δt - ∇_h · ( M ∇_h g ) = c^n / Δt + source

is symmetric positive definite, which the c-form is not; the concentration
is recovered as c^{n+1} = w ⊙ g.  The assembled matrix has positive diagonal
and non-positive off-diagonal entries, which is what guarantees positivity
of c^{n+1} from positive c^n; a non-positive result on a source-free step is
therefore reported as an internal error, never repaired.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import backend as kernels
from .errors import PositivityViolationError
from .grid import CellField, FaceField, GridSpec, check_same_grid, weighted_laplacian
from .mobility import MeanKind, face_mobility
from .poisson import PoissonProblem, pcg, solve_poisson_with_stats

__all__ = [
    "Species",
    "State",
    "SchemeConfig",
    "apply_transport_operator",
    "solve_spd",
    "step_species",
    "step",
    "step_with_stats",
    "StepStats",
]

DEFAULT_POISSON_TOL = 1e-10
# Tight enough that per-step mass drift (which is bounded by the terminal
# linear-solve residual) stays at the 1e-13 relative level.
DEFAULT_TRANSPORT_TOL = 1e-13


@dataclass(frozen=True)
class Species:
    """Ionic species: display name and dimensionless valence."""

    name: str
    valence: float

    def __post_init__(self):
        if not np.isfinite(self.valence):
            raise ValueError(f"valence of '{self.name}' must be finite")


@dataclass(frozen=True)
class State:
    """Electric potential, one concentration field per species, and sim time.

    The potential is kept zero-mean by the Poisson gauge whenever the state
    was produced by :func:`step`; externally built states (e.g. references
    for error measurement) may carry any gauge.
    """

    psi: CellField
    concentrations: tuple[CellField, ...]
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "concentrations", tuple(self.concentrations))
        for c in self.concentrations:
            check_same_grid(self.psi, c)
            if not np.all(c.values > 0.0):
                raise ValueError("concentrations must be strictly positive")

    @property
    def spec(self) -> GridSpec:
        return self.psi.spec


RhoF = CellField | Callable[[float], CellField] | None


@dataclass(frozen=True)
class SchemeConfig:
    """Everything the stepper needs: physics constants, mean choice, solves."""

    kappa: float
    dt: float
    mean_kind: MeanKind
    species: tuple[Species, ...]
    rho_f: RhoF = None
    poisson_tol: float = DEFAULT_POISSON_TOL
    transport_tol: float = DEFAULT_TRANSPORT_TOL
    poisson_maxiter: int | None = None
    transport_maxiter: int | None = None
    poisson_solver: str = "cg"
    # free-energy bookkeeping: count the fixed-charge term once per species
    # (the monitored quantity) or once in total; see diagnostics.free_energy.
    fixed_charge_once: bool = False

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.species:
            raise ValueError("at least one species is required")
        if isinstance(self.mean_kind, str):
            object.__setattr__(self, "mean_kind", MeanKind.from_name(self.mean_kind))
        object.__setattr__(self, "species", tuple(self.species))

    def rho_f_at(self, t: float, spec: GridSpec) -> CellField:
        if self.rho_f is None:
            return CellField.zeros(spec)
        if isinstance(self.rho_f, CellField):
            return self.rho_f
        return self.rho_f(t)

    def maxiter_for(self, spec: GridSpec, which: str) -> int:
        cap = self.poisson_maxiter if which == "poisson" else self.transport_maxiter
        return cap if cap is not None else 10 * spec.num_cells


class StepStats(NamedTuple):
    transport_iterations: tuple[int, ...]
    poisson_iterations: int
    poisson_relative_residual: float


def apply_transport_operator(w: CellField, Mf: FaceField, dt: float,
                             g: CellField) -> CellField:
    """(w ⊙ g)/Δt - ∇_h·(M ∇_h g); SPD for positive w and M."""
    check_same_grid(w, g)
    check_same_grid(Mf, g)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not np.all(w.values > 0.0):
        raise ValueError("cell weight must be strictly positive")
    lap = weighted_laplacian(Mf, g)  # validates Mf > 0
    return CellField(g.spec, w.values * g.values / dt - lap.values)


def solve_spd(apply: Callable[[CellField], CellField], rhs: CellField, tol: float,
              maxiter: int, diag: CellField | None = None,
              x0: CellField | None = None) -> CellField:
    """Conjugate-gradient solve of an SPD operator given as a field closure."""
    spec = rhs.spec

    def matvec(v: np.ndarray) -> np.ndarray:
        return apply(CellField(spec, v)).values

    x, _, _ = pcg(matvec, rhs.values, tol, maxiter,
                  diag=None if diag is None else diag.values,
                  x0=None if x0 is None else x0.values,
                  what="transport")
    return CellField(spec, x)


def _transport_diag(w: np.ndarray, mob: tuple[np.ndarray, ...], dt: float,
                    h: float) -> np.ndarray:
    diag = w / dt
    inv_h2 = 1.0 / (h * h)
    for ax, m in enumerate(mob):
        diag = diag + (m + np.roll(m, 1, axis=ax)) * inv_h2
    return diag


def step_species_with_stats(c_n: CellField, psi_n: CellField, sp: Species,
                            cfg: SchemeConfig,
                            source: CellField | None = None) -> tuple[CellField, int]:
    """Advance one species; returns (c^{n+1}, CG iterations)."""
    check_same_grid(c_n, psi_n)
    spec = c_n.spec
    s_vals = sp.valence * psi_n.values
    w = np.exp(-s_vals)
    mob = face_mobility(CellField(spec, s_vals), cfg.mean_kind)
    mob_vals = mob.components
    rhs = c_n.values / cfg.dt
    if source is not None:
        check_same_grid(source, c_n)
        rhs = rhs + source.values
    h = spec.h
    dt = cfg.dt

    def matvec(g: np.ndarray) -> np.ndarray:
        return kernels.transport_apply(w, mob_vals, g, dt, h)

    diag = _transport_diag(w, mob_vals, dt, h)
    g0 = c_n.values * np.exp(s_vals)  # c^{n+1} ≈ c^n warm start
    g, iters, _ = pcg(matvec, rhs, cfg.transport_tol,
                      cfg.maxiter_for(spec, "transport"), diag=diag, x0=g0,
                      what=f"transport[{sp.name}]")
    c_next = w * g
    if source is None and not np.all(c_next > 0.0):
        flat = int(np.argmin(c_next))
        idx = tuple(int(i) for i in np.unravel_index(flat, spec.shape))
        raise PositivityViolationError(sp.name, idx, float(c_next[idx]))
    return CellField(spec, c_next), iters


def step_species(c_n: CellField, psi_n: CellField, sp: Species, cfg: SchemeConfig,
                 source: CellField | None = None) -> CellField:
    c_next, _ = step_species_with_stats(c_n, psi_n, sp, cfg, source)
    return c_next


def step_with_stats(state: State, cfg: SchemeConfig,
                    sources: Sequence[CellField | None] | None = None
                    ) -> tuple[State, StepStats]:
    """One full step: all species against the same lagged ψ^n, then Poisson."""
    spec = state.spec
    if len(cfg.species) != len(state.concentrations):
        raise ValueError(f"state carries {len(state.concentrations)} species, "
                         f"config {len(cfg.species)}")
    if sources is not None and len(sources) != len(cfg.species):
        raise ValueError("one source per species required")
    t_next = state.time + cfg.dt
    new_c = []
    t_iters = []
    for idx, sp in enumerate(cfg.species):
        src = sources[idx] if sources is not None else None
        c_next, iters = step_species_with_stats(state.concentrations[idx],
                                                state.psi, sp, cfg, src)
        new_c.append(c_next)
        t_iters.append(iters)
    rho = cfg.rho_f_at(t_next, spec)
    charge = rho.values.copy()
    for sp, c in zip(cfg.species, new_c):
        charge += sp.valence * c.values
    psi_next, pstats = solve_poisson_with_stats(
        PoissonProblem(cfg.kappa, CellField(spec, charge)),
        tol=cfg.poisson_tol, maxiter=cfg.maxiter_for(spec, "poisson"),
        x0=state.psi, solver=cfg.poisson_solver)
    next_state = State(psi_next, tuple(new_c), t_next)
    return next_state, StepStats(tuple(t_iters), pstats.iterations,
                                 pstats.relative_residual)


def step(state: State, cfg: SchemeConfig,
         sources: Sequence[CellField | None] | None = None) -> State:
    next_state, _ = step_with_stats(state, cfg, sources)
    return next_state
