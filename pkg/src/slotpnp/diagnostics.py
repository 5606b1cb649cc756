"""Monitored quantities: mass, free energy, dissipation rate, step bound, fluxes.

These are the runtime-checkable counterparts of the scheme's structure
properties: total mass is conserved step to step, concentrations stay
positive, and the discrete free energy

    F_h = Σ_l Σ_cells h^dim [ c^l log c^l + (q^l c^l + ρ^f) ψ / 2 ]

is non-increasing whenever the time step stays below the bound τ*.  As
written the fixed-charge term ρ^f ψ is counted once per species; that
literal form is the monitored default, with ``fixed_charge_once=True``
charging it a single time instead (the two differ by a ψ-dependent additive
term when more than one species is present).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import (CellField, FaceField, avg_forward, check_same_grid, diff_forward,
                   face_inner, grad_linf, gradient, norm)
from .mobility import face_mobility
from .transport import SchemeConfig, State

__all__ = [
    "StepReport",
    "total_mass",
    "free_energy",
    "dissipation_rate",
    "tau_star",
    "flux",
    "ErrorNorms",
    "error_norms",
]


def total_mass(c: CellField) -> float:
    """h^dim times the sum over cells."""
    return float(c.spec.cell_volume * np.sum(c.values))


def _check_positive(c: CellField) -> None:
    if not np.all(c.values > 0.0):
        raise ValueError("free energy / dissipation need strictly positive concentrations")


def free_energy(state: State, valences: Sequence[float],
                rho_f: CellField | None = None,
                fixed_charge_once: bool = False) -> float:
    """Discrete free energy of a state (one valence per species).

    ``fixed_charge_once=False`` counts ρ^f ψ inside the species sum (the
    literal monitored quantity); ``True`` divides it by the species count so
    it is charged once in total.
    """
    spec = state.spec
    vol = spec.cell_volume
    psi = state.psi.values
    if len(valences) != len(state.concentrations):
        raise ValueError("one valence per species required")
    if rho_f is None:
        rho_vals = np.zeros(spec.shape)
    else:
        check_same_grid(rho_f, state.psi)
        rho_vals = rho_f.values
    if fixed_charge_once:
        rho_vals = rho_vals / len(state.concentrations)
    total = 0.0
    for c, q in zip(state.concentrations, valences):
        _check_positive(c)
        cv = c.values
        total += vol * float(np.sum(cv * np.log(cv)
                                    + 0.5 * (q * cv + rho_vals) * psi))
    return total


def dissipation_rate(c_next: Sequence[CellField], psi_n: CellField,
                     cfg: SchemeConfig) -> float:
    """Non-negative face sum I^n whose -Δt/2 multiple bounds the energy drop.

    Uses the same mobility mean as the step that produced ``c_next`` and the
    lagged potential ψ^n that drove it.
    """
    spec = psi_n.spec
    vol = spec.cell_volume
    total = 0.0
    for sp, c in zip(cfg.species, c_next):
        check_same_grid(c, psi_n)
        _check_positive(c)
        s_vals = sp.valence * psi_n.values
        mob = face_mobility(CellField(spec, s_vals), cfg.mean_kind)
        g = CellField(spec, c.values * np.exp(s_vals))
        log_g = CellField(spec, s_vals + np.log(c.values))
        for ax in range(spec.dim):
            total += vol * float(np.sum(mob.components[ax]
                                        * diff_forward(g, ax)
                                        * diff_forward(log_g, ax)))
    return total


def tau_star(c_next: Sequence[CellField], psi_n: CellField, cfg: SchemeConfig) -> float:
    """Sufficient time-step bound for guaranteed energy dissipation.

    (κ / C1) exp(-h max|q| ||∇_h ψ^n||_inf) with
    C1 = Σ_l |q^l|^2 · max_l ||c^{l,n+1}||_inf.
    """
    sup_c = max(norm(c, "linf") for c in c_next)
    c1 = sum(sp.valence**2 for sp in cfg.species) * sup_c
    if c1 == 0.0:
        return math.inf
    qmax = max(abs(sp.valence) for sp in cfg.species)
    return (cfg.kappa / c1) * math.exp(-psi_n.spec.h * qmax * grad_linf(psi_n))


def flux(c: CellField, psi: CellField, q: float) -> FaceField:
    """Face flux D c + q (A c)(D ψ), the numerical profile of ∇c + q c ∇ψ."""
    check_same_grid(c, psi)
    comps = []
    for ax in range(c.spec.dim):
        comp = diff_forward(c, ax)
        if q != 0.0:
            comp = comp + q * avg_forward(c, ax) * diff_forward(psi, ax)
        comps.append(comp)
    return FaceField(c.spec, comps)


@dataclass(frozen=True)
class ErrorNorms:
    """Per-field error norms between a numerical and a reference state."""

    c_l2: tuple[float, ...]
    c_linf: tuple[float, ...]
    c_grad_l2: tuple[float, ...]
    psi_l2: float
    psi_linf: float
    psi_h2: float
    flux_l2: tuple[float, ...]


def error_norms(numerical: State, reference: State,
                valences: Sequence[float] | None = None) -> ErrorNorms:
    """Error norms for one time level; flux errors need the valences."""
    check_same_grid(numerical.psi, reference.psi)
    if len(numerical.concentrations) != len(reference.concentrations):
        raise ValueError("states carry different species counts")
    c_l2, c_linf, c_grad = [], [], []
    for num, ref in zip(numerical.concentrations, reference.concentrations):
        diff = num - ref
        c_l2.append(norm(diff, "l2"))
        c_linf.append(norm(diff, "linf"))
        c_grad.append(norm(diff, "grad_l2"))
    psi_diff = numerical.psi - reference.psi
    flux_l2 = []
    if valences is not None:
        if len(valences) != len(numerical.concentrations):
            raise ValueError("one valence per species required")
        for q, num, ref in zip(valences, numerical.concentrations,
                               reference.concentrations):
            d = _face_diff(flux(num, numerical.psi, q), flux(ref, reference.psi, q))
            flux_l2.append(math.sqrt(face_inner(d, d)))
    return ErrorNorms(tuple(c_l2), tuple(c_linf), tuple(c_grad),
                      norm(psi_diff, "l2"), norm(psi_diff, "linf"),
                      norm(psi_diff, "h2"), tuple(flux_l2))


def _face_diff(a: FaceField, b: FaceField) -> FaceField:
    return FaceField(a.spec, tuple(ca - cb for ca, cb in zip(a.components, b.components)))


@dataclass(frozen=True)
class StepReport:
    """One monitoring record: serializes to a CSV row (see the cli module)."""

    time: float
    masses: tuple[float, ...]
    min_concentrations: tuple[float, ...]
    free_energy: float
    dissipation: float  # nan when only one time level is available
    tau_star: float
    poisson_residual: float
    poisson_iterations: int
    transport_iterations: tuple[int, ...]

    @staticmethod
    def csv_header(species_names: Sequence[str]) -> str:
        cols = ["t"]
        cols += [f"mass_{n}" for n in species_names]
        cols += [f"min_c_{n}" for n in species_names]
        cols += ["energy", "dissipation", "tau_star",
                 "poisson_residual", "poisson_iters"]
        cols += [f"iters_{n}" for n in species_names]
        return ",".join(cols)

    def csv_row(self) -> str:
        def f(x: float) -> str:
            return f"{x:.17g}"

        parts = [f(self.time)]
        parts += [f(m) for m in self.masses]
        parts += [f(m) for m in self.min_concentrations]
        parts += [f(self.free_energy), f(self.dissipation), f(self.tau_star),
                  f(self.poisson_residual), str(self.poisson_iterations)]
        parts += [str(i) for i in self.transport_iterations]
        return ",".join(parts)
