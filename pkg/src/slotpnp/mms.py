"""Manufactured-solutions accuracy harness (2-D).

A manufactured case prescribes exact periodic fields c^1, c^2, ψ and the
source terms that force the semi-implicit scheme to track them:

    f_l  = ∂_t c^l - ∇·(∇ c^l + q^l c^l ∇ψ)
    ρ^f  = -κ Δψ - Σ_l q^l c^l          (time-dependent here)

``build_paper_case`` carries the binary symmetric electrolyte case

    c^1 = c^2 = e^{-t} cos(2πx) sin(2πy) + 2,   ψ = e^{-t} cos(2πx) sin(2πy)

on the unit square with κ = 1 and valences ±1, for which (with
u = e^{-t} cos(2πx) sin(2πy)):

    f_1 = (24π² - 1) u + 8π² u² - |∇u|²
    f_2 = (-8π² - 1) u - 8π² u² + |∇u|²
    ρ^f = 8π² κ u
    |∇u|² = 4π² e^{-2t} (sin²(2πx) sin²(2πy) + cos²(2πx) cos²(2πy))

(closed forms obtained by symbolic differentiation of the exact fields; the
test suite re-derives them independently).

Runs start from the exact concentrations sampled at cell centers; the
initial potential is produced by the discrete Poisson solve from those
concentrations and ρ^f(0), matching the scheme's own structure, not by
sampling ψ (the difference is O(h²)).  Sources are evaluated at t^{n+1}.
A non-integral T/Δt shrinks Δt to T/ceil(T/Δt); the effective Δt is
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .diagnostics import ErrorNorms, error_norms
from .grid import CellField, GridSpec
from .mobility import MeanKind
from .poisson import PoissonProblem, solve_poisson
from .transport import SchemeConfig, Species, State, step

__all__ = ["ManufacturedCase", "build_paper_case", "run_case", "CaseResult",
           "convergence_table", "ConvergenceTable", "observed_order"]

Field2D = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

# errors at or below this are rounding noise; orders computed from them are
# reported as NaN (rendered empty in CSV)
ORDER_FLOOR = 1e-13


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields, matching sources, and physics constants of one MMS setup."""

    conc_exact: tuple[Field2D, ...]
    psi_exact: Field2D
    sources: tuple[Field2D, ...]
    rho_f: Field2D
    valences: tuple[float, ...]
    kappa: float
    interval: tuple[float, float] = (0.0, 1.0)

    def species(self) -> tuple[Species, ...]:
        return tuple(Species(f"c{i + 1}", q) for i, q in enumerate(self.valences))


def build_paper_case() -> ManufacturedCase:
    """Binary monovalent electrolyte with a single decaying Fourier mode."""
    two_pi = 2.0 * math.pi
    pi2 = math.pi * math.pi

    def u(x, y, t):
        return math.exp(-t) * np.cos(two_pi * x) * np.sin(two_pi * y)

    def grad_u_sq(x, y, t):
        return (4.0 * pi2 * math.exp(-2.0 * t)
                * (np.sin(two_pi * x) ** 2 * np.sin(two_pi * y) ** 2
                   + np.cos(two_pi * x) ** 2 * np.cos(two_pi * y) ** 2))

    def conc(x, y, t):
        return u(x, y, t) + 2.0

    def psi(x, y, t):
        return u(x, y, t)

    def f1(x, y, t):
        uu = u(x, y, t)
        return (24.0 * pi2 - 1.0) * uu + 8.0 * pi2 * uu * uu - grad_u_sq(x, y, t)

    def f2(x, y, t):
        uu = u(x, y, t)
        return (-8.0 * pi2 - 1.0) * uu - 8.0 * pi2 * uu * uu + grad_u_sq(x, y, t)

    kappa = 1.0

    def rho_f(x, y, t):
        return 8.0 * pi2 * kappa * u(x, y, t)

    return ManufacturedCase(conc_exact=(conc, conc), psi_exact=psi,
                            sources=(f1, f2), rho_f=rho_f,
                            valences=(1.0, -1.0), kappa=kappa)


@dataclass(frozen=True)
class CaseResult:
    """Errors of one run at its final time."""

    n: int
    h: float
    dt: float
    steps: int
    linf_c: tuple[float, ...]
    linf_psi: float
    norms: ErrorNorms


def reference_state(case: ManufacturedCase, spec: GridSpec, t: float) -> State:
    x, y = spec.meshgrid()
    return State(
        psi=CellField(spec, case.psi_exact(x, y, t)),
        concentrations=tuple(CellField(spec, ce(x, y, t)) for ce in case.conc_exact),
        time=t,
    )


def _scheme_config(case: ManufacturedCase, spec: GridSpec, dt: float,
                   mean_kind: MeanKind, **solver_opts) -> SchemeConfig:
    x, y = spec.meshgrid()

    def rho_closure(t: float) -> CellField:
        return CellField(spec, case.rho_f(x, y, t))

    return SchemeConfig(kappa=case.kappa, dt=dt, mean_kind=mean_kind,
                        species=case.species(), rho_f=rho_closure, **solver_opts)


def run_case(case: ManufacturedCase, n: int, dt: float, t_end: float,
             mean_kind: MeanKind | str, **solver_opts) -> CaseResult:
    """Step the scheme to t_end against the manufactured sources and measure errors."""
    if isinstance(mean_kind, str):
        mean_kind = MeanKind.from_name(mean_kind)
    spec = GridSpec(dim=2, n=n, interval=case.interval)
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt_eff = t_end / steps
    cfg = _scheme_config(case, spec, dt_eff, mean_kind, **solver_opts)

    x, y = spec.meshgrid()
    c0 = tuple(CellField(spec, ce(x, y, 0.0)) for ce in case.conc_exact)
    charge0 = cfg.rho_f_at(0.0, spec).values.copy()
    for q, c in zip(case.valences, c0):
        charge0 += q * c.values
    psi0 = solve_poisson(PoissonProblem(case.kappa, CellField(spec, charge0)),
                         tol=cfg.poisson_tol, solver=cfg.poisson_solver)
    state = State(psi0, c0, 0.0)

    for k in range(steps):
        t_next = (k + 1) * dt_eff
        sources = tuple(CellField(spec, f(x, y, t_next)) for f in case.sources)
        state = step(state, cfg, sources)

    ref = reference_state(case, spec, t_end)
    norms = error_norms(state, ref, case.valences)
    return CaseResult(n=n, h=spec.h, dt=dt_eff, steps=steps,
                      linf_c=norms.c_linf, linf_psi=norms.psi_linf, norms=norms)


def observed_order(err_coarse: float, err_fine: float,
                   scale_coarse: float, scale_fine: float) -> float:
    """log(e_c/e_f) / log(s_c/s_f); NaN when either error is rounding noise."""
    if min(err_coarse, err_fine) <= ORDER_FLOOR:
        return math.nan
    return math.log(err_coarse / err_fine) / math.log(scale_coarse / scale_fine)


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of (h, errors, orders) for one mobility mean under Δt = h²."""

    mean_kind: MeanKind
    results: tuple[CaseResult, ...]

    @property
    def orders_c(self) -> tuple[tuple[float, ...], ...]:
        """Per row: per-species orders vs the previous row (NaN for the first)."""
        rows = []
        for i, res in enumerate(self.results):
            if i == 0:
                rows.append(tuple(math.nan for _ in res.linf_c))
            else:
                prev = self.results[i - 1]
                rows.append(tuple(observed_order(ep, ec, prev.h, res.h)
                                  for ep, ec in zip(prev.linf_c, res.linf_c)))
        return tuple(rows)

    @property
    def orders_psi(self) -> tuple[float, ...]:
        out = []
        for i, res in enumerate(self.results):
            if i == 0:
                out.append(math.nan)
            else:
                prev = self.results[i - 1]
                out.append(observed_order(prev.linf_psi, res.linf_psi, prev.h, res.h))
        return tuple(out)

    def to_csv(self) -> str:
        def f(x: float) -> str:
            return "" if math.isnan(x) else f"{x:.17g}"

        lines = ["mean,h,dt,err_c1,ord_c1,err_c2,ord_c2,err_psi,ord_psi"]
        oc = self.orders_c
        op = self.orders_psi
        for i, res in enumerate(self.results):
            lines.append(",".join([
                self.mean_kind.value, f(res.h), f(res.dt),
                f(res.linf_c[0]), f(oc[i][0]),
                f(res.linf_c[1]), f(oc[i][1]),
                f(res.linf_psi), f(op[i]),
            ]))
        return "\n".join(lines) + "\n"


def convergence_table(case: ManufacturedCase, n_list: Sequence[int],
                      mean_kind: MeanKind | str, t_end: float = 0.1,
                      **solver_opts) -> ConvergenceTable:
    """Refinement study with Δt = h² per row; needs at least two ascending n."""
    if isinstance(mean_kind, str):
        mean_kind = MeanKind.from_name(mean_kind)
    if len(n_list) < 2:
        raise ValueError("convergence table needs at least two grid sizes")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"grid sizes must be strictly ascending, got {list(n_list)}")
    a, b = case.interval
    results = []
    for n in n_list:
        h = (b - a) / n
        results.append(run_case(case, n, dt=h * h, t_end=t_end,
                                mean_kind=mean_kind, **solver_opts))
    return ConvergenceTable(mean_kind, tuple(results))
