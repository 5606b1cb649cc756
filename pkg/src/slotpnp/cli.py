"""Command-line front end.

Four modes, selected by ``mode`` in the ``[run]`` section or ``--mode``:

* ``simulate``    march a configured problem, emitting one monitoring row
                  (mass, min concentration, energy, dissipation, τ*, solver
                  stats) every ``report_every`` steps
* ``mms``         manufactured-solutions refinement study; one CSV per
                  mobility mean with columns
                  mean,h,dt,err_c1,ord_c1,err_c2,ord_c2,err_psi,ord_psi
* ``properties``  run the structure-preservation checks (mass, positivity,
                  energy decay, conditional dissipation, operator identities)
                  on the configured problem and report pass/fail with the
                  measured slack
* ``verify``      compare the matrix-free operators and solvers against the
                  dense oracles on a small grid

Configuration is flat INI text (sections of key = value pairs, no nesting).
Unknown sections or keys are rejected with the offending name and line.
Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 property violation.  Floating-point output carries 17 significant digits.
The ``SLOTPNP_OUTDIR`` environment variable redirects all output files.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .diagnostics import (StepReport, dissipation_rate, free_energy, tau_star,
                          total_mass)
from .errors import (ConfigError, IncompatibleRhsError, NonConvergenceError,
                     PositivityViolationError, SlotpnpError)
from .grid import (CellField, FaceField, GridSpec, avg_forward, divergence,
                   face_inner, gradient, inner)
from .mms import build_paper_case, convergence_table, run_case
from .mobility import MeanKind, face_mobility, pair_mean
from .oracle import dense_poisson_solve, dense_step, dense_transport_matrix
from .poisson import PoissonProblem, poisson_residual, solve_poisson
from .transport import (SchemeConfig, Species, State, apply_transport_operator,
                        step_with_stats)

logger = logging.getLogger("slotpnp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PROPERTY = 4

OUTDIR_ENV = "SLOTPNP_OUTDIR"

MODES = ("simulate", "mms", "properties", "verify")

# Energy-plateau early stop: |ΔF| below this relative slack for 100
# consecutive steps ends a simulate run before t_end.
EARLY_STOP_SLACK = 1e-12
EARLY_STOP_RUN = 100

ENERGY_SLACK = 1e-10
MASS_STEP_TOL = 1e-13
MASS_RUN_TOL = 1e-12

# Closed neutral electrolyte relaxing around four Gaussian point charges
# (two positive, two negative, one per quadrant of the unit square).
DEFAULT_CONFIG = """\
[run]
mode = simulate
seed = 1234
report_every = 10

[grid]
dim = 2
n = 80
domain = 0, 1

[time]
dt_rule = h_over_10
t_end = 5.0
early_stop = true

[scheme]
kappa = 1e-3
mean = entropic

[species]
cation = +1, uniform:0.1
anion = -1, uniform:0.1

[charge]
rho_f = gaussian-quadrupole
"""

_KNOWN_KEYS = {
    "run": {"mode", "out", "seed", "report_every"},
    "grid": {"dim", "n", "domain"},
    "time": {"dt", "dt_rule", "t_end", "early_stop"},
    "scheme": {"kappa", "mean", "poisson_tol", "transport_tol",
               "poisson_maxiter", "transport_maxiter", "poisson_solver",
               "energy_fixed_charge"},
    "species": None,  # free-form: one key per species
    "charge": {"rho_f"},
    "mms": {"n_list", "means", "t_end"},
    "properties": {"steps", "random_trials"},
    "verify": {"size", "trials"},
}

_DT_RULES = ("h_over_10", "h_squared")


@dataclass(frozen=True)
class SpeciesSpec:
    name: str
    valence: float
    initial: str  # selector, e.g. "uniform:0.1"


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    out: str | None = None
    seed: int = 1234
    report_every: int = 10
    dim: int = 2
    n: int = 80
    domain: tuple[float, float] = (0.0, 1.0)
    dt: float | None = None
    dt_rule: str | None = "h_over_10"
    t_end: float = 5.0
    early_stop: bool = True
    kappa: float = 1e-3
    mean: MeanKind = MeanKind.HARMONIC
    poisson_tol: float = 1e-10
    transport_tol: float = 1e-13
    poisson_maxiter: int | None = None
    transport_maxiter: int | None = None
    poisson_solver: str = "cg"
    energy_fixed_charge_once: bool = False
    species: tuple[SpeciesSpec, ...] = (
        SpeciesSpec("cation", 1.0, "uniform:0.1"),
        SpeciesSpec("anion", -1.0, "uniform:0.1"),
    )
    rho_f_kind: str = "gaussian-quadrupole"
    mms_n_list: tuple[int, ...] = (50, 60, 70, 80, 90)
    mms_means: tuple[MeanKind, ...] = tuple(MeanKind)
    mms_t_end: float = 0.1
    properties_steps: int = 400
    properties_trials: int = 200
    verify_size: int = 8
    verify_trials: int = 20

    def resolved_dt(self, h: float) -> float:
        if self.dt is not None:
            return self.dt
        if self.dt_rule == "h_over_10":
            return h / 10.0
        if self.dt_rule == "h_squared":
            return h * h
        raise ConfigError("no time step: set 'dt' or 'dt_rule'", key="dt")

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.dim, self.n, self.domain)

    def out_path(self, default_name: str) -> Path:
        path = Path(self.out) if self.out else Path(default_name)
        outdir = os.environ.get(OUTDIR_ENV)
        if outdir:
            path = Path(outdir) / path.name
        return path


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Map (section, key) to the 1-based line where the key is assigned."""
    lines = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        for sep in ("=", ":"):
            if sep in line:
                key = line.split(sep, 1)[0].strip().lower()
                lines.setdefault((section, key), lineno)
                break
    return lines


def _parse_float(raw: str, key: str, line: int | None, positive: bool = False) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got '{raw}'", key=key, line=line)
    if positive and not value > 0.0:
        raise ConfigError(f"must be positive, got {value}", key=key, line=line)
    if not math.isfinite(value):
        raise ConfigError(f"must be finite, got {value}", key=key, line=line)
    return value


def _parse_int(raw: str, key: str, line: int | None, minimum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got '{raw}'", key=key, line=line)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", key=key, line=line)
    return value


def _parse_bool(raw: str, key: str, line: int | None) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got '{raw}'", key=key, line=line)


def parse_config(text: str) -> RunConfig:
    """Validate flat INI text into a RunConfig; unknown keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}")
    lines = _key_lines(text)

    def where(section: str, key: str) -> int | None:
        return lines.get((section, key))

    for section in parser.sections():
        sec = section.lower()
        if sec not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section '[{section}]'")
        allowed = _KNOWN_KEYS[sec]
        if allowed is None:
            continue
        for key in parser[section]:
            if key.lower() not in allowed:
                raise ConfigError("unknown key", key=f"{sec}.{key}",
                                  line=where(sec, key.lower()))

    def get(section: str, key: str) -> str | None:
        if parser.has_section(section) and key in parser[section]:
            return parser[section][key].strip()
        return None

    cfg = RunConfig()
    updates: dict = {}

    raw = get("run", "mode")
    if raw is not None:
        if raw.lower() not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{raw}'",
                              key="run.mode", line=where("run", "mode"))
        updates["mode"] = raw.lower()
    raw = get("run", "out")
    if raw is not None:
        updates["out"] = raw
    raw = get("run", "seed")
    if raw is not None:
        updates["seed"] = _parse_int(raw, "run.seed", where("run", "seed"))
    raw = get("run", "report_every")
    if raw is not None:
        updates["report_every"] = _parse_int(raw, "run.report_every",
                                             where("run", "report_every"), minimum=1)

    raw = get("grid", "dim")
    if raw is not None:
        dim = _parse_int(raw, "grid.dim", where("grid", "dim"))
        if dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {dim}",
                              key="grid.dim", line=where("grid", "dim"))
        updates["dim"] = dim
    raw = get("grid", "n")
    if raw is not None:
        updates["n"] = _parse_int(raw, "grid.n", where("grid", "n"), minimum=2)
    raw = get("grid", "domain")
    if raw is not None:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"domain must be 'a, b', got '{raw}'",
                              key="grid.domain", line=where("grid", "domain"))
        a = _parse_float(parts[0], "grid.domain", where("grid", "domain"))
        b = _parse_float(parts[1], "grid.domain", where("grid", "domain"))
        if not b > a:
            raise ConfigError(f"domain must satisfy a < b, got ({a}, {b})",
                              key="grid.domain", line=where("grid", "domain"))
        updates["domain"] = (a, b)

    raw = get("time", "dt")
    if raw is not None:
        updates["dt"] = _parse_float(raw, "dt", where("time", "dt"), positive=True)
        updates["dt_rule"] = None
    raw = get("time", "dt_rule")
    if raw is not None:
        if raw.lower() not in _DT_RULES:
            raise ConfigError(f"dt_rule must be one of {_DT_RULES}, got '{raw}'",
                              key="time.dt_rule", line=where("time", "dt_rule"))
        if "dt" in updates and updates["dt"] is not None:
            raise ConfigError("give either 'dt' or 'dt_rule', not both",
                              key="time.dt_rule", line=where("time", "dt_rule"))
        updates["dt_rule"] = raw.lower()
    raw = get("time", "t_end")
    if raw is not None:
        updates["t_end"] = _parse_float(raw, "time.t_end", where("time", "t_end"),
                                        positive=True)
    raw = get("time", "early_stop")
    if raw is not None:
        updates["early_stop"] = _parse_bool(raw, "time.early_stop",
                                            where("time", "early_stop"))

    raw = get("scheme", "kappa")
    if raw is not None:
        updates["kappa"] = _parse_float(raw, "scheme.kappa", where("scheme", "kappa"),
                                        positive=True)
    raw = get("scheme", "mean")
    if raw is not None:
        try:
            updates["mean"] = MeanKind.from_name(raw)
        except ValueError as exc:
            raise ConfigError(str(exc), key="scheme.mean", line=where("scheme", "mean"))
    else:
        logger.info("scheme.mean not specified; defaulting to 'harmonic'")
    for key in ("poisson_tol", "transport_tol"):
        raw = get("scheme", key)
        if raw is not None:
            updates[key] = _parse_float(raw, f"scheme.{key}", where("scheme", key),
                                        positive=True)
    for key in ("poisson_maxiter", "transport_maxiter"):
        raw = get("scheme", key)
        if raw is not None:
            updates[key] = _parse_int(raw, f"scheme.{key}", where("scheme", key),
                                      minimum=1)
    raw = get("scheme", "poisson_solver")
    if raw is not None:
        if raw.lower() not in ("cg", "fft"):
            raise ConfigError(f"poisson_solver must be 'cg' or 'fft', got '{raw}'",
                              key="scheme.poisson_solver",
                              line=where("scheme", "poisson_solver"))
        updates["poisson_solver"] = raw.lower()
    raw = get("scheme", "energy_fixed_charge")
    if raw is not None:
        if raw.lower() not in ("per-species", "once"):
            raise ConfigError("energy_fixed_charge must be 'per-species' or 'once'",
                              key="scheme.energy_fixed_charge",
                              line=where("scheme", "energy_fixed_charge"))
        updates["energy_fixed_charge_once"] = raw.lower() == "once"

    if parser.has_section("species"):
        species = []
        for name, raw in parser["species"].items():
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 2:
                raise ConfigError(f"species entry must be '<valence>, <initial>', "
                                  f"got '{raw}'", key=f"species.{name}",
                                  line=where("species", name))
            valence = _parse_float(parts[0], f"species.{name}", where("species", name))
            selector = parts[1].lower()
            if not selector.startswith("uniform:"):
                raise ConfigError(f"unknown initial-condition selector '{parts[1]}'",
                                  key=f"species.{name}", line=where("species", name))
            _parse_float(selector.split(":", 1)[1], f"species.{name}",
                         where("species", name), positive=True)
            species.append(SpeciesSpec(name, valence, selector))
        if not species:
            raise ConfigError("at least one species is required", key="species")
        updates["species"] = tuple(species)

    raw = get("charge", "rho_f")
    if raw is not None:
        kind = raw.lower()
        if kind not in ("none", "gaussian-quadrupole") and not kind.startswith("cosine:"):
            raise ConfigError(f"unknown rho_f selector '{raw}' (expected none, "
                              "gaussian-quadrupole or cosine:<amplitude>)",
                              key="charge.rho_f", line=where("charge", "rho_f"))
        if kind.startswith("cosine:"):
            _parse_float(kind.split(":", 1)[1], "charge.rho_f", where("charge", "rho_f"))
        updates["rho_f_kind"] = kind

    raw = get("mms", "n_list")
    if raw is not None:
        ns = tuple(_parse_int(p.strip(), "mms.n_list", where("mms", "n_list"), minimum=2)
                   for p in raw.split(","))
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"n_list must be strictly ascending, got {list(ns)}",
                              key="mms.n_list", line=where("mms", "n_list"))
        updates["mms_n_list"] = ns
    raw = get("mms", "means")
    if raw is not None:
        try:
            updates["mms_means"] = tuple(MeanKind.from_name(p) for p in raw.split(","))
        except ValueError as exc:
            raise ConfigError(str(exc), key="mms.means", line=where("mms", "means"))
    raw = get("mms", "t_end")
    if raw is not None:
        updates["mms_t_end"] = _parse_float(raw, "mms.t_end", where("mms", "t_end"),
                                            positive=True)

    raw = get("properties", "steps")
    if raw is not None:
        updates["properties_steps"] = _parse_int(raw, "properties.steps",
                                                 where("properties", "steps"), minimum=1)
    raw = get("properties", "random_trials")
    if raw is not None:
        updates["properties_trials"] = _parse_int(raw, "properties.random_trials",
                                                  where("properties", "random_trials"),
                                                  minimum=1)
    raw = get("verify", "size")
    if raw is not None:
        size = _parse_int(raw, "verify.size", where("verify", "size"), minimum=2)
        if size > 8:
            raise ConfigError(f"verify.size capped at 8, got {size}",
                              key="verify.size", line=where("verify", "size"))
        updates["verify_size"] = size
    raw = get("verify", "trials")
    if raw is not None:
        updates["verify_trials"] = _parse_int(raw, "verify.trials",
                                              where("verify", "trials"), minimum=1)

    return replace(cfg, **updates)


# -- problem assembly ---------------------------------------------------------

def build_rho_f(cfg: RunConfig, spec: GridSpec) -> CellField | None:
    kind = cfg.rho_f_kind
    if kind == "none":
        return None
    coords = spec.meshgrid()
    if kind == "gaussian-quadrupole":
        if spec.dim != 2:
            raise ConfigError("gaussian-quadrupole rho_f requires dim = 2",
                              key="charge.rho_f")
        x, y = coords

        def g(cx, cy):
            return np.exp(-100.0 * ((x - cx) ** 2 + (y - cy) ** 2))

        return CellField(spec, -g(0.25, 0.25) + g(0.25, 0.75)
                         + g(0.75, 0.25) - g(0.75, 0.75))
    amp = float(kind.split(":", 1)[1])
    a, b = spec.interval
    two_pi = 2.0 * math.pi / (b - a)
    vals = amp * np.cos(two_pi * (coords[0] - a))
    if spec.dim >= 2:
        vals = vals * np.sin(two_pi * (coords[1] - a))
    if spec.dim == 3:
        vals = vals * np.sin(two_pi * (coords[2] - a))
    return CellField(spec, vals)


def build_initial_concentration(spec: GridSpec, selector: str) -> CellField:
    value = float(selector.split(":", 1)[1])
    return CellField.full(spec, value)


def build_problem(cfg: RunConfig) -> tuple[SchemeConfig, State, CellField | None]:
    """Grid, scheme config and initial state (with the Poisson-consistent ψ⁰)."""
    spec = cfg.grid_spec()
    rho = build_rho_f(cfg, spec)
    species = tuple(Species(s.name, s.valence) for s in cfg.species)
    dt = cfg.resolved_dt(spec.h)
    scheme = SchemeConfig(kappa=cfg.kappa, dt=dt, mean_kind=cfg.mean,
                          species=species, rho_f=rho,
                          poisson_tol=cfg.poisson_tol,
                          transport_tol=cfg.transport_tol,
                          poisson_maxiter=cfg.poisson_maxiter,
                          transport_maxiter=cfg.transport_maxiter,
                          poisson_solver=cfg.poisson_solver,
                          fixed_charge_once=cfg.energy_fixed_charge_once)
    concentrations = tuple(build_initial_concentration(spec, s.initial)
                           for s in cfg.species)
    charge = scheme.rho_f_at(0.0, spec).values.copy()
    for sp, c in zip(species, concentrations):
        charge += sp.valence * c.values
    psi0 = solve_poisson(PoissonProblem(cfg.kappa, CellField(spec, charge)),
                         tol=cfg.poisson_tol,
                         maxiter=scheme.maxiter_for(spec, "poisson"),
                         solver=cfg.poisson_solver)
    return scheme, State(psi0, concentrations, 0.0), rho


def _metadata_lines(cfg: RunConfig, scheme: SchemeConfig, extra: dict) -> list[str]:
    spec = cfg.grid_spec()
    info = {
        "tool": f"slotpnp {__version__}",
        "mode": cfg.mode,
        "dim": spec.dim,
        "n": spec.n,
        "domain": f"{spec.interval[0]:.17g},{spec.interval[1]:.17g}",
        "h": f"{spec.h:.17g}",
        "dt": f"{scheme.dt:.17g}",
        "t_end": f"{cfg.t_end:.17g}",
        "kappa": f"{scheme.kappa:.17g}",
        "mean": scheme.mean_kind.value,
        "rho_f": cfg.rho_f_kind,
        "species": ";".join(f"{s.name}:{s.valence:.17g}" for s in cfg.species),
        "seed": cfg.seed,
        "early_stop": cfg.early_stop,
    }
    info.update(extra)
    return [f"# {k}={v}" for k, v in info.items()]


def make_report(state: State, prev: State, scheme: SchemeConfig,
                stats, rho: CellField | None) -> StepReport:
    valences = [sp.valence for sp in scheme.species]
    spec = state.spec
    charge = scheme.rho_f_at(state.time, spec).values.copy()
    for sp, c in zip(scheme.species, state.concentrations):
        charge += sp.valence * c.values
    residual = poisson_residual(state.psi, PoissonProblem(scheme.kappa,
                                                          CellField(spec, charge)))
    return StepReport(
        time=state.time,
        masses=tuple(total_mass(c) for c in state.concentrations),
        min_concentrations=tuple(float(c.values.min()) for c in state.concentrations),
        free_energy=free_energy(state, valences, rho,
                                fixed_charge_once=scheme.fixed_charge_once),
        dissipation=dissipation_rate(state.concentrations, prev.psi, scheme),
        tau_star=tau_star(state.concentrations, prev.psi, scheme),
        poisson_residual=residual,
        poisson_iterations=stats.poisson_iterations,
        transport_iterations=stats.transport_iterations,
    )


# -- simulate -----------------------------------------------------------------

def run_simulate(cfg: RunConfig) -> int:
    scheme, state, rho = build_problem(cfg)
    spec = state.spec
    steps = max(1, math.ceil(cfg.t_end / scheme.dt - 1e-9))
    path = cfg.out_path("simulate.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [sp.name for sp in scheme.species]
    valences = [sp.valence for sp in scheme.species]
    energy_prev = free_energy(state, valences, rho,
                              fixed_charge_once=scheme.fixed_charge_once)
    plateau = 0
    with path.open("w") as out:
        for line in _metadata_lines(cfg, scheme, {"steps_planned": steps}):
            out.write(line + "\n")
        out.write(StepReport.csv_header(names) + "\n")
        try:
            for k in range(1, steps + 1):
                prev = state
                state, stats = step_with_stats(state, scheme)
                energy = free_energy(state, valences, rho,
                                     fixed_charge_once=scheme.fixed_charge_once)
                if k % cfg.report_every == 0 or k == steps:
                    out.write(make_report(state, prev, scheme, stats, rho).csv_row()
                              + "\n")
                    out.flush()
                if abs(energy - energy_prev) < EARLY_STOP_SLACK * (1 + abs(energy_prev)):
                    plateau += 1
                else:
                    plateau = 0
                energy_prev = energy
                if cfg.early_stop and plateau >= EARLY_STOP_RUN:
                    if k % cfg.report_every != 0 and k != steps:
                        out.write(make_report(state, prev, scheme, stats, rho).csv_row()
                                  + "\n")
                    logger.info("energy plateau at step %d (t=%.6g); stopping early",
                                k, state.time)
                    break
        except NonConvergenceError as exc:
            out.flush()
            logger.error("%s", exc)
            return EXIT_SOLVER
    logger.info("wrote %s", path)
    return EXIT_OK


# -- mms ----------------------------------------------------------------------

def run_mms(cfg: RunConfig) -> int:
    case = build_paper_case()
    base = cfg.out_path("mms.csv")
    base.parent.mkdir(parents=True, exist_ok=True)
    solver_opts = dict(poisson_tol=cfg.poisson_tol, transport_tol=cfg.transport_tol,
                       poisson_solver=cfg.poisson_solver)
    try:
        for mean_kind in cfg.mms_means:
            path = base.with_name(f"{base.stem}_{mean_kind.value}{base.suffix}")
            if len(cfg.mms_n_list) == 1:
                n = cfg.mms_n_list[0]
                h = (case.interval[1] - case.interval[0]) / n
                res = run_case(case, n, dt=h * h, t_end=cfg.mms_t_end,
                               mean_kind=mean_kind, **solver_opts)
                rows = ["mean,h,dt,err_c1,ord_c1,err_c2,ord_c2,err_psi,ord_psi",
                        ",".join([mean_kind.value, f"{res.h:.17g}", f"{res.dt:.17g}",
                                  f"{res.linf_c[0]:.17g}", "",
                                  f"{res.linf_c[1]:.17g}", "",
                                  f"{res.linf_psi:.17g}", ""])]
                path.write_text("\n".join(rows) + "\n")
            else:
                table = convergence_table(case, cfg.mms_n_list, mean_kind,
                                          t_end=cfg.mms_t_end, **solver_opts)
                path.write_text(table.to_csv())
            logger.info("wrote %s", path)
    except NonConvergenceError as exc:
        logger.error("%s", exc)
        return EXIT_SOLVER
    return EXIT_OK


# -- properties ---------------------------------------------------------------

@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _random_smooth_field(spec: GridSpec, rng: np.random.Generator,
                         amplitude: float = 1.0) -> CellField:
    """Random low-frequency periodic field (a few Fourier modes per axis)."""
    coords = spec.meshgrid()
    a, b = spec.interval
    two_pi = 2.0 * math.pi / (b - a)
    vals = np.zeros(spec.shape)
    for _ in range(3):
        term = np.ones(spec.shape) * rng.uniform(-1.0, 1.0)
        for ax in range(spec.dim):
            k = rng.integers(1, 3)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            term = term * np.cos(two_pi * k * (coords[ax] - a) + phase)
        vals += term
    return CellField(spec, amplitude * vals)


def run_properties(cfg: RunConfig,
                   corrupt_step: Callable[[np.ndarray, int], np.ndarray] | None = None
                   ) -> tuple[int, list[PropertyResult]]:
    """Run the structure-preservation suite; returns (exit code, results).

    ``corrupt_step(values, k)`` is a fault-injection hook for the positivity
    check: it may return doctored concentration values for step ``k``, which
    are fed to the check (and only to it) in place of the real ones.
    """
    scheme, state, rho = build_problem(cfg)
    spec = state.spec
    rng = np.random.default_rng(cfg.seed)
    valences = [sp.valence for sp in scheme.species]
    results: list[PropertyResult] = []

    mass0 = [total_mass(c) for c in state.concentrations]
    energy = free_energy(state, valences, rho,
                         fixed_charge_once=scheme.fixed_charge_once)
    max_step_drift = 0.0
    max_run_drift = 0.0
    min_c = min(float(c.values.min()) for c in state.concentrations)
    min_c_cell = None
    energy_viol = 0
    diss_viol = 0
    diss_checked = 0
    max_energy_slack = -math.inf
    mass_prev = list(mass0)
    try:
        for k in range(1, cfg.properties_steps + 1):
            prev = state
            state, _ = step_with_stats(state, scheme)
            for i, c in enumerate(state.concentrations):
                m = total_mass(c)
                max_step_drift = max(max_step_drift, abs(m - mass_prev[i]) / abs(mass0[i]))
                max_run_drift = max(max_run_drift, abs(m - mass0[i]) / abs(mass0[i]))
                mass_prev[i] = m
            for c in state.concentrations:
                vals = c.values
                if corrupt_step is not None:
                    vals = corrupt_step(vals, k)
                local_min = float(vals.min())
                if local_min < min_c:
                    min_c = local_min
                    flat = int(np.argmin(vals))
                    min_c_cell = tuple(int(i) for i in
                                       np.unravel_index(flat, spec.shape))
            energy_next = free_energy(state, valences, rho,
                                      fixed_charge_once=scheme.fixed_charge_once)
            delta = energy_next - energy
            max_energy_slack = max(max_energy_slack, delta)
            if delta > ENERGY_SLACK * (1 + abs(energy)):
                energy_viol += 1
            rate = dissipation_rate(state.concentrations, prev.psi, scheme)
            bound = tau_star(state.concentrations, prev.psi, scheme)
            if scheme.dt <= bound:
                diss_checked += 1
                if delta > -0.5 * scheme.dt * rate + 1e-10:
                    diss_viol += 1
            energy = energy_next
    except PositivityViolationError as exc:
        results.append(PropertyResult(
            "positivity", False,
            f"species '{exc.species}' non-positive at cell {exc.cell_index}: "
            f"{exc.value:.6e}"))
        min_c = exc.value

    results.append(PropertyResult(
        "mass_conservation", max_step_drift <= MASS_STEP_TOL
        and max_run_drift <= MASS_RUN_TOL,
        f"max per-step drift {max_step_drift:.3e} (tol {MASS_STEP_TOL:.0e}), "
        f"run drift {max_run_drift:.3e} (tol {MASS_RUN_TOL:.0e})"))
    if not any(r.name == "positivity" for r in results):
        detail = f"min concentration {min_c:.6e}"
        if min_c <= 0.0 and min_c_cell is not None:
            detail += f" at cell {min_c_cell}"
        results.append(PropertyResult("positivity", min_c > 0.0, detail))
    results.append(PropertyResult(
        "energy_monotone", energy_viol == 0,
        f"{energy_viol} increases beyond slack; max ΔF = {max_energy_slack:.3e}"))
    results.append(PropertyResult(
        "conditional_dissipation", diss_viol == 0,
        f"{diss_viol} violations in {diss_checked} steps with dt <= tau*"))

    # operator identities on random data
    s_field = _random_smooth_field(spec, rng)
    harm = face_mobility(s_field, MeanKind.HARMONIC)
    exp_s = CellField(spec, np.exp(s_field.values))
    worst = max(float(np.max(np.abs(harm.components[ax] * avg_forward(exp_s, ax) - 1.0)))
                for ax in range(spec.dim))
    eps = np.finfo(float).eps
    results.append(PropertyResult(
        "harmonic_identity", worst <= 4 * eps,
        f"max |harmonic x avg(e^S) - 1| = {worst / eps:.2f} eps (tol 4 eps)"))

    s0 = rng.uniform(-3.0, 3.0, cfg.properties_trials)
    s1 = s0 + rng.uniform(-2.0, 2.0, cfg.properties_trials)
    m = {kind: pair_mean(s0, s1, kind) for kind in MeanKind}
    order_slack = max(
        float(np.max(m[MeanKind.HARMONIC] - m[MeanKind.ENTROPIC])),
        float(np.max(m[MeanKind.ENTROPIC] - m[MeanKind.GEOMETRIC])),
        float(np.max(m[MeanKind.GEOMETRIC] - m[MeanKind.ARITHMETIC])),
    )
    limit = 2 * eps * float(np.max(m[MeanKind.ARITHMETIC]))
    results.append(PropertyResult(
        "mean_ordering", order_slack <= limit,
        f"worst ordering violation {order_slack:.3e} (tol {limit:.3e})"))

    f = CellField(spec, rng.standard_normal(spec.shape))
    F = FaceField(spec, tuple(rng.standard_normal(spec.shape)
                              for _ in range(spec.dim)))
    lhs = inner(divergence(F), f)
    rhs_val = -face_inner(F, gradient(f))
    grad_f = gradient(f)
    scale = math.sqrt(face_inner(F, F)) * math.sqrt(face_inner(grad_f, grad_f))
    sbp = abs(lhs - rhs_val) / scale
    results.append(PropertyResult(
        "summation_by_parts", sbp <= 1e-13,
        f"relative defect {sbp:.3e} (tol 1e-13)"))

    code = EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY
    return code, results


# -- verify -------------------------------------------------------------------

def run_verify(cfg: RunConfig) -> tuple[int, list[PropertyResult]]:
    """Matrix-free vs dense-oracle equivalence on a small grid."""
    rng = np.random.default_rng(cfg.seed)
    results: list[PropertyResult] = []
    n = cfg.verify_size
    for dim in (1, 2):
        spec = GridSpec(dim, n)
        species = (Species("cation", 1.0), Species("anion", -1.0))
        for kind in MeanKind:
            scheme = SchemeConfig(kappa=1.0, dt=0.1, mean_kind=kind, species=species,
                                  poisson_tol=1e-12, transport_tol=1e-13)
            worst_apply = 0.0
            worst_step = 0.0
            for _ in range(cfg.verify_trials):
                psi = _random_smooth_field(spec, rng, amplitude=0.8)
                psi = CellField(spec, psi.values - psi.values.mean())
                dense = dense_transport_matrix(psi, species[0], scheme)
                g_vals = rng.uniform(0.5, 2.0, spec.shape)
                g_field = CellField(spec, g_vals)
                s_vals = species[0].valence * psi.values
                w = CellField(spec, np.exp(-s_vals))
                mob = face_mobility(CellField(spec, s_vals), kind)
                free = apply_transport_operator(w, mob, scheme.dt, g_field)
                ref = dense.apply(g_field)
                scale = float(np.max(np.abs(ref.values)))
                worst_apply = max(worst_apply,
                                  float(np.max(np.abs(free.values - ref.values)))
                                  / scale)
                # electroneutral pair: the Poisson step requires zero total charge
                c0_vals = rng.uniform(0.5, 1.5, spec.shape)
                delta = rng.uniform(-0.3, 0.3, spec.shape)
                delta -= delta.mean()
                c0 = CellField(spec, c0_vals)
                c1 = CellField(spec, c0_vals + delta)
                st = State(psi, (c0, c1), 0.0)
                fast, _ = step_with_stats(st, scheme)
                slow = dense_step(st, scheme)
                for a, b in zip(fast.concentrations + (fast.psi,),
                                slow.concentrations + (slow.psi,)):
                    worst_step = max(worst_step,
                                     float(np.max(np.abs(a.values - b.values))))
            results.append(PropertyResult(
                f"transport_apply_dim{dim}_{kind.value}", worst_apply <= 1e-13,
                f"max relative deviation {worst_apply:.3e} (tol 1e-13)"))
            results.append(PropertyResult(
                f"full_step_dim{dim}_{kind.value}", worst_step <= 1e-10,
                f"max linf deviation {worst_step:.3e} (tol 1e-10)"))
        worst_poisson = 0.0
        for _ in range(cfg.verify_trials):
            rhs_vals = rng.standard_normal(spec.shape)
            rhs = CellField(spec, rhs_vals - rhs_vals.mean())
            iterative = solve_poisson(PoissonProblem(1.0, rhs), tol=1e-12)
            direct = dense_poisson_solve(rhs, 1.0)
            worst_poisson = max(worst_poisson,
                                float(np.max(np.abs(iterative.values - direct.values))))
        results.append(PropertyResult(
            f"poisson_dim{dim}", worst_poisson <= 1e-10,
            f"max deviation vs dense pseudo-inverse {worst_poisson:.3e} (tol 1e-10)"))
    code = EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY
    return code, results


def _emit_report(cfg: RunConfig, results: list[PropertyResult], default_name: str) -> None:
    text = "\n".join(r.line() for r in results) + "\n"
    sys.stdout.write(text)
    if cfg.out:
        path = cfg.out_path(default_name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        logger.info("wrote %s", path)


# -- entry point ---------------------------------------------------------------

_CSV_HELP = """\
CSV schemas (fixed column order):
  simulate: t, mass_<species>..., min_c_<species>..., energy, dissipation,
            tau_star, poisson_residual, poisson_iters, iters_<species>...
  mms:      mean, h, dt, err_c1, ord_c1, err_c2, ord_c2, err_psi, ord_psi
            (one file per mobility mean: <out-stem>_<mean>.csv)
Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 property violation.
"""


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotpnp",
        description="Structure-preserving Poisson-Nernst-Planck solver "
                    "(Slotboom form).",
        epilog=_CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="INI configuration file (built-in preset when omitted)")
    parser.add_argument("--mode", choices=MODES, default=None,
                        help="override [run] mode")
    parser.add_argument("--mean", default=None,
                        help="override mobility mean (harmonic | geometric | "
                             "arithmetic | entropic)")
    parser.add_argument("--n", type=int, default=None, help="override grid cells per axis")
    parser.add_argument("--dt", type=float, default=None, help="override time step")
    parser.add_argument("--out", default=None, help="override output path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override seed for randomized checks")
    parser.add_argument("--verify-size", type=int, default=None,
                        help="override grid size for verify mode (<= 8)")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
    else:
        text = DEFAULT_CONFIG
    cfg = parse_config(text)
    updates: dict = {}
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.mean is not None:
        updates["mean"] = MeanKind.from_name(args.mean)
        updates["mms_means"] = (MeanKind.from_name(args.mean),)
    if args.n is not None:
        if args.n < 2:
            raise ConfigError(f"--n must be >= 2, got {args.n}", key="n")
        updates["n"] = args.n
    if args.dt is not None:
        if not args.dt > 0:
            raise ConfigError(f"--dt must be positive, got {args.dt}", key="dt")
        updates["dt"] = args.dt
        updates["dt_rule"] = None
    if args.out is not None:
        updates["out"] = args.out
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.verify_size is not None:
        if not 2 <= args.verify_size <= 8:
            raise ConfigError(f"--verify-size must be in [2, 8], got {args.verify_size}",
                              key="verify_size")
        updates["verify_size"] = args.verify_size
    return replace(cfg, **updates)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    try:
        if cfg.mode == "simulate":
            return run_simulate(cfg)
        if cfg.mode == "mms":
            return run_mms(cfg)
        if cfg.mode == "properties":
            code, results = run_properties(cfg)
            _emit_report(cfg, results, "properties.txt")
            return code
        code, results = run_verify(cfg)
        _emit_report(cfg, results, "verify.txt")
        return code
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except IncompatibleRhsError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        logger.error("%s", exc)
        return EXIT_SOLVER
    except PositivityViolationError as exc:
        logger.error("%s", exc)
        return EXIT_PROPERTY
    except SlotpnpError as exc:
        logger.error("%s", exc)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
