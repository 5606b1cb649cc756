import numpy as np
import pytest

from slotpnp.cli import (DEFAULT_CONFIG, EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY,
                         RunConfig, build_problem, build_rho_f, main,
                         parse_config, run_properties, run_verify)
from slotpnp.errors import ConfigError
from slotpnp.grid import CellField, GridSpec, mean
from slotpnp.mobility import MeanKind

PROPERTIES_SNIPPET = """\
[run]
mode = properties
seed = 99

[grid]
dim = 2
n = 24

[time]
dt_rule = h_over_10
t_end = 5.0

[scheme]
kappa = 1e-3
mean = entropic

[species]
cation = +1, uniform:0.1
anion = -1, uniform:0.1

[charge]
rho_f = gaussian-quadrupole

[properties]
steps = 40
random_trials = 50
"""


def test_default_config_is_the_properties_preset():
    cfg = parse_config(DEFAULT_CONFIG)
    assert cfg.dim == 2
    assert cfg.n == 80
    assert cfg.dt_rule == "h_over_10"
    assert cfg.kappa == pytest.approx(1e-3)
    assert cfg.mean is MeanKind.ENTROPIC
    assert cfg.rho_f_kind == "gaussian-quadrupole"
    assert [s.name for s in cfg.species] == ["cation", "anion"]
    assert cfg.resolved_dt(1.0 / 80) == pytest.approx(1.0 / 800)


def test_negative_dt_rejected_naming_key():
    with pytest.raises(ConfigError) as err:
        parse_config("[time]\ndt = -1\n")
    assert "dt" in str(err.value)
    assert err.value.line == 2


def test_unknown_key_rejected_with_line():
    text = "[grid]\nn = 16\nhmm = 3\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert "hmm" in str(err.value)
    assert err.value.line == 3


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        parse_config("[turbo]\nx = 1\n")


def test_missing_mean_defaults_to_harmonic(caplog):
    import logging

    with caplog.at_level(logging.INFO, logger="slotpnp"):
        cfg = parse_config("[grid]\nn = 16\n")
    assert cfg.mean is MeanKind.HARMONIC
    assert any("harmonic" in rec.message for rec in caplog.records)


def test_dt_and_rule_conflict():
    with pytest.raises(ConfigError):
        parse_config("[time]\ndt = 0.1\ndt_rule = h_over_10\n")


def test_bad_selector_and_bad_rho():
    with pytest.raises(ConfigError):
        parse_config("[species]\nc = 1, gaussian:0.1\n")
    with pytest.raises(ConfigError):
        parse_config("[charge]\nrho_f = blob\n")


def test_mms_n_list_out_of_order_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[mms]\nn_list = 50, 40\n")
    assert "ascending" in str(err.value)


def test_verify_size_cap():
    with pytest.raises(ConfigError):
        parse_config("[verify]\nsize = 12\n")


def test_build_rho_f_presets():
    cfg = parse_config("[charge]\nrho_f = none\n")
    assert build_rho_f(cfg, GridSpec(2, 8)) is None
    quad = build_rho_f(parse_config(DEFAULT_CONFIG), GridSpec(2, 40))
    assert abs(mean(quad)) <= 1e-14  # quadrupole is discretely neutral
    cos_cfg = parse_config("[charge]\nrho_f = cosine:0.5\n")
    cos_field = build_rho_f(cos_cfg, GridSpec(2, 16))
    assert abs(mean(cos_field)) <= 1e-14
    # centers sit h/2 off the cosine peak, so the sampled max is just under amp
    assert 0.45 <= np.max(np.abs(cos_field.values)) <= 0.5


def test_build_problem_initial_potential_consistent():
    cfg = parse_config(PROPERTIES_SNIPPET)
    scheme, state, rho = build_problem(cfg)
    assert state.time == 0.0
    assert abs(mean(state.psi)) <= 1e-12
    assert scheme.dt == pytest.approx((1 / 24) / 10)
    # psi0 solves the discrete Poisson equation from the initial charge
    from slotpnp.poisson import PoissonProblem, poisson_residual
    from slotpnp.grid import norm

    charge = rho.values + state.concentrations[0].values - state.concentrations[1].values
    res = poisson_residual(state.psi, PoissonProblem(scheme.kappa,
                                                     CellField(state.spec, charge)))
    assert res <= 1e-8 * norm(CellField(state.spec, charge), "l2")


def test_run_properties_passes_and_reports(capsys):
    cfg = parse_config(PROPERTIES_SNIPPET)
    code, results = run_properties(cfg)
    assert code == EXIT_OK
    names = {r.name for r in results}
    assert {"mass_conservation", "positivity", "energy_monotone",
            "conditional_dissipation", "harmonic_identity", "mean_ordering",
            "summation_by_parts"} <= names
    assert all(r.passed for r in results)


def test_run_properties_fault_injection_locates_cell():
    cfg = parse_config(PROPERTIES_SNIPPET)

    def corrupt(values, k):
        if k != 3:
            return values
        doctored = values.copy()
        doctored[2, 5] = -1e-3
        return doctored

    code, results = run_properties(cfg, corrupt_step=corrupt)
    assert code == EXIT_PROPERTY
    positivity = next(r for r in results if r.name == "positivity")
    assert not positivity.passed
    assert "(2, 5)" in positivity.detail


def test_run_verify_default_passes():
    cfg = RunConfig(mode="verify", verify_size=6, verify_trials=5)
    code, results = run_verify(cfg)
    assert code == EXIT_OK
    assert all(r.passed for r in results)


def test_main_exit_codes(tmp_path, monkeypatch):
    bad = tmp_path / "bad.ini"
    bad.write_text("[time]\ndt = -2\n")
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    good = tmp_path / "props.ini"
    good.write_text(PROPERTIES_SNIPPET)
    monkeypatch.chdir(tmp_path)
    assert main(["--config", str(good)]) == EXIT_OK


def test_simulate_csv_deterministic_and_steady(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = """\
[run]
mode = simulate
out = steady.csv
report_every = 2

[grid]
dim = 2
n = 8

[time]
dt = 0.05
t_end = 0.5
early_stop = false

[scheme]
kappa = 1.0
mean = harmonic

[species]
cation = +1, uniform:0.1
anion = -1, uniform:0.1

[charge]
rho_f = none
"""
    path = tmp_path / "steady.ini"
    path.write_text(config)
    assert main(["--config", str(path)]) == EXIT_OK
    first = (tmp_path / "steady.csv").read_bytes()
    rows = [line for line in first.decode().splitlines()
            if line and not line.startswith("#")]
    header, data = rows[0], rows[1:]
    assert len(data) == 5  # every 2nd of 10 steps
    # uniform neutral initial data: every monitored column but t is identical
    tails = {row.split(",", 1)[1] for row in data}
    assert len(tails) == 1
    # byte-identical rerun
    assert main(["--config", str(path)]) == EXIT_OK
    assert (tmp_path / "steady.csv").read_bytes() == first


def test_simulate_relaxation_csv_columns(tmp_path, monkeypatch):
    # scaled fixed-charge relaxation: energy falls, min c stays positive,
    # mass stays constant, in the emitted CSV itself
    monkeypatch.chdir(tmp_path)
    config = """\
[run]
mode = simulate
out = relax.csv
report_every = 5

[grid]
dim = 2
n = 40

[time]
dt_rule = h_over_10
t_end = 0.5
early_stop = false

[scheme]
kappa = 1e-3
mean = entropic

[species]
cation = +1, uniform:0.1
anion = -1, uniform:0.1

[charge]
rho_f = gaussian-quadrupole
"""
    path = tmp_path / "relax.ini"
    path.write_text(config)
    assert main(["--config", str(path)]) == EXIT_OK
    lines = [l for l in (tmp_path / "relax.csv").read_text().splitlines()
             if l and not l.startswith("#")]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    assert len(rows) == 40
    col = {name: i for i, name in enumerate(header)}
    energies = [float(r[col["energy"]]) for r in rows]
    assert all(b <= a + 1e-10 * (1 + abs(a)) for a, b in zip(energies, energies[1:]))
    for name in ("min_c_cation", "min_c_anion"):
        assert all(float(r[col[name]]) > 0 for r in rows)
    for name in ("mass_cation", "mass_anion"):
        masses = [float(r[col[name]]) for r in rows]
        assert max(abs(m - 0.1) / 0.1 for m in masses) <= 1e-12


def test_outdir_env_redirects(tmp_path, monkeypatch):
    outdir = tmp_path / "redirected"
    monkeypatch.setenv("SLOTPNP_OUTDIR", str(outdir))
    monkeypatch.chdir(tmp_path)
    path = tmp_path / "p.ini"
    path.write_text(PROPERTIES_SNIPPET.replace("mode = properties",
                                               "mode = properties\nout = report.txt"))
    assert main(["--config", str(path)]) == EXIT_OK
    assert (outdir / "report.txt").exists()


def test_mms_single_n_emits_empty_orders(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = """\
[run]
mode = mms
out = single.csv

[mms]
n_list = 12
means = harmonic
t_end = 0.02
"""
    path = tmp_path / "mms.ini"
    path.write_text(config)
    assert main(["--config", str(path)]) == EXIT_OK
    lines = (tmp_path / "single_harmonic.csv").read_text().strip().splitlines()
    assert len(lines) == 2
    cells = lines[1].split(",")
    assert cells[0] == "harmonic"
    assert cells[4] == "" and cells[6] == "" and cells[8] == ""


def test_solver_failure_exits_3_with_partial_csv(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = """\
[run]
mode = simulate
out = fail.csv

[grid]
dim = 2
n = 16

[time]
dt_rule = h_over_10
t_end = 1.0

[scheme]
kappa = 1e-3
mean = entropic
transport_maxiter = 2

[species]
cation = +1, uniform:0.1
anion = -1, uniform:0.1

[charge]
rho_f = gaussian-quadrupole
"""
    path = tmp_path / "fail.ini"
    path.write_text(config)
    assert main(["--config", str(path)]) == 3
    text = (tmp_path / "fail.csv").read_text()
    assert "t,mass_cation" in text  # header flushed before the failure


def test_help_documents_csv_schema():
    from slotpnp.cli import _build_arg_parser

    help_text = _build_arg_parser().format_help()
    assert "mass_<species>" in help_text
    assert "err_c1" in help_text
    assert "Exit codes" in help_text


def test_cli_flag_overrides(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["--mode", "verify", "--verify-size", "4", "--seed", "7",
                 "--out", "v.txt"])
    assert code == EXIT_OK
    assert (tmp_path / "v.txt").exists()
