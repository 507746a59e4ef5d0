import csv
import json

import numpy as np
import pytest

from src.app import EXIT_BAD_CONFIG, EXIT_OK, EXIT_RUN_FAILED, main
from src.harness import (
    ConfigError,
    InvariantBreach,
    RunPoint,
    expand_grid,
    fit_scaling,
    fit_window,
    load_config,
    parse_config,
    resolve_output_root,
    resolve_workers,
    run_name,
    run_single,
    run_sweep,
    tables_report,
    write_index,
)
from src.redfield import GeneratorError
from src.settings import ENV_OUTPUT_ROOT, ENV_WORKERS, INDEX_FILE_NAME, TRACE_TOL

SMALL_RUN = """
preset = "u1_vacuum"
reference = "ideal"

[model]
kind = "u1"
L = 2

[protection]
kind = "quadratic"
V = 0.5

[noise]
gamma = [0.01, 0.02]
beta = 1.0

[integrator]
grid = "uniform"
t_max = 1.0
n_samples = 5
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_RUN)
    return path


def test_defaults_are_valid():
    config = parse_config({})
    assert config.model.kind == "u1"
    assert expand_grid(config) == [RunPoint(gamma=0.1, V=0.0, beta=1.0)]


def test_load_toml(small_config):
    config = load_config(small_config)
    assert config.model.L == 2
    assert config.protection.V == [0.5]
    assert len(expand_grid(config)) == 2


def test_load_rejects_bad_toml(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[model\nkind = 'u1'\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize(
    "data, fragment",
    [
        ({"noise": {"gamma": [-0.1]}}, "gamma"),
        ({"noise": {"beta": [2.5]}}, "beta"),
        ({"noise": {"gamma": []}}, "gamma"),
        ({"protection": {"V": [1.0]}}, "protection"),
        ({"preset": "z2_cdw"}, "preset"),
        ({"preset": "0101"}, "preset"),
        ({"model": {"kind": "u1", "L": 6}, "protection": {"kind": "linear"}, "preset": "u1_vacuum"}, "compliant_L4"),
        ({"protection": {"kind": "linear", "source": "pseudo"}}, "pseudo"),
        ({"model": {"L": 3}}, "even L"),
    ],
)
def test_invalid_configs(data, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(data)


def test_run_name():
    config = parse_config({"protection": {"kind": "quadratic", "V": [2.0]}, "lam": 0.1})
    name = run_name(config, RunPoint(gamma=0.05, V=2.0, beta=1.0))
    assert name == "u1_L4_u1_vacuum_g0.05_V2_b1_quad_lam0.1"


def test_environment_overrides(monkeypatch, tmp_path):
    config = parse_config({"workers": 3, "output": {"root": "elsewhere"}})
    monkeypatch.delenv(ENV_WORKERS, raising=False)
    monkeypatch.delenv(ENV_OUTPUT_ROOT, raising=False)
    assert resolve_workers(config) == 3
    assert str(resolve_output_root(config)) == "elsewhere"
    monkeypatch.setenv(ENV_WORKERS, "2")
    monkeypatch.setenv(ENV_OUTPUT_ROOT, str(tmp_path))
    assert resolve_workers(config) == 2
    assert resolve_output_root(config) == tmp_path
    monkeypatch.setenv(ENV_WORKERS, "many")
    with pytest.raises(ConfigError):
        resolve_workers(config)


def test_run_outputs(small_config, tmp_path):
    config = load_config(small_config)
    results, index = run_single(config, tmp_path / "out")
    assert len(results) == 2

    with open(results[0].csv_path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == [
        "time", "violation", "condensate", "imbalance_avg", "fidelity", "entropy_midchain",
        "trace_error", "min_eig", "condensate_ideal", "condensate_deviation", "fidelity_ideal", "fidelity_deviation",
    ]
    assert len(rows) == 6
    assert float(rows[1][1]) == pytest.approx(0.0, abs=1e-12)
    assert float(rows[-1][1]) > 0

    metadata = json.loads(results[0].metadata_path.read_text())
    assert metadata["violation_max_mixing"] == pytest.approx(1.0)
    assert metadata["omega_cutoff"] == pytest.approx(0.01)
    assert metadata["config"]["noise"]["gamma"] == [0.01]
    assert "passed" in metadata["validity"]
    assert metadata["generator_check"]["seed"] == 0
    assert metadata["generator_check"]["trace_residual"] < 1e-12
    assert metadata["generator_check"]["hermiticity_residual"] < TRACE_TOL

    with open(index, newline="") as f:
        assert [row["status"] for row in csv.DictReader(f)] == ["ok", "ok"]


def test_metadata_reruns_identically(small_config, tmp_path):
    config = load_config(small_config)
    first, _ = run_single(config, tmp_path / "first")
    rerun = load_config(first[0].metadata_path)
    second, _ = run_single(rerun, tmp_path / "second")
    assert len(second) == 1
    assert first[0].csv_path.read_bytes() == second[0].csv_path.read_bytes()


def test_sweep_writes_index(small_config, tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_WORKERS, raising=False)
    results, index = run_sweep(load_config(small_config), tmp_path)
    assert index == tmp_path / INDEX_FILE_NAME
    assert len(results) == 2


def _synthetic_sweep(tmp_path, strengths, beta_true, gamma=0.1):
    rows = []
    times = np.linspace(0, 6, 61)
    for V in strengths:
        name = f"run_V{V:g}"
        slope = 1e-3 * V ** (-beta_true)
        with open(tmp_path / f"{name}.csv", "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["time", "violation"])
            for t in times:
                writer.writerow([repr(t), repr(slope * t)])
        rows.append(
            {
                "name": name, "status": "ok", "model": "z2", "L": 4, "preset": "z2_cdw", "protection": "linear",
                "sequence": "z2_geometric", "source": "pseudo", "noise": "power_law", "gamma": gamma, "V": V,
                "beta": 1.0, "lam": 0.0, "csv": f"{name}.csv", "metadata": f"{name}.json", "validity_passed": True,
                "max_ratio": 0.01, "violation_max_mixing": 2.0, "early_step_time": "",
            }
        )
    return write_index(tmp_path, rows)


def test_fit_scaling_recovers_exponent(tmp_path):
    index = _synthetic_sweep(tmp_path, [1.0, 2.0, 4.0, 8.0], beta_true=0.8)
    fit = fit_scaling(index)
    assert fit.varied == "V"
    assert fit.beta_hat == pytest.approx(0.8, abs=1e-6)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.windows[0] == (0.5, 5.0)


def test_fit_scaling_needs_enough_runs(tmp_path):
    index = _synthetic_sweep(tmp_path, [1.0, 2.0], beta_true=1.0)
    with pytest.raises(ConfigError):
        fit_scaling(index)


def test_fit_window_stops_at_plateau():
    times = np.linspace(0, 10, 101)
    violation = 0.1 * times
    assert fit_window(times, violation, eps_mm=2.0, early_step_time=0.8) == (0.8, 2.0)


def test_tables_report():
    report = tables_report()
    assert "Sector weights of u1_domainwall_x" in report
    assert "1/16" in report and "1/8" in report


def test_cli_exit_codes(small_config, tmp_path):
    assert main(["validate", str(small_config)]) == EXIT_OK
    bad = tmp_path / "bad.toml"
    bad.write_text("[noise]\ngamma = -1.0\n")
    assert main(["validate", str(bad)]) == EXIT_BAD_CONFIG
    assert main(["tables"]) == EXIT_OK


def _failing_generator(*args, **kwargs):
    raise GeneratorError("no eigenoperators")


def test_sweep_records_run_failures(small_config, tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_WORKERS, raising=False)
    monkeypatch.setattr("src.harness.assemble_generator", _failing_generator)
    with pytest.raises(InvariantBreach, match="2 sweep run"):
        run_sweep(load_config(small_config), tmp_path)
    with open(tmp_path / INDEX_FILE_NAME, newline="") as f:
        statuses = [row["status"] for row in csv.DictReader(f)]
    assert statuses == ["failed: GeneratorError", "failed: GeneratorError"]


def test_cli_reports_run_failure(small_config, tmp_path, monkeypatch):
    monkeypatch.setattr("src.harness.assemble_generator", _failing_generator)
    assert main(["run", str(small_config), "--output", str(tmp_path / "out")]) == EXIT_RUN_FAILED
