import csv
import json
import subprocess
import sys

import pytest

from uvqnhe.cli import main, preset_path, run_experiment
from uvqnhe.config import ExperimentConfig, build_config, load_table, parse_override
from uvqnhe.errors import ConfigError


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_override_literals():
    assert parse_override("n_sites=5") == ("n_sites", 5)
    assert parse_override("shots=[100, 200]") == ("shots", [100, 200])
    assert parse_override("mode=sampler") == ("mode", "sampler")
    assert parse_override("compare=true") == ("compare", True)
    with pytest.raises(ConfigError):
        parse_override("n_sites")


def test_build_config_defaults_and_overrides():
    cfg = build_config("vqnhe", {"n_sites": 4}, ["epochs=3", "lr=0.1"])
    assert cfg.epochs == 3 and cfg.lr == 0.1 and cfg.resolved_trials == 20
    assert build_config("variance-audit", {"n_sites": 3, "shots": [100]}).resolved_trials == 200
    assert isinstance(cfg, ExperimentConfig)


@pytest.mark.parametrize("table, overrides, field", [
    ({}, [], "n_sites"),
    ({"n_sites": 4, "colour": "red"}, [], "colour"),
    ({"n_sites": 1}, [], "n_sites"),
    ({"n_sites": 17}, [], "n_sites"),
    ({"n_sites": 4}, ["mode=quantum"], "mode"),
    ({"n_sites": 4, "kind": "vqe"}, [], "kind"),
    ({"n_sites": 4}, ["shots=0"], "shots"),
])
def test_build_config_errors(table, overrides, field):
    with pytest.raises(ConfigError) as exc:
        build_config("vqnhe", table, overrides)
    assert exc.value.field == field


def test_shot_kinds_need_shots():
    with pytest.raises(ConfigError) as exc:
        build_config("shot-sweep", {"n_sites": 4})
    assert exc.value.field == "shots"


def test_nested_table_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_table(_write(tmp_path, "n_sites = 3\n[extra]\na = 1\n"))


def test_all_presets_parse():
    for name in ("fig2", "fig3", "fig4a", "fig4b", "fig4c"):
        table = load_table(preset_path(name))
        build_config(table["kind"], table)


def test_missing_n_sites_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, 'mode = "exact"\n')
    assert main(["vqe", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "n_sites" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["vqe", "--config", str(tmp_path / "absent.cfg")]) == 2
    assert main(["vqe", "--config", str(_write(tmp_path, "n_sites = 3\n")), "--override", "bogus=1"]) == 2


def test_tfim_exact_manifest(tmp_path):
    out = tmp_path / "o"
    assert main(["tfim-exact", "--config", str(_write(tmp_path, "n_sites = 2\n")), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["E_exact"] == pytest.approx(-5**0.5, abs=1e-9)
    assert manifest["config"]["n_sites"] == 2


def test_internal_fault_exit_three(tmp_path, monkeypatch):
    import uvqnhe.cli as cli

    def boom(*_a, **_k):
        raise RuntimeError("injected")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["tfim-exact", "--config", str(_write(tmp_path, "n_sites = 2\n"))]) == 3


def test_vqnhe_run_writes_all_artifacts(tmp_path):
    cfg = build_config("vqnhe", {"n_sites": 3, "epochs": 5, "budget": 300})
    manifest = run_experiment(cfg, tmp_path)
    for name in manifest.artifacts:
        assert (tmp_path / name).exists()
    traj = _rows(tmp_path / "trajectory.csv")
    assert list(traj[0]) == ["epoch", "loss"] and len(traj) == 6
    land = _rows(tmp_path / "landscape.csv")
    assert list(land[0]) == ["bitstring", "network_output", "observed_in_ansatz"] and len(land) == 8


def test_single_trial_single_shot_sweep(tmp_path):
    cfg = build_config("shot-sweep", {"n_sites": 3, "shots": [50], "trials": 1, "epochs": 3, "budget": 200})
    run_experiment(cfg, tmp_path)
    rows = _rows(tmp_path / "sweep.csv")
    assert len(rows) == 1
    assert list(rows[0]) == ["shots", "trial", "final_energy", "model_sigma", "coverage_ok"]


def test_variance_audit_columns(tmp_path):
    cfg = build_config("variance-audit", {"n_sites": 3, "shots": [200, 800], "trials": 20, "epochs": 3,
                                          "budget": 200})
    run_experiment(cfg, tmp_path)
    rows = _rows(tmp_path / "variance_audit.csv")
    assert list(rows[0]) == ["N", "model_var", "empirical_var", "gamma_f", "delta_f"]
    assert [int(r["N"]) for r in rows] == [200, 800]
    summary = json.loads((tmp_path / "variance_summary.json").read_text())
    assert summary


def test_rerun_is_byte_identical(tmp_path):
    table = {"n_sites": 3, "shots": [100], "trials": 3, "epochs": 4, "budget": 200, "network": "uvqnhe"}
    for sub in ("a", "b"):
        run_experiment(build_config("shot-sweep", table), tmp_path / sub)
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_console_script_entry(tmp_path):
    cfg = _write(tmp_path, "n_sites = 3\n")
    proc = subprocess.run([sys.executable, "-m", "uvqnhe.cli", "tfim-exact", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("E_exact=")
