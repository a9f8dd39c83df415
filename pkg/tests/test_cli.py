import csv
import json

import pytest

from viscophase import __version__
from viscophase.cli import main
from viscophase.energetics import ENERGY_COLUMNS
from viscophase.relenergy import RELENERGY_COLUMNS, SWEEP_COLUMNS

SMALL = """
[grid]
nx = 16
ny = 16
[scheme]
dt = 0.001
t_end = 0.01
cadence = 2
[output]
formats = ["csv", "snapshot"]
"""


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def test_validate_default(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS  bounds[m]" in out


def test_validate_reports_failures(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[model.coefficients]\nn = 0.1\n")
    assert main(["validate", str(p), "--out", str(tmp_path / "v")]) == 1
    report = json.loads((tmp_path / "v" / "validation.json").read_text())
    assert report["passed"] is False
    assert "FAIL  bounds[n]" in capsys.readouterr().out


def test_check_suite(tmp_path, capsys):
    assert main(["check", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 8 and "FAIL" not in out
    assert json.loads((tmp_path / "check.json").read_text())["passed"] is True


def test_run_writes_outputs(tmp_path, small_config, capsys):
    out = tmp_path / "run"
    assert main(["run", str(small_config), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "energy.csv").open()))
    assert rows[0] == ENERGY_COLUMNS and len(rows) == 7
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == __version__ and manifest["wall_time_s"] >= 0
    assert "nx = 16" in manifest["config"]
    assert (out / "final" / "phi.vpsf").exists()


def test_run_is_reproducible(tmp_path, small_config):
    for name in ("a", "b"):
        assert main(["run", str(small_config), "--out", str(tmp_path / name), "--seed", "3"]) == 0
    assert (tmp_path / "a" / "energy.csv").read_bytes() == (tmp_path / "b" / "energy.csv").read_bytes()


def test_overrides(tmp_path, small_config):
    out = tmp_path / "o"
    assert main(["run", str(small_config), "--out", str(out), "--dt", "0.005"]) == 0
    assert "dt = 0.005" in json.loads((out / "manifest.json").read_text())["config"]


def test_twin_with_zero_eps(tmp_path, small_config, capsys):
    out = tmp_path / "twin"
    assert main(["twin", str(small_config), "--eps", "0", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "relenergy.csv").open()))
    assert rows[0] == RELENERGY_COLUMNS
    assert all(float(r[RELENERGY_COLUMNS.index("e_rel_total")]) <= 1e-24 for r in rows[1:])
    summary = json.loads((out / "manifest.json").read_text())["summary"]
    assert summary["E_rel_final"] <= 1e-24
    assert "E_rel(T)=0.000000e+00" in capsys.readouterr().out


def test_sweep(tmp_path, small_config):
    out = tmp_path / "sweep"
    code = main(["sweep", str(small_config), "--out", str(out), "--jobs", "1",
                 "--eps", "1e-2", "1e-3", "1e-4"])
    assert code == 0
    rows = list(csv.reader((out / "sweep.csv").open()))
    assert rows[0] == SWEEP_COLUMNS and len(rows) == 4
    assert 1.9 <= float(rows[1][-1]) <= 2.1


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("grid.nx = 7\n")
    out = tmp_path / "diag"
    assert main(["run", str(p), "--out", str(out)]) == 2
    diag = json.loads((out / "diagnostic.json").read_text())
    assert diag["error"] == "config" and diag["path"] == "grid.nx"
    assert "config error" in capsys.readouterr().err


def test_syntax_error_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[grid\n")
    assert main(["twin", str(p), "--out", str(tmp_path / "d")]) == 2
    assert json.loads((tmp_path / "d" / "diagnostic.json").read_text())["line"] == 1


def test_numerical_abort_exit_code(tmp_path, small_config):
    p = tmp_path / "blow.toml"
    p.write_text(SMALL + "[experiment]\nnoise = 50.0\n")
    out = tmp_path / "blow"
    assert main(["run", str(p), "--out", str(out)]) == 3
    diag = json.loads((out / "diagnostic.json").read_text())
    assert diag["error"] == "numerical" and "reason" in diag["report"]


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
