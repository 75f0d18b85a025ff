import os
from pathlib import Path

import numpy as np
import pytest

from sbpcht.cli import main
from sbpcht.config import ConfigError, load_config, resolved_items

BASE_CONFIG = """
[geometry]
map = curvilinear
nx = 12
ny = 12
degree = 2
left = -1 0 -1 1
right = 0 1.2 -1 1

[physics]
epsilon = 1.0
kappa = 1.0
advection = 0, 1
mms = true

[sat]
mode = manual
gamma1 = 60
gamma2_left = 0.05
gamma2_right = 0.05

[time]
scheme = be-ext2
dt = 2e-3
t_final = 0.02
n_loop = 2

[output]
dir = {outdir}
"""


@pytest.fixture
def config_file(tmp_path):
    def write(text=None, **fmt):
        body = (text or BASE_CONFIG).format(outdir=fmt.pop("outdir", tmp_path / "out"), **fmt)
        path = tmp_path / "run.cfg"
        path.write_text(body)
        return path

    return write


def test_load_config_roundtrip(config_file):
    cfg = load_config(config_file())
    assert cfg.geometry.nx == 12
    assert cfg.physics.advection == (0.0, 1.0)
    assert cfg.sat.mode == "manual"
    assert cfg.time.dt == 2e-3
    keys = dict(resolved_items(cfg))
    assert keys["geometry.map"] == "curvilinear"
    assert keys["time.scheme"] == "be-ext2"


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[geometry]\nresolution = 3\n")
    with pytest.raises(ConfigError, match="resolution"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[solvers]\nx = 1\n")
    with pytest.raises(ConfigError, match="solvers"):
        load_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert not (tmp_path / "out").exists()


def test_run_writes_artifacts_and_prints_error(config_file, tmp_path, capsys):
    code = main(["run", str(config_file())])
    assert code == 0
    out = capsys.readouterr().out
    assert "error =" in out
    assert (tmp_path / "out" / "solution_left.csv").is_file()
    assert (tmp_path / "out" / "solution_right.csv").is_file()


def test_strict_mode_names_violated_condition(config_file, tmp_path, capsys):
    text = BASE_CONFIG.replace("gamma1 = 60", "gamma1 = 1e-6").replace(
        "n_loop = 2", "n_loop = 2\nstrict = true"
    )
    code = main(["run", str(config_file(text))])
    assert code == 3
    err = capsys.readouterr().err
    assert "b1" in err or "a1" in err


def test_converge_csv_deterministic(config_file, tmp_path):
    cfg_path = config_file()
    assert main(["converge", str(cfg_path), "--grids", "9,12", "--workers", "1"]) == 0
    first = (tmp_path / "out" / "convergence.csv").read_bytes()
    assert main(["converge", str(cfg_path), "--grids", "9,12", "--workers", "1"]) == 0
    second = (tmp_path / "out" / "convergence.csv").read_bytes()
    assert first == second
    header = first.decode().splitlines()
    assert any(line.startswith("# geometry.map") for line in header)


def test_spectrum_outputs_csv_and_plot(config_file, tmp_path, capsys):
    code = main(["spectrum", str(config_file()), "--param", "dt",
                 "--values", "0.004,0.002"])
    assert code == 0
    assert (tmp_path / "out" / "spectrum_dt.csv").is_file()
    assert (tmp_path / "out" / "spectrum_dt.svg").is_file()
    body = (tmp_path / "out" / "spectrum_dt.csv").read_text()
    assert "spectral_radius" in body
    # condition-violating points are flagged in the CSV but the sweep continues
    assert body.count("\n") >= 3


def test_spectrum_empty_values_is_usage_error(config_file):
    assert main(["spectrum", str(config_file()), "--param", "dt", "--values", ""]) == 2


def test_params_reports_constants_and_conditions(config_file, capsys):
    assert main(["params", str(config_file())]) == 0
    out = capsys.readouterr().out
    for needle in ("rho_L", "rho_R", "gamma1", "dt_max", "(a1)", "(b2)"):
        assert needle in out


def test_outdir_env_override(config_file, tmp_path, monkeypatch):
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("SBPCHT_OUTDIR", str(override))
    assert main(["run", str(config_file())]) == 0
    assert (override / "solution_left.csv").is_file()
