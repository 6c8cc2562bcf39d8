import json

import numpy as np
import pytest

from lpstab import cli


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def test_verify_passes(tmp_path):
    assert run(tmp_path, "verify", "--seed", "7", "--set", "n_states=10") == 0
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    assert rep["passed"]
    assert (tmp_path / "verify.csv").read_text().startswith("# lpstab")


def test_verify_requires_seed(tmp_path):
    assert run(tmp_path, "verify") == 2


def test_bad_config(tmp_path):
    assert run(tmp_path, "satellite", "--set", "bogus=1") == 2
    assert run(tmp_path, "satellite", "--set", "k=abc") == 2
    assert run(tmp_path, "mhd", "--set", "gamma=1.5") == 2
    assert run(tmp_path, "satellite", "--set", "k") == 2
    assert run(tmp_path) == 2
    assert run(tmp_path, "--scenario", "nope") == 2
    assert run(tmp_path, "satellite", "--scenario", "mhd") == 2


def test_empty_grid(tmp_path):
    assert run(tmp_path, "sweep", "--set", "grid=") == 2
    assert run(tmp_path, "sweep", "--set", "grid=1:0:0.1") == 2


@pytest.mark.parametrize("param,lo,hi", [("k", 1.4, 1.6), ("gamma", 0.6, 0.7)])
def test_sweeps(tmp_path, param, lo, hi):
    assert run(tmp_path, "sweep", "--set", f"parameter={param}") == 0
    rep = json.loads((tmp_path / "sweep_report.json").read_text())
    assert lo <= rep["metrics"]["bracket_low"] and rep["metrics"]["bracket_high"] <= hi + 1e-12
    lines = (tmp_path / f"sweep_{param}.csv").read_text().splitlines()
    assert lines[0].startswith("#") and any(l.startswith(param + ",") for l in lines)


def test_satellite_short_run_and_reproducible(tmp_path):
    args = ["satellite", "--set", "horizon=2", "--set", "step=0.01", "--seed", "3"]
    assert run(tmp_path / "a", *args) == 1  # axis distance not reached in 2 time units
    assert run(tmp_path / "b", *args) == 1
    a = (tmp_path / "a" / "satellite_controlled.csv").read_bytes()
    assert a == (tmp_path / "b" / "satellite_controlled.csv").read_bytes()
    text = a.decode()
    assert "# k: 2.0" in text and "# seed: 3" in text
    header = [l for l in text.splitlines() if not l.startswith("#")][0].split(",")
    assert header[:5] == ["t", "z0", "z1", "z2", "z3"] and "lyapunov" in header


def test_shorthand_and_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# short run\nhorizon = 1\nstep=0.01\n")
    # too short for the k = 0 instability to show
    assert run(tmp_path, "satellite", "--config", str(cfg), "--k", "0") == 0
    rep = json.loads((tmp_path / "satellite_report.json").read_text())
    assert rep["params"]["k"] == 0.0 and "perturbation_bounded" in rep["verdicts"]


def test_mhd_small_run_writes_snapshots(tmp_path):
    code = run(tmp_path, "mhd", "--set", "Nx=4", "--set", "Ny=4", "--set", "horizon=0.2",
               "--set", "step=0.01", "--plot")
    assert code in (0, 1)
    head = (tmp_path / "mhd_controlled_domega_final.txt").read_text().splitlines()[0].split()
    assert head[:2] == ["4", "4"] and float(head[-1]) == pytest.approx(0.2)
    assert list(tmp_path.glob("*.svg"))


def test_parse_grid():
    assert np.allclose(cli.parse_grid("0:1:0.5"), [0, 0.5, 1])
    assert np.allclose(cli.parse_grid("1,2"), [1, 2])
    assert len(cli.parse_grid("0:3:0.1")) == 31
