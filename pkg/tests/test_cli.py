import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from quartet_gauss import cli
from quartet_gauss.fsbs_m1 import M1Params, m1_energy_density
from quartet_gauss.majorana import read_matrix

RING = """
[lattice]
lx = 4
ly = 1
[model]
t = 1.0
u = 4.0
mu = 0.0
[quartets]
tiling = h-domino
[optimizer]
max_iters = 1000
seed = 3
[tasks]
run = {tasks}
[output]
dir = out
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_run_sandwich_and_outputs(tmp_path, capsys):
    cfg = write(tmp_path, RING.format(tasks="ed, ghft, optimize, observables"))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["E_ED"] <= summary["E_final"] <= summary["E_gHFT"]
    assert summary["N_tot"] == pytest.approx(4.0, abs=1e-6)
    for name in ("trajectory.csv", "spin_spin.csv", "structure_factor.csv", "af_order.csv",
                 "occupations.csv", "ed_sectors.csv"):
        assert (out / name).is_file()
    O = read_matrix(out / "state" / "O.txt")
    assert O.shape == (16, 16)
    assert json.loads(capsys.readouterr().out)["E_final"] == summary["E_final"]


def test_rerun_reproduces_summary(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ghft, optimize"))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "summary.json").read_text() == (tmp_path / "b" / "summary.json").read_text()


def test_overrides(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ghft"))
    assert cli.main(["run", "--config", str(cfg), "--seed", "11", "--max-iters", "3",
                     "--threads", "1", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["seed"] == 11
    assert summary["iterations_gHFT"] <= 3


def test_fsbs_task_matches_module(tmp_path):
    text = RING.format(tasks="fsbs-m1") + "[fsbs-m1]\nt = -1:1:3\nu = 0, 1\nmu = -1\n"
    cfg = write(tmp_path, text)
    assert cli.main(["run", "--config", str(cfg)]) == 0
    with open(tmp_path / "out" / "fsbs_m1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    for r in rows:
        s = m1_energy_density(M1Params(float(r["t"]), float(r["U"]), float(r["mu"])))
        assert float(r["E0"]) == s.E0 and int(r["x"]) == s.x_star and float(r["rho0"]) == s.rho_star


def test_fsbs_subcommand_stdout(capsys):
    assert cli.main(["fsbs-m1", "--t", "0", "--u", "1", "--mu", "-1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,U,mu,E0,x,rho0"
    assert lines[1].split(",")[3] == "-0.25"


def test_ed_subcommand(tmp_path, capsys):
    cfg = write(tmp_path, RING.format(tasks="ed"))
    assert cli.main(["ed", "--config", str(cfg)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "n_up,n_down,E0"
    assert len(rows) == 1 + 25


def test_pairing_subcommand_from_state(tmp_path, capsys):
    cfg = write(tmp_path, RING.format(tasks="ghft, optimize"))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    capsys.readouterr()
    code = cli.main(["pairing", "--config", str(cfg), "--state", str(tmp_path / "out" / "state")])
    assert code == 0
    res = json.loads(capsys.readouterr().out)
    assert res["M"] > 0 and res["N_tot"] == pytest.approx(4.0, abs=1e-6)


def test_state_path_feeds_pairing_task(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ghft, optimize"))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    text = RING.format(tasks="pairing").replace("dir = out", "dir = out2") + "[state]\npath = out/state\n"
    cfg2 = write(tmp_path, text, "cfg2.ini")
    assert cli.main(["run", "--config", str(cfg2)]) == 0
    assert "M" in json.loads((tmp_path / "out2" / "summary.json").read_text())


@pytest.mark.parametrize(
    "edit,needle",
    [
        (("u = 4.0", "u = four"), "model.u"),
        (("u = 4.0", "u = 4.0\nfoo = 1"), "model.foo"),
        (("lx = 4", "lx = 3"), "even Lx"),
        (("run = ghft", "run = ghft, dance"), "tasks.run"),
        (("run = ghft", "run = pairing"), "tasks.run"),
        (("[output]", "[outputs]"), "outputs"),
        (("seed = 3", "seed = 3\ndt0 = -1"), "optimizer"),
        (("tiling = h-domino", "tiling = file:missing.txt"), "quartets.tiling"),
    ],
)
def test_config_errors(tmp_path, capsys, edit, needle):
    cfg = write(tmp_path, RING.format(tasks="ghft").replace(*edit))
    assert cli.main(["validate", "--config", str(cfg)]) == 2
    assert needle in capsys.readouterr().err


def test_validate_ok(tmp_path, capsys):
    cfg = write(tmp_path, RING.format(tasks="ghft"))
    assert cli.main(["validate", "--config", str(cfg)]) == 0
    assert cli.main(["run", "--validate", "--config", str(cfg)]) == 0
    assert not (tmp_path / "out").exists()


def test_missing_config(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.ini")]) == 2


def test_ed_too_large_is_config_error(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ed").replace("lx = 4", "lx = 8"))
    assert cli.main(["run", "--config", str(cfg)]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_abort_exit_code(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ghft").replace("u = 4.0", "u = inf"))
    assert cli.main(["run", "--config", str(cfg)]) == 3


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, RING.format(tasks="ghft"))
    proc = subprocess.run(
        [sys.executable, "-m", "quartet_gauss", "validate", "--config", str(cfg)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "ok" in proc.stdout


def test_h4_model_kind(tmp_path):
    text = RING.format(tasks="ghft, optimize").replace("t = 1.0", "kind = h4\nt = 0.0").replace(
        "u = 4.0", "u = 1.5"
    )
    cfg = write(tmp_path, text)
    assert cli.main(["run", "--config", str(cfg)]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["E_final"] == pytest.approx(-3.0, abs=1e-6)
    assert np.allclose(np.abs(summary["beta"]), np.pi / 4, atol=1e-3)


def test_fsbs_subcommand_out_is_directory(tmp_path):
    assert cli.main(["fsbs-m1", "--t=-1:1:2", "--u", "2", "--mu", "0", "--out", str(tmp_path / "m1")]) == 0
    with open(tmp_path / "m1" / "fsbs_m1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "U", "mu", "E0", "x", "rho0"]
    assert all(not r[5].startswith("-") for r in rows[1:])
