import json
import subprocess
import sys

import numpy as np
import pytest

CONFIG = """
problem = cubic
nu = 1.0
n = 6
T_span = 0.05
step = 0.002
grid.M = 4
snapshots.kind = fd
snapshots.tau = T
rom.r = 3
sampling.density = 64
horizon.periods = 1
"""


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "podrom.harness.cli", *args],
        check=True, capture_output=True, text=True,
    )


@pytest.fixture(scope="module")
def rundir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_run")
    (out / "run.cfg").write_text(CONFIG)
    return out


def test_staged_pipeline(rundir):
    cfgpath = str(rundir / "run.cfg")
    out = str(rundir)
    run_cli("fom-run", "--config", cfgpath, "--out", out)
    assert (rundir / "traj.npz").exists()
    assert (rundir / "setup.json").exists()

    run_cli("snapshots", "--config", cfgpath, "--out", out)
    grid = np.loadtxt(rundir / "grid.txt")
    assert grid.size == 5
    assert (rundir / "snaps.npz").exists()

    run_cli("pod", "--config", cfgpath, "--out", out)
    eigs = (rundir / "eigs.csv").read_text().splitlines()
    assert eigs[0] == "k,lambda,sigma,tail"

    run_cli("rom-run", "--config", cfgpath, "--out", out)
    assert (rundir / "rom_traj.csv").exists()

    run_cli("errors", "--config", cfgpath, "--out", out)
    lines = (rundir / "errors.csv").read_text().splitlines()
    assert lines[1] == "t,l2_rom,h1_rom,l2_proj,h1_proj,l2_rom_vs_proj,h1_rom_vs_proj"
    assert len(lines) == 2 + 65

    run_cli("audit-bounds", "--config", cfgpath, "--out", out)
    audit = (rundir / "audit.csv").read_text().splitlines()
    assert audit[0] == "name,lhs,rhs,pass"
    assert all(ln.endswith(",1") for ln in audit[1:])


def test_experiment_and_sweep(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG)
    out = tmp_path / "exp"
    proc = run_cli("experiment", "--config", str(cfg), "--out", str(out))
    rec = json.loads(proc.stdout)
    assert rec["M"] == 4 and rec["r"] == 3

    out2 = tmp_path / "sweep"
    proc = run_cli("sweep", "--config", str(cfg), "--out", str(out2),
                   "--M", "2,4")
    assert (out2 / "summary.csv").exists()
    assert (out2 / "eigs_M2.csv").exists()
    assert (out2 / "errors_M4.csv").exists()
    rows = [ln for ln in (out2 / "summary.csv").read_text().splitlines()
            if not ln.startswith(("#", "M,"))]
    assert len(rows) == 2


def test_unknown_command_fails(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(CONFIG)
    with pytest.raises(subprocess.CalledProcessError):
        run_cli("no-such-command", "--config", str(cfg), "--out", str(tmp_path))
