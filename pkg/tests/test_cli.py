import csv
import json
import subprocess
import sys

import pytest

from mtflock.cli import main
from mtflock.config import shipped_config
from mtflock.phase_density import DiagnosticsRow, load_snapshot

SMALL = """
[kernel]
r = 0.2
[grid]
Nx = 32
Nv = 32
[time]
t_end = 0.2
snapshot_stride = 5
[init]
name = two_bumps
wx = 0.2
[particles]
n = 200
seed = 3
dt = 0.05
[sweep]
r_list = 0.4, 0.2, 0
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_kinetic_outputs_are_byte_identical(tmp_path, small):
    for d in ("a", "b"):
        assert main(["kinetic", "--config", str(small), "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "diagnostics.csv")
    assert tuple(rows[0]) == DiagnosticsRow.columns()
    assert float(rows[-1][0]) == pytest.approx(0.2)
    snaps = sorted((tmp_path / "a").glob("snapshot_*.bin"))
    assert len(snaps) >= 2
    last = load_snapshot(snaps[-1])
    assert last.grid.shape == (32, 32)
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["command"] == "kinetic" and man["exit_status"] == 0
    assert len(man["config_sha256"]) == 64 and "diagnostics.csv" in man["artifacts"]
    # no temporary files left behind
    assert not list((tmp_path / "a").glob(".*"))


def test_check_on_a_shipped_config_passes(tmp_path, capsys):
    code = main(["check", "--config", str(shipped_config("sweep")), "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "FAIL" not in out and "PASS" in out
    rows = read_csv(tmp_path / "check.csv")
    assert rows[0] == ["check", "passed", "margin", "detail"]
    assert all(r[1] == "1" for r in rows[1:])


def test_missing_config_exits_2_with_usage(tmp_path, capsys):
    code = main(["kinetic", "--config", str(tmp_path / "nope.cfg")])
    err = capsys.readouterr().err
    assert code == 2
    assert err.startswith("usage:")
    assert "error,FileNotFoundError,2," in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mtflock", "sweep", "--config",
                           str(tmp_path / "missing.cfg")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "mtflock"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_config_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[kernel]\nr = -0.1\n")
    assert main(["kinetic", "--config", str(bad), "--out", str(tmp_path)]) == 2
    line = capsys.readouterr().err.strip().splitlines()[-1]
    kind, name, code, msg = next(csv.reader([line]))
    assert (kind, name, code) == ("error", "ValidationError", "2")
    assert "kernel.r" in msg and "line 2" in msg


def test_runtime_abort_exits_3_and_flushes_rows(tmp_path, capsys):
    cfg = tmp_path / "leak.cfg"
    # free transport for long enough that the bumps reach the x boundary
    cfg.write_text("[kernel]\nalignment = false\nlambda = 0\nr = 0\n[potential]\nkappa = 0\n"
                   "[grid]\nNx = 32\nNv = 32\n[time]\nt_end = 5\n")
    out = tmp_path / "out"
    assert main(["kinetic", "--config", str(cfg), "--out", str(out)]) == 3
    line = capsys.readouterr().err.strip().splitlines()[-1]
    assert line.startswith("error,MassLossExceeded,3,")
    rows = read_csv(out / "diagnostics.csv")
    assert len(rows) > 2
    assert json.loads((out / "manifest.json").read_text())["exit_status"] == 3


def test_unresolved_kernel_is_a_config_error(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("[kernel]\nr = 0.01\n[grid]\nNx = 32\nNv = 32\n")
    assert main(["kinetic", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "error,UnresolvedKernel,2," in capsys.readouterr().err


def test_sweep_writes_both_tables(tmp_path, small):
    code = main(["sweep", "--config", str(small), "--out", str(tmp_path), "--r", "0.4,0.2,0"])
    assert code in (0, 1)
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0] == ["r", "l1_rho_gap", "l1_j_gap", "product_gap", "energy_margin", "mt_sup",
                       "runtime_s"]
    assert [float(r[0]) for r in rows[1:]] == [0.4, 0.2, 0.0]
    checks = read_csv(tmp_path / "check.csv")
    assert {"l1_rho_gap_halving", "mt_uniform_constant"} <= {r[0] for r in checks[1:]}
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["exit_status"] == code


def test_sweep_rejects_bad_r_list(tmp_path, small):
    assert main(["sweep", "--config", str(small), "--out", str(tmp_path), "--r", "0.4,-1"]) == 2


@pytest.mark.parametrize("dim", [1, 2])
def test_particles_outputs(tmp_path, small, dim):
    cfg = tmp_path / "p.cfg"
    cfg.write_text(SMALL.replace("seed = 3", f"seed = 3\ndim = {dim}\nstride = 1"))
    out = tmp_path / "out"
    assert main(["particles", "--config", str(cfg), "--out", str(out)]) == 0
    traj = read_csv(out / "trajectory.csv")
    expect = ["t", "i", "x", "v"] if dim == 1 else ["t", "i", "x1", "x2", "v1", "v2"]
    assert traj[0] == expect
    # stride 1 records 5 states of 200 agents
    assert len(traj) - 1 == 200 * 5
    diag = read_csv(out / "diagnostics.csv")
    assert tuple(diag[0]) == DiagnosticsRow.columns()
    masses = {r[1] for r in diag[1:]}
    assert len(masses) == 1
    again = tmp_path / "again"
    main(["particles", "--config", str(cfg), "--out", str(again)])
    assert (again / "trajectory.csv").read_bytes() == (out / "trajectory.csv").read_bytes()
