import csv
import json

import numpy as np
import pytest

from lagmhd.cli import main
from lagmhd.snapshot import read_snapshot, write_snapshot

SMALL = """
[grid]
L = 8.0
N = 129

[initial]
kind = "{kind}"
u_amp = 0.5
w_amp = [0.3, 0.2]
h_amp = [1.0, 0.5]

[stepping]
dt_max = 1e-2
t_end = 0.1
output_every = 2
{extra}
"""


def _scenario(tmp_path, name, kind="gaussian_vacuum", extra=""):
    path = tmp_path / f"{name}.toml"
    path.write_text(SMALL.format(kind=kind, extra=extra))
    return path


def _report(out, name):
    return json.loads((out / name / "report.json").read_text())


def test_all_zero_run_has_zero_energy(tmp_path):
    assert main(["run", "all_zero", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "all_zero" / "diagnostics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(float(r["energy"]) == 0.0 for r in rows)
    assert _report(tmp_path, "all_zero")["ok"] is True


def test_run_writes_artifacts_under_env_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MHD_OUT_DIR", str(tmp_path / "env"))
    cfg = _scenario(tmp_path, "small")
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "env" / "small"
    report = _report(tmp_path / "env", "small")
    assert report["checks"]["energy_drift"]["pass"]
    assert report["checks"]["J_lower_bound"]["pass"]
    assert report["config"]["stepping"]["cfl"] == 0.5
    assert len(list((out / "snapshots").glob("*.bin"))) == report["outputs"]
    assert "resolved config" in (out / "run.log").read_text()


def test_failed_check_exits_3(tmp_path):
    cfg = _scenario(tmp_path, "strict", extra="[verify]\nenergy_tol = 1e-12\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 3
    assert not _report(tmp_path, "strict")["checks"]["energy_drift"]["pass"]


def test_blow_up_exits_2(tmp_path):
    path = tmp_path / "steep.toml"
    path.write_text("""
[grid]
L = 4.0
N = 129
[initial]
kind = "positive_floor"
P_amp = 50.0
P_width = 0.2
h_amp = [20.0, 0.0]
h_width = 0.2
[stepping]
dt_max = 10.0
cfl = 1.0
t_end = 100.0
""")
    assert main(["run", str(path), "--out", str(tmp_path)]) == 2
    assert _report(tmp_path, "steep")["failure"]


def test_config_error_exits_1(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[params]\nkappa = 1.0\n[grid]\nL = 1.0\nN = 5\n[initial]\nkind = 'all_zero'\n")
    assert main(["run", str(path), "--out", str(tmp_path)]) == 1


def test_verify_matches_run_report(tmp_path, capsys):
    cfg = _scenario(tmp_path, "pair")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 0
    snaps = sorted((tmp_path / "pair" / "snapshots").glob("*.bin"))
    capsys.readouterr()
    assert main(["verify", *map(str, snaps)]) == 0
    verified = json.loads(capsys.readouterr().out)
    assert verified["final"] == _report(tmp_path, "pair")["final"]


def test_verify_rest_snapshots_have_zero_residuals(tmp_path, capsys):
    assert main(["run", "all_zero", "--out", str(tmp_path)]) == 0
    snaps = sorted((tmp_path / "all_zero" / "snapshots").glob("*.bin"))[:3]
    capsys.readouterr()
    assert main(["verify", *map(str, snaps)]) == 0
    final = json.loads(capsys.readouterr().out)["final"]
    assert all(final[k] == 0.0 for k in ("residual_h2", "residual_F", "residual_G"))


@pytest.mark.parametrize("corrupt", [np.nan, -1.0])
def test_verify_detects_tampered_pressure(tmp_path, corrupt):
    cfg = _scenario(tmp_path, "tamper")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 0
    snaps = sorted((tmp_path / "tamper" / "snapshots").glob("*.bin"))[:2]
    state, params = read_snapshot(snaps[1])
    state.P[40] = corrupt
    write_snapshot(snaps[1], state, params)
    assert main(["verify", *map(str, snaps)]) != 0


def test_verify_rejects_mixed_runs(tmp_path):
    a = _scenario(tmp_path, "a")
    b = _scenario(tmp_path, "b", kind="positive_floor")
    for cfg in (a, b):
        assert main(["run", str(cfg), "--out", str(tmp_path)]) == 0
    snaps = [tmp_path / "a" / "snapshots" / "snap_00000.bin",
             tmp_path / "b" / "snapshots" / "snap_00001.bin"]
    assert main(["verify", *map(str, snaps)]) == 1


def test_converge_zero_case_is_floor(capsys):
    code = main(["converge", "zero", "--grids", "17,33,65", "--dts", "4e-2,2e-2,1e-2",
                 "--spatial-dt", "1e-2", "--temporal-nodes", "33", "--workers", "2"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["spatial"]["verdict"] == "floor"


def test_converge_needs_three_levels(caplog):
    assert main(["converge", "default", "--grids", "16"]) == 1
    assert "need >= 3 levels" in caplog.text


def test_diagnostics_csv_is_reproducible(tmp_path):
    cfg = _scenario(tmp_path, "repeat")
    outs = []
    for k in range(2):
        assert main(["run", str(cfg), "--out", str(tmp_path / str(k))]) == 0
        outs.append((tmp_path / str(k) / "repeat" / "diagnostics.csv").read_bytes())
    assert outs[0] == outs[1]
