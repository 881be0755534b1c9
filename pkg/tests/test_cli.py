import csv
import subprocess
import sys

import pytest

from adaptive_deploy import simcore
from adaptive_deploy.cli import main


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_validate_bad_rates_exits_2_and_writes_nothing(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["validate", "partition_ten", "--set", "partition.rates=[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.05,0.05]"])
    assert code == 2
    assert "rates" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_validate_ok_and_unknown_key(capsys):
    assert main(["validate", "two_robot_line"]) == 0
    assert main(["validate", "two_robot_line", "--set", "robots.colour=1"]) == 2
    assert main(["validate", "no_such_scenario"]) == 2


def test_run_writes_headers_and_seed_override(tmp_path):
    for name, seed in (("a", 4), ("b", 4), ("c", 5)):
        assert main(["run", "two_robot_line", "--seed", str(seed), "--set", "horizon=500",
                     "--out", str(tmp_path / name)]) == 0
    a, b, c = ((tmp_path / n / "trace.csv").read_text() for n in "abc")
    assert a == b and a != c
    assert a.startswith("# ") and "seed: 4" in a
    assert (tmp_path / "a" / "summary.csv").read_text().startswith("# ")


def test_sweep_load_grid(tmp_path):
    code = main(["sweep", "dtrp_stable", "--set", "horizon=4000", "--grid", "dtrp.load=0.3,0.5,0.7,0.9",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    sigma = [float(r["mean_system_time"]) for r in rows]
    assert sigma == sorted(sigma) and len(set(sigma)) == 4
    assert [float(r["load"]) for r in rows] == pytest.approx([0.3, 0.5, 0.7, 0.9])


def test_sweep_single_point_matches_run(tmp_path):
    assert main(["sweep", "two_robot_line", "--set", "horizon=800", "--grid", "seed=3",
                 "--out", str(tmp_path / "s")]) == 0
    row = _rows(tmp_path / "s" / "sweep.csv")[0]
    summary = simcore.run(simcore.load_scenario("two_robot_line"), {"horizon": 800}, seed=3).summary
    for k, v in summary.items():
        assert row[k] == simcore._fmt(v)


def test_sweep_rejects_bad_grids(tmp_path):
    assert main(["sweep", "two_robot_line", "--grid", "seed=", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "two_robot_line", "--grid", "a=1", "--grid", "b=1", "--grid", "seed=1",
                 "--out", str(tmp_path)]) == 2
    # one invalid point stops the sweep before anything runs
    assert main(["sweep", "two_robot_line", "--grid", "robots.count=2,0", "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()


def test_snapshot_files(tmp_path):
    assert main(["snapshot", "partition_ten", "--at", "200", "--out", str(tmp_path)]) == 0
    raster = tmp_path / "snapshot_00000200.raster"
    pos = tmp_path / "snapshot_00000200.positions"
    assert raster.exists() and pos.exists()
    assert raster.read_text().startswith("# ")
    body = [l for l in pos.read_text().splitlines() if not l.startswith("#")]
    assert len(body) == 10


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "adaptive_deploy.cli", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "two_robot_line" in out.stdout
