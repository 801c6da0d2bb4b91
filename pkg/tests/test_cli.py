from __future__ import annotations

import json

from shadownbv.cli import main
from shadownbv.harness import read_summary
from shadownbv.world import bundled_scenarios


def test_list_scenarios(capsys):
    assert main(["--list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == bundled_scenarios()


def test_both_modes_one_seed(tmp_path, capsys):
    out = tmp_path / "res"
    code = main(["--scenario", "empty_room", "--mode", "both", "--runs", "1", "--out", str(out), "--quiet"])
    assert code == 0
    rows = read_summary(out / "summary.csv")
    assert [r["mode"] for r in rows] == ["rsc-cuboid", "raycast-baseline"]
    assert all(r["r"] == "0.4" for r in rows)
    assert len(list((out / "runs").glob("*_summary.json"))) == 2
    assert "summary:" in capsys.readouterr().out


def test_config_file_sets_flags_and_parameters(tmp_path):
    cfg = tmp_path / "c.json"
    out = tmp_path / "res"
    cfg.write_text(json.dumps({"scenario": "dead_end", "resolution": 0.4, "max-wall-time": 15, "lambda": 0.5, "out": str(out)}))
    assert main(["--config", str(cfg), "--quiet"]) == 0
    summary = json.loads(next((out / "runs").glob("*_summary.json")).read_text())
    assert summary["max_time_s"] == 15 and summary["truncated"] is True
    # command line flags win over the file
    assert main(["--config", str(cfg), "--seed", "4", "--quiet"]) == 0
    assert (out / "runs" / "dead_end_r0.4_rsc-cuboid_s4.csv").exists()


def test_no_recovery_flag(tmp_path):
    out = tmp_path / "res"
    assert main(["--scenario", "dead_end", "--no-recovery", "--max-wall-time", "30", "--out", str(out), "--quiet"]) == 0
    summary = json.loads(next((out / "runs").glob("*_summary.json")).read_text())
    assert summary["recovery"] is False


def test_unknown_config_key_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "empty_room", "warp_speed": 9}))
    assert main(["--config", str(cfg)]) == 2
    assert "warp_speed" in capsys.readouterr().err


def test_bad_values_are_config_errors(tmp_path):
    assert main(["--scenario", "empty_room", "--runs", "0", "--out", str(tmp_path)]) == 2
    assert main(["--scenario", "empty_room", "--resolution", "-1", "--out", str(tmp_path)]) == 2
    assert main(["--out", str(tmp_path)]) == 2
    assert main(["--config", str(tmp_path / "nope.json")]) == 2


def test_missing_scenario_gives_partial_exit(tmp_path):
    out = tmp_path / "res"
    code = main(["--scenario", str(tmp_path / "nope.scn"), "--scenario", "empty_room", "--resolution", "0.4", "--out", str(out), "--quiet"])
    assert code == 1
    text = (out / "summary.csv").read_text()
    assert "# flag" in text
