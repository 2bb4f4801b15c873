import json
import subprocess
import sys

import pytest

from pitbot import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_scenario(path, **fields):
    doc = {"profile": "flat_tube", "target_s": 60.0, "seed": 3}
    doc.update(fields)
    path.write_text(json.dumps(doc))
    return path


def test_budget_defaults(capsys):
    code, out, _ = run_cli(capsys, "budget")
    assert code == 0
    assert "range_100m_hops" in out and "5.1" in out
    assert "hover_endurance" in out and "DISCREPANCY" in out
    assert "tank_fits" in out and "true" in out


def test_budget_json_with_tables(capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "budget", "--json", "--technology", "--modes", "7,100", "--modes-csv", str(tmp_path / "m.csv")
    )
    assert code == 0
    doc = json.loads(out)
    assert {r["quantity"] for r in doc["budget"]} >= {"dv_capacity", "hover_endurance", "tank_volume"}
    assert len(doc["technology"]) == 4
    assert [m["hop_length_m"] for m in doc["modes"]] == [7.0, 100.0]
    assert (tmp_path / "m.csv").read_text().startswith("hop_length_m,")


def test_plan_hop_ceiling_example(capsys):
    code, out, _ = run_cli(capsys, "plan-hop", "--range", "100", "--gravity", "moon", "--ceiling", "10")
    assert code == 0
    assert "launch_angle_deg: 21.801" in out
    assert "dv_total_mps: 30.65" in out


def test_plan_hop_json_and_trajectory(capsys, tmp_path):
    traj = tmp_path / "arc.csv"
    code, out, _ = run_cli(capsys, "plan-hop", "--range", "100", "--json", "--trajectory", str(traj))
    assert code == 0
    doc = json.loads(out)
    assert doc["launch_angle_deg"] == pytest.approx(45.0, abs=1e-3)
    lines = traj.read_text().splitlines()
    assert lines[0] == "t_s,s_m,z_m,vs_mps,vz_mps"
    assert float(lines[-1].split(",")[1]) == pytest.approx(100.0)


def test_plan_hop_infeasible_exit_3(capsys):
    code, _, err = run_cli(capsys, "plan-hop", "--range", "100", "--ceiling", "0.4", "--margin", "0.5")
    assert code == 3
    assert "ceiling" in err


def test_plan_hop_bad_flag_value(capsys):
    code, _, err = run_cli(capsys, "plan-hop", "--range", "-5")
    assert code == 2
    assert "--range" in err


def test_unknown_flag_rejected(capsys):
    code, _, err = run_cli(capsys, "budget", "--frobnicate")
    assert code == 2
    assert "--frobnicate" in err


def test_localize_mc_requires_seed(capsys):
    code, _, err = run_cli(capsys, "localize-mc", "--legs", "5", "--trials", "2")
    assert code == 2
    assert "--seed" in err


def test_localize_mc_repeatable(capsys, tmp_path):
    args = ["localize-mc", "--legs", "30", "--trials", "20", "--seed", "42"]
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second
    assert "mean_relative_error_pct" in first and "growth_exponent" in first
    assert "calibrat" in first
    code, out, _ = run_cli(capsys, *args, "--json", "--channels", "laser", "--trace", str(tmp_path / "t.csv"))
    assert code == 0
    assert json.loads(out)["use_stereo"] is False
    assert (tmp_path / "t.csv").read_text().startswith("trial,leg,true_x")


def test_run_writes_outputs(capsys, tmp_path):
    scen = write_scenario(tmp_path / "flat.json")
    out_dir = tmp_path / "outdir"
    code, out, _ = run_cli(capsys, "run", "--scenario", str(scen), "--out", str(out_dir))
    assert code == 0
    assert "arrived: true" in out
    for name in ("report.json", "events.jsonl", "trajectory.csv", "coverage.csv"):
        assert (out_dir / name).exists()


def test_run_byte_identical(capsys, tmp_path):
    scen = write_scenario(tmp_path / "z.json", profile="zigzag_tube", target_s=80.0)
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        _, stdout, _ = run_cli(capsys, "run", "--scenario", str(scen), "--out", str(d))
        outs.append((stdout.replace(str(d), "D"), {p.name: p.read_bytes() for p in d.iterdir()}))
    assert outs[0] == outs[1]


def test_run_seed_override_changes_output(capsys, tmp_path):
    scen = write_scenario(tmp_path / "z.json", profile="zigzag_tube", target_s=80.0)
    run_cli(capsys, "run", "--scenario", str(scen), "--out", str(tmp_path / "a"))
    run_cli(capsys, "run", "--scenario", str(scen), "--seed", "99", "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "events.jsonl").read_bytes()
    b = (tmp_path / "b" / "events.jsonl").read_bytes()
    assert a != b


def test_run_missing_scenario_exit_2(capsys):
    code, _, err = run_cli(capsys, "run", "--scenario", "missing.json")
    assert code == 2
    assert "missing.json" in err


def test_run_invalid_scenario_exit_2(capsys, tmp_path):
    scen = write_scenario(tmp_path / "bad.json", target_s=5000.0)
    code, _, err = run_cli(capsys, "run", "--scenario", str(scen))
    assert code == 2
    assert "target_s" in err


def test_run_infeasible_exit_3(capsys, tmp_path):
    scen = write_scenario(
        tmp_path / "dry.json",
        target_s=500.0,
        mass={"dry_mass_kg": 2.0, "propellant_kg": 0.0},
        toggles={"rolling": False},
    )
    code, out, _ = run_cli(capsys, "run", "--scenario", str(scen))
    assert code == 3
    assert "arrived: false" in out


def test_presets_listing(capsys):
    code, out, _ = run_cli(capsys, "presets", "--json")
    assert code == 0
    doc = json.loads(out)
    assert [p["name"] for p in doc["terrain"]] == ["flat_tube", "mare_ingenii_pit", "zigzag_tube"]
    assert len(doc["technology"]) == 4


@pytest.mark.parametrize("sub", ["budget", "plan-hop", "localize-mc", "run", "presets"])
def test_help_lists_defaults(sub):
    proc = subprocess.run(
        [sys.executable, "-m", "pitbot", sub, "--help"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "usage:" in proc.stdout
    if sub in ("plan-hop", "localize-mc"):
        assert "(default:" in proc.stdout
