import json
import subprocess
import sys

import pytest

from flexduplex.cli import main

SMALL = {"inter_ratios": [4], "intra_ratios": [3, 7], "solver": {"n_max": 2, "n_iter": 20}}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scn.json"
    assert main(["gen", "--inter", "6", "--intra", "3", "8", "--seed", "2", "-o", str(path)]) == 0
    return path


def test_gen_writes_scenario(scenario_file):
    doc = json.loads(scenario_file.read_text())
    assert doc["schema_version"] == 1 and len(doc["services"]) == 4


@pytest.mark.parametrize("proto", ["fix", "dtdd", "fp", "safp", "rmdi"])
def test_solve_each_protocol(scenario_file, tmp_path, proto):
    out = tmp_path / "out.json"
    assert main(["solve", str(scenario_file), "--protocol", proto, "--nmax", "2", "--niter", "30", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["protocol"] == proto and "trace" not in doc


def test_solve_trace_flag(scenario_file, capsys):
    assert main(["solve", str(scenario_file), "--protocol", "safp", "--nmax", "1", "--trace"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["trace"] and doc["trace"][0]["delta"] is None


def test_flags_override_config_file(scenario_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"solver": {"n_max": 1, "alpha": 1e300}}))
    main(["solve", str(scenario_file), "--protocol", "rmdi", "--config", str(cfg), "--trace"])
    from_file = json.loads(capsys.readouterr().out)
    assert {r["restart"] for r in from_file["trace"]} == {0}
    assert from_file["muted"] == {}
    main(["solve", str(scenario_file), "--protocol", "rmdi", "--config", str(cfg), "--nmax", "3", "--trace"])
    flagged = json.loads(capsys.readouterr().out)
    assert {r["restart"] for r in flagged["trace"]} == {0, 1, 2}


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "missing.json"],
        ["solve", "{scn}", "--eps", "0"],
        ["solve", "{scn}", "--nmax", "0"],
        ["solve", "{scn}", "--config", "{bad}"],
        ["aggregate", "{scn}"],
    ],
)
def test_invalid_input_exit_code(argv, scenario_file, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    argv = [a.format(scn=scenario_file, bad=bad) for a in argv]
    assert main(argv) != 0


def test_invalid_scenario_content(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"grid": {"w_t": 0}, "bs_positions_m": [], "ue_positions_m": [], "services": []}))
    assert main(["solve", str(path)]) != 0


def test_sweep_and_aggregate(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**SMALL, "runs": 5}))
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--runs", "1", "--out", str(out), "--seed", "3"]) == 0
    lines = (out / "records.csv").read_text().splitlines()
    assert lines[0] == "protocol,inter,intra1,intra2,run,D,rho,converged"
    assert len(lines) == 1 + 4 * 5
    saved = json.loads((out / "config.json").read_text())
    assert saved["runs"] == 1 and saved["seed"] == 3
    capsys.readouterr()
    agg = tmp_path / "agg.json"
    assert main(["aggregate", str(out / "records.csv"), "-o", str(agg)]) == 0
    assert json.loads(agg.read_text()) == json.loads((out / "aggregates.json").read_text())
    assert "safp" in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "flexduplex.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
