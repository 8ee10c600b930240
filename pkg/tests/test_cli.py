import json
from pathlib import Path

import pytest

from coopnav.cli import EXIT_ABORTED, EXIT_INVALID, EXIT_IO, EXIT_OK, PRESETS, main, parse_grid
from coopnav.world import Scenario, ScenarioError, VehicleState, VehicleTask, dump_scenario, load_scenario

MINIMAL = """\
version: 1
vehicles:
  - source: {x_m: 20, y_m: 100, psi_rad: 0}
    destination: {x_m: 40, y_m: 100}
landmarks:
  - {id: L0, x_m: 30, y_m: 110}
measurement_noise: false
process_noise: false
init_pos_std_m: 0
init_heading_std_rad: 0
horizon_s: 1
"""


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(MINIMAL)
    return p


def test_run_writes_traces(scenario_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario_file), "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["aborted"] is False
    assert summary["total_path_length_m"] == pytest.approx(17.0)
    assert (out / "true_states.csv").exists() and (out / "manifest.json").exists()


def test_validate_ok_and_invalid(scenario_file, tmp_path, capsys):
    assert main(["validate", str(scenario_file)]) == EXIT_OK
    assert "1 vehicles" in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL + "sensor_rnage: 40\n")
    assert main(["validate", str(bad)]) == EXIT_INVALID
    assert "sensor_rnage" in capsys.readouterr().err


def test_unknown_preset_is_invalid(capsys):
    assert main(["validate", "preset:nope"]) == EXIT_INVALID
    assert main(["validate", "preset:cooperation"]) == EXIT_OK


def test_missing_file_is_io_error(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "missing.yaml")]) == EXIT_IO
    assert "missing.yaml" in capsys.readouterr().err


def test_unwritable_output_is_io_error(scenario_file, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code = main(["run", "--scenario", str(scenario_file), "--out", str(blocker / "x"), "--max-steps", "2"])
    assert code == EXIT_IO


def test_aborted_run_exit_code(tmp_path):
    sc = Scenario(
        vehicles=(VehicleTask(VehicleState(10.0, 10.0, 0.0), (15.0, 15.0)),),
        arena=(0.0, 20.0, 0.0, 20.0),
        init_pos_std=200.0,
        seed=1,
    )
    p = tmp_path / "div.yaml"
    p.write_text(dump_scenario(sc))
    assert main(["run", "--scenario", str(p), "--estimator", "ekf", "--max-steps", "20"]) == EXIT_ABORTED


def test_sweep_writes_summary(scenario_file, tmp_path, capsys):
    out = tmp_path / "sw"
    code = main(
        ["sweep", "--scenario", str(scenario_file), "--grid", "eta=2,3", "--seeds", "2", "--max-steps", "5", "--out", str(out)]
    )
    assert code == EXIT_OK
    doc = json.loads((out / "sweep.json").read_text())
    assert [d["params"] for d in doc] == [{"eta": 2.0}, {"eta": 3.0}]
    assert all(len(d["runs"]) == 2 for d in doc)
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_sweep_bad_grid_is_invalid(scenario_file):
    assert main(["sweep", "--scenario", str(scenario_file), "--grid", "warp=1"]) == EXIT_INVALID


def test_oracle_command(capsys):
    assert main(["oracle", "--draws", "10"]) == EXIT_OK
    assert capsys.readouterr().out.count("PASS") == 5


def test_parse_grid():
    g = parse_grid(["tau_h=1,5", "N_E=10,20", "process_noise=off"])
    assert g == {"horizon": [1.0, 5.0], "mhe_horizon": [10, 20], "process_noise": [False]}
    assert parse_grid([]) == {}
    for bad in (["tau_h"], ["tau_h="], ["N_E=1.5"], ["nope=1"]):
        with pytest.raises(ScenarioError):
            parse_grid(bad)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_shipped_scenarios_match_presets(name):
    path = Path(__file__).resolve().parent.parent / "scenarios" / f"{name}.yaml"
    assert load_scenario(path.read_text()) == PRESETS[name]()
