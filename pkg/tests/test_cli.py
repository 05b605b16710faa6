import csv
import math
import json

import numpy as np
import pytest

from conftest import REF_TEMP_STABLE
from oracles import phase_crossings, shoelace_area
from thermotool.cli import bench_pipeline, main
from thermotool.config import ConfigError, load_config, parse_config
from thermotool.sysid import generate_prbs
from thermotool.thermal_sim import ScheduleEntry, Trajectory, simulate, write_schedule

REFERENCE = {
    "schema_version": 1,
    "units": "kelvin",
    "thermal": {"a_matrix": [[0.95]], "b_matrix": [[0.5]], "sample_period_s": 0.1,
                "source_hotspot_map": [0]},
    "sources": [{"name": "cluster", "voltage_V": 1.0, "pc_W": 40.0,
                 "leakage": {"i_gate_A": 0.0, "kappa1": 1.25e-4, "kappa2_K": -800.0}}],
}

PAIR = {
    "thermal": {"a_matrix": [[0.90, 0.03], [0.02, 0.92]],
                "b_matrix": [[0.40, 0.05], [0.03, 0.35]]},
    "sources": [
        {"voltage_V": 1.0, "pc_W": 10.0, "leakage": {"kappa1": 1.2e-4, "kappa2_K": -800.0}},
        {"voltage_V": 0.9, "pc_W": 8.0, "leakage": {"kappa1": 0.8e-4, "kappa2_K": -850.0}},
    ],
}


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)
    return _write


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip().startswith("{") else out


def test_analyze_reference(capsys, write_json):
    code, rep = run_json(capsys, ["analyze", "--config", write_json(REFERENCE)])
    assert code == 0
    assert rep["schema_version"] == 1
    assert rep["variant"] == "two_fixed_points"
    assert rep["temp_stable_K"] == pytest.approx(438.92, abs=0.01)
    assert rep["margin"] == pytest.approx(0.532836, abs=1e-5)


def test_analyze_runaway_exit_code(capsys, write_json):
    code, rep = run_json(capsys, ["analyze", "--config", write_json(REFERENCE), "--pc", "60"])
    assert code == 2
    assert rep["variant"] == "runaway"
    assert rep["margin"] == pytest.approx(-0.326246, abs=1e-6)


def test_missing_config_exit_1(tmp_path, capsys):
    assert main(["analyze", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_usage_exit_1(capsys):
    assert main(["no-such-command"]) == 1
    assert main([]) == 1


def test_invalid_config_rejected(write_json, capsys):
    bad = json.loads(json.dumps(REFERENCE))
    bad["thermal"]["a_matrix"] = [[1.2]]
    assert main(["analyze", "--config", write_json(bad)]) == 1
    bad = json.loads(json.dumps(REFERENCE))
    bad["sources"][0]["leakage"]["kappa2_K"] = "cold"
    assert main(["analyze", "--config", write_json(bad)]) == 1
    assert "kappa2_K" in capsys.readouterr().err


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="columns"):
        parse_config({**PAIR, "sources": PAIR["sources"][:1]})
    both = json.loads(json.dumps(REFERENCE))
    both["sources"][0]["c_sw_F"] = 1e-9
    with pytest.raises(ConfigError, match="either"):
        parse_config(both)
    with pytest.raises(ConfigError):
        parse_config({"thermal": {}, "sources": []})


def test_celsius_config_round_trip(capsys, write_json):
    cfg = json.loads(json.dumps(REFERENCE))
    cfg["units"] = "celsius"
    code, rep = run_json(capsys, ["analyze", "--config", write_json(cfg)])
    assert code == 0
    assert rep["temp_stable_C"] == pytest.approx(REF_TEMP_STABLE - 273.15, abs=1e-9)
    assert rep["temp_stable_K"] == pytest.approx(REF_TEMP_STABLE, abs=1e-9)
    code, rep = run_json(capsys, ["safe-power", "--config", write_json(cfg),
                                  "--tmax", str(REF_TEMP_STABLE - 273.15)])
    assert rep["pc_star"] == pytest.approx(40.0, rel=1e-9)


def test_reference_config_file_loads():
    cfg = load_config("configs/reference.json")
    assert cfg.thermal.n_hotspots == 1 and cfg.sources[0].voltage == 1.0


def test_fitted_siso_in_config(capsys, write_json):
    cfg = {**PAIR, "siso": [{"a": 0.93, "b": 0.45}, {"a": 0.94, "b": 0.38}]}
    code, rep = run_json(capsys, ["analyze", "--config", write_json(cfg), "--hotspot", "1"])
    assert code == 0
    assert rep["a"] == 0.94 and rep["pc_W"] == pytest.approx(18.0)


def test_simulate_reference(tmp_path, capsys, write_json):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--config", write_json(REFERENCE), "--steps", "10000",
                 "--out", str(out)])
    assert code == 0
    traj = Trajectory.from_csv(out)
    assert traj.temps[-1, 0] == pytest.approx(438.92, abs=0.01)


def test_simulate_stdout_header(capsys, write_json):
    assert main(["simulate", "--config", write_json(PAIR), "--steps", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t_s,T1_K,T2_K,P1_W,P2_W"
    assert len(lines) == 5


def test_simulate_zero_steps(write_json, capsys):
    assert main(["simulate", "--config", write_json(REFERENCE), "--steps", "0"]) == 1


def test_simulate_runaway_flushes_partial(tmp_path, capsys, write_json):
    hot = json.loads(json.dumps(REFERENCE))
    hot["sources"][0]["pc_W"] = 60.0
    out = tmp_path / "hot.csv"
    code = main(["simulate", "--config", write_json(hot), "--steps", "100000", "--out", str(out)])
    assert code == 2
    traj = Trajectory.from_csv(out)
    assert traj.temps[-1, 0] > 2000.0 and len(traj) < 100_001
    assert "runaway" in capsys.readouterr().err


def hysteresis_trace(tmp_path, write_json, low=20.0, high=40.0, hold=1500):
    sched = tmp_path / "two_phase.csv"
    write_schedule(sched, [ScheduleEntry(0, 0, low), ScheduleEntry(hold, 0, high),
                           ScheduleEntry(2 * hold, 0, low)])
    out = tmp_path / "loop.csv"
    code = main(["simulate", "--config", write_json(REFERENCE), "--schedule", str(sched),
                 "--steps", str(3 * hold), "--t0", "300", "--out", str(out)])
    assert code == 0
    return Trajectory.from_csv(out), hold


def test_two_phase_schedule_hysteresis(tmp_path, write_json):
    traj, hold = hysteresis_trace(tmp_path, write_json)
    p, t = traj.powers[:, 0], traj.temps[:, 0]
    assert shoelace_area(p[hold - 1:], t[hold - 1:]) > 1.0
    rise_p, rise_t, fall_p, fall_t = phase_crossings(p, t, hold)
    assert rise_p < rise_t
    assert fall_p < fall_t


def test_safe_power_reference(capsys, write_json):
    code, rep = run_json(capsys, ["safe-power", "--config", write_json(REFERENCE),
                                  "--tmax", "438.92"])
    assert code == 0
    assert rep["pc_star"] == pytest.approx(40.0, rel=1e-4)


def test_safe_power_unreachable(capsys, write_json):
    cfg = json.loads(json.dumps(REFERENCE))
    cfg["thermal"]["ambient"] = 300.0
    code, rep = run_json(capsys, ["safe-power", "--config", write_json(cfg), "--tmax", "305"])
    assert code == 2 and rep["status"] == "unreachable"
    code, rep = run_json(capsys, ["safe-power", "--config", write_json(REFERENCE),
                                  "--tmax", "1500"])
    assert code == 2


def test_safe_power_sweep(tmp_path, write_json):
    out = tmp_path / "sweep.csv"
    assert main(["safe-power", "--config", write_json(REFERENCE), "--sweep", "320:600:57",
                 "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["T_star_K", "pc_star_W"]
    pcs = [float(r[1]) for r in rows[1:]]
    assert len(pcs) == 57
    assert all(b > a for a, b in zip(pcs, pcs[1:]))


def test_safe_power_bad_sweep(write_json, capsys):
    assert main(["safe-power", "--config", write_json(REFERENCE), "--sweep", "1:2"]) == 1


def test_ttfp_file_round_trip(tmp_path, capsys):
    times = np.arange(201) * 0.1
    temps = 340 - 40 * np.exp(-times / 30)
    path = tmp_path / "exp.csv"
    Trajectory(times, temps[:, None], np.zeros((201, 1))).to_csv(path)
    code, rep = run_json(capsys, ["ttfp", "--traj", str(path), "--tfix", "340"])
    assert code == 0
    assert rep["tau_s"] == pytest.approx(30.0, rel=1e-9)
    assert rep["epsilon_K"] == pytest.approx(0.4)
    code, rep = run_json(capsys, ["ttfp", "--traj", str(path), "--tfix", "300"])
    assert code == 2 and rep["status"] == "undefined"
    assert main(["ttfp", "--traj", str(path)]) == 1


def test_identify_leakage(tmp_path, capsys):
    path = tmp_path / "cal.csv"
    rows = [(t, 0.4 + 1.25e-4 * t * t * math.exp(-800 / t)) for t in (313, 323, 333, 343, 353)]
    path.write_text("T_K,P_W\n" + "".join(f"{t},{p!r}\n" for t, p in rows))
    code, rep = run_json(capsys, ["identify", "leakage", "--calib", str(path), "--voltage", "1"])
    assert code == 0
    assert rep["parameters"]["kappa2_K"] == pytest.approx(-800.0, rel=1e-2)
    assert main(["identify", "leakage", "--calib", str(path)]) == 1


def test_identify_statespace_and_siso(tmp_path, capsys, write_json):
    cfg = load_config(write_json(PAIR))
    sched = generate_prbs([[2.0, 12.0], [1.0, 9.0]], 300)
    path = tmp_path / "prbs.csv"
    simulate(cfg.thermal, cfg.sources, [300.0, 300.0], 300, sched).to_csv(path)
    code, rep = run_json(capsys, ["identify", "statespace", "--traj", str(path)])
    assert code == 0
    np.testing.assert_allclose(rep["parameters"]["A"], PAIR["thermal"]["a_matrix"], atol=1e-8)
    ref_cfg = load_config(write_json(REFERENCE, "ref.json"))
    ref_path = tmp_path / "ref.csv"
    simulate(ref_cfg.thermal, ref_cfg.sources, [300.0], 200,
             generate_prbs([20.0, 40.0], 200)).to_csv(ref_path)
    code, rep = run_json(capsys, ["identify", "siso", "--traj", str(ref_path)])
    assert code == 0
    assert rep["parameters"]["a"] == pytest.approx(0.95, abs=1e-6)
    assert main(["identify", "siso", "--traj", str(ref_path), "--traj", str(ref_path)]) == 1


def test_prbs_golden_through_cli(capsys):
    assert main(["prbs", "--levels", "0,1", "--length", "16", "--seed", "ACE1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "step,source,pc_W"
    assert [int(float(r.split(",")[2])) for r in lines[1:]] == \
        [0, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1, 0]


def test_prbs_rejects_bad_levels(capsys):
    assert main(["prbs", "--levels", "a,b", "--length", "4"]) == 1
    assert main(["prbs", "--levels", "1,2", "--length", "4", "--seed", "0"]) == 1


def test_mimo_pair(capsys, write_json):
    code, rep = run_json(capsys, ["mimo", "--config", write_json(PAIR)])
    assert code == 0
    assert rep["iterations"] <= 5
    assert rep["residual_norm_K"] < 1e-9
    assert len(rep["temps_K"]) == 2


def test_mimo_runaway(capsys, write_json):
    hot = json.loads(json.dumps(REFERENCE))
    hot["sources"][0]["pc_W"] = 60.0
    code, rep = run_json(capsys, ["mimo", "--config", write_json(hot)])
    assert code == 2 and rep["status"] == "runaway"


def test_bench(capsys, write_json):
    code, rep = run_json(capsys, ["bench", "--config", write_json(REFERENCE), "--repeat", "20"])
    assert code == 0
    assert set(rep) >= {"analyze_s", "safe_power_s", "ttfp_s", "total_s"}
    timings = bench_pipeline(load_config(write_json(REFERENCE)), repeat=5)
    assert all(v > 0 for v in timings.values())


def test_commands_are_deterministic(capsys, write_json):
    path = write_json(PAIR)
    first = run_json(capsys, ["mimo", "--config", path])
    assert run_json(capsys, ["mimo", "--config", path]) == first
