"""End-to-end tests of the command-line runner: schemas, artifacts,
exit codes and byte-level determinism."""

import json
import math

import numpy as np
import pytest

from rdcontrol.cli import main


def write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


TINY_SIM = {
    "length": 5.0,
    "n_x": 40,
    "t_final": 0.5,
    "u": 0.3,
    "v": 0.3,
    "record_dt": 0.1,
}


class TestThresholds:
    def test_logistic_report(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {"model": {"type": "logistic"}})
        out = tmp_path / "out"
        assert main(["thresholds", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "thresholds.json").read_text())
        assert abs(report["l_star"]["value"] - math.pi) <= 1e-3
        assert report["l_star"]["attained"] is False
        assert abs(report["l_star_lower_bound"] - math.pi) <= 1e-6
        assert "l_theta" not in report

    def test_default_model_is_cubic_third(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["thresholds", "--out", str(out)]) == 0
        report = json.loads((out / "thresholds.json").read_text())
        assert abs(report["l_star"]["value"] - 10.43) <= 0.05
        assert abs(report["l_theta"]["value"] - 6.29) <= 0.05
        assert report["l_star"]["attained"] is True
        assert 0.0 < report["l_star"]["argmin_alpha"] < 1.0 / 36.0
        assert report["l_theta_lower_bound"] <= report["l_theta"]["value"]
        stdout = capsys.readouterr().out
        assert "l_star" in stdout and "l_theta" in stdout

    def test_infinite_threshold_serialized_as_string(self, tmp_path):
        cfg = write_cfg(
            tmp_path, "cfg.json", {"model": {"type": "cubic", "theta": 0.5}})
        out = tmp_path / "out"
        assert main(["thresholds", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "thresholds.json").read_text())
        assert report["l_star"]["value"] == "inf"


class TestSchemaErrors:
    def test_unknown_key_rejected_with_line(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text('{\n  "length": 5.0,\n  "bogus": 1\n}\n')
        assert main(["simulate", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "bogus" in err and f"{path}:3" in err

    def test_malformed_json_reports_position(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text("{ not json\n")
        assert main(["simulate", "--config", str(path)]) == 2
        assert f"{path}:1:" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2

    def test_length_flag_rejected_where_meaningless(self):
        assert main(["thresholds", "--L", "5"]) == 2

    def test_preset_command_mismatch(self):
        assert main(["simulate", "--preset", "mintime2"]) == 2

    @pytest.mark.parametrize("model", [
        {"type": "quartic"},
        {"type": "cubic"},
        {"type": "logistic", "theta": 0.3},
        {"type": "cubic", "theta": 1.5},
        {"type": "cubic", "theta": 0.3, "extra": 1},
    ])
    def test_bad_model_specs(self, tmp_path, model):
        cfg = write_cfg(tmp_path, "cfg.json", {"model": model})
        assert main(["thresholds", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_bad_y0_value(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {
            **TINY_SIM, "y0": {"kind": "constant", "value": 2.0}})
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_y0_values_wrong_length(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {
            **TINY_SIM, "y0": {"kind": "values", "values": [0.1, 0.2, 0.3]}})
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_strategy_unknown_key(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {"strategy": {"bogus": 1.0}})
        assert main(["staircase", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_non_integer_n_x(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {**TINY_SIM, "n_x": 40.0})
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_usage_errors(self):
        assert main([]) == 2
        assert main(["--help"]) == 0


class TestSimulate:
    def test_artifacts_and_outcome(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", TINY_SIM)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        for name in ("trajectory.csv", "schedule.csv", "plot_data.csv",
                     "outcome.json"):
            assert (out / name).exists()
        assert (out / "trajectory.csv").read_text().splitlines()[0] == "t,x,y"
        assert (out / "schedule.csv").read_text().splitlines()[0] == "t,u,v"
        plot_lines = (out / "plot_data.csv").read_text().splitlines()
        assert plot_lines[0].startswith("x,y(t=")
        assert len(plot_lines[0].split(",")) == 6
        assert len(plot_lines) == 1 + TINY_SIM["n_x"] + 1
        outcome = json.loads((out / "outcome.json").read_text())
        assert outcome["command"] == "simulate"
        assert 0.0 <= outcome["final"]["min"] <= outcome["final"]["max"] <= 1.0
        assert outcome["config"]["u"] == 0.3
        assert "out" not in outcome["config"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", TINY_SIM)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        for name in ("trajectory.csv", "schedule.csv", "plot_data.csv",
                     "outcome.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_preset_cas1_reaches_theta(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--preset", "cas1", "--out", str(out)]) == 0
        outcome = json.loads((out / "outcome.json").read_text())
        assert outcome["config"]["length"] == 5.0
        assert outcome["config"]["u"] == pytest.approx(1.0 / 3.0)
        assert outcome["final"]["dist_to_theta"] <= 1e-2

    def test_overlarge_step_exits_4(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "cfg.json", {
            "length": 8.0, "n_x": 60, "t_final": 10.0, "dt": 5.0,
            "u": 1.0, "v": 1.0, "y0": {"kind": "constant", "value": 0.9}})
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 4
        assert "numerical failure" in capsys.readouterr().err


class TestStaircase:
    def test_length_five_succeeds(self, tmp_path):
        out = tmp_path / "out"
        assert main(["staircase", "--L", "5", "--out", str(out)]) == 0
        outcome = json.loads((out / "outcome.json").read_text())
        assert outcome["success"] is True
        assert outcome["final_error"] <= 1e-2
        t0, t1, total = outcome["phase_times"]
        assert 0.0 < t0 <= t1 <= total
        dwell = outcome["dwell"]
        assert dwell["n_steps"] >= 2
        assert len(dwell["errors"]) == dwell["n_steps"]
        assert (out / "trajectory.csv").exists()
        assert (out / "schedule.csv").exists()
        schedule = np.loadtxt(out / "schedule.csv", delimiter=",", skiprows=1)
        assert schedule[:, 1:].min() >= 0.0
        assert schedule[:, 1:].max() <= 1.0

    def test_gate_failure_exits_3(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["staircase", "--L", "12", "--out", str(out)]) == 3
        assert "infeasible" in capsys.readouterr().err
        outcome = json.loads((out / "outcome.json").read_text())
        assert outcome["success"] is False
        assert "error" in outcome


class TestOptimize:
    def test_artifacts_and_monotone_cost(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {
            "length": 5.0, "n_x": 24, "n_t": 40, "horizon": 1.0,
            "max_iters": 30})
        out = tmp_path / "out"
        assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0
        outcome = json.loads((out / "outcome.json").read_text())
        hist = outcome["cost_history"]
        assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))
        assert outcome["final_cost"] == hist[-1]
        rows = (out / "schedule.csv").read_text().splitlines()
        assert len(rows) == 1 + 40

    def test_logistic_needs_explicit_target(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {
            "model": {"type": "logistic"}, "length": 2.0, "n_x": 24,
            "n_t": 40, "horizon": 1.0, "max_iters": 20})
        assert main(["optimize", "--config", cfg,
                     "--out", str(tmp_path / "o1")]) == 2
        cfg2 = write_cfg(tmp_path, "cfg2.json", {
            "model": {"type": "logistic"}, "length": 2.0, "n_x": 24,
            "n_t": 40, "horizon": 1.0, "max_iters": 20,
            "target": {"kind": "constant", "value": 0.0}})
        assert main(["optimize", "--config", cfg2,
                     "--out", str(tmp_path / "o2")]) == 0


class TestMintime:
    def test_small_problem_brackets_t_f(self, tmp_path):
        cfg = write_cfg(tmp_path, "cfg.json", {
            "length": 5.0, "n_x": 24, "n_t": 64, "t_lo": 0.25,
            "t_hi": 4.0, "time_tol": 0.5, "max_iters": 60})
        out = tmp_path / "out"
        assert main(["mintime", "--config", cfg, "--out", str(out)]) == 0
        outcome = json.loads((out / "outcome.json").read_text())
        assert 0.25 < outcome["t_f"] <= 4.0
        assert outcome["final_cost"] <= outcome["feas_tol"]
        assert (out / "plot_data.csv").exists()

    def test_infeasible_horizon_exits_3(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "cfg.json", {
            "length": 8.0, "n_x": 24, "n_t": 32, "t_lo": 0.01,
            "t_hi": 0.2, "max_iters": 40})
        assert main(["mintime", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 3
        assert "infeasible" in capsys.readouterr().err


class TestStationary:
    def test_bump_enumeration(self, tmp_path):
        out = tmp_path / "out"
        assert main(["stationary", "--L", "12", "--out", str(out)]) == 0
        report = json.loads((out / "stationary.json").read_text())
        assert report["count"] >= 2
        maxima = [s["max"] for s in report["states"]]
        assert any(m >= 0.1 for m in maxima)
        assert any(m <= 1e-12 for m in maxima)
        lines = (out / "stationary_profiles.csv").read_text().splitlines()
        assert lines[0] == "k,x,w,dw"
        assert len(lines) > report["count"]
