"""CLI surface: artifacts on disk, exit codes, reproducibility."""

import json

import numpy as np
import pytest

from riser_stab.cli import main


def scenario_dict(**overrides):
    base = {
        "mode": "linear-damping",
        "params": {
            "m": 1.0, "k": 1.0, "b": 1.0, "gamma": 1.0, "p": 1.0,
            "L": np.pi, "a0": 1.0, "a1": 1.0,
            "tension": {"type": "constant", "value": -1.0},
        },
        "control": {"n_volumes": 10, "mu": 8.0},
        "grid_points": 51,
        "dt": 2e-3,
        "t_final": 3.0,
        "sample_every": 10,
        "initial_u": {"type": "bump", "scale": 0.05},
        "initial_v": {"type": "zero"},
    }
    base.update(overrides)
    return base


def write_config(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=1))
    return path


class TestCheck:
    def test_prints_thresholds(self, tmp_path, capsys):
        cfg = write_config(tmp_path, scenario_dict())
        out_json = tmp_path / "report.json"
        code = main(["check", "--config", str(cfg), "--out", str(out_json)])
        assert code == 0
        text = capsys.readouterr().out
        assert "h_max" in text and "mu_min" in text and "lambda1" in text
        report = json.loads(out_json.read_text())
        assert report["eps"] == pytest.approx(0.5)
        assert report["mu_min_linear"] == pytest.approx(8.0)

    def test_a0_zero_message(self, tmp_path, capsys):
        d = scenario_dict()
        d["params"]["a0"] = 0.0
        d["params"]["tension"] = {"type": "constant", "value": 0.5}
        cfg = write_config(tmp_path, d)
        assert main(["check", "--config", str(cfg)]) == 0
        assert "control optional" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        code = main(["check", "--config", str(tmp_path / "nope.json")])
        assert code != 0
        assert "not found" in capsys.readouterr().err


class TestSimulate:
    def test_writes_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, scenario_dict())
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("timeseries.csv", "energy_report.json", "decay_fit.json", "plot.svg"):
            assert (out / name).exists(), name
        header = (out / "timeseries.csv").read_text().splitlines()[0]
        assert header == "t,norm_v_sq,norm_uxx_sq,tension_energy,bn,script_E,big_E,script_E1,W,dissipation"
        fit = json.loads((out / "decay_fit.json").read_text())
        assert fit["kind"] == "exponential"
        assert fit["rate"] > 0

    def test_zero_initial_data_skips_fit(self, tmp_path):
        d = scenario_dict(initial_u={"type": "zero"})
        cfg = write_config(tmp_path, d)
        out = tmp_path / "zero"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        fit = json.loads((out / "decay_fit.json").read_text())
        assert fit["skipped"] == "zero energy"
        rows = (out / "timeseries.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[5]) == 0.0 for r in rows)  # script_E column

    def test_invalid_scenario_exit_code(self, tmp_path, capsys):
        d = scenario_dict()
        d["params"]["L"] = -1.0
        cfg = write_config(tmp_path, d)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert "invalid scenario" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, scenario_dict())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(out1)])
        main(["simulate", "--config", str(cfg), "--out", str(out2)])
        for name in ("timeseries.csv", "energy_report.json", "decay_fit.json", "plot.svg"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_nonlinear_run_reports_claimed_rate(self, tmp_path):
        d = scenario_dict(mode="nonlinear-damping", t_final=3.0)
        cfg = write_config(tmp_path, d)
        out = tmp_path / "nl"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        fit = json.loads((out / "decay_fit.json").read_text())
        assert fit["claimed_rates"]["theorem"] == pytest.approx(2.0 / 3.0)
        assert fit["claimed_rates"]["derivation_slowest_term"] == pytest.approx(1.0 / 3.0)

    def test_snapshot_dump(self, tmp_path):
        d = scenario_dict(snapshot_every=500, t_final=2.0)
        cfg = write_config(tmp_path, d)
        out = tmp_path / "snaps"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        with np.load(out / "states.npz") as data:
            assert data["u"].shape[1] == 51
            assert data["t"][0] == 0.0


class TestSweep:
    def test_single_point_matches_simulate_and_check(self, tmp_path):
        scen = scenario_dict(t_final=20.0, fit_window=[2.0, 20.0])
        sweep = {
            "base": scen,
            "axes": {"control.mu": [8.0]},
        }
        cfg = write_config(tmp_path, sweep, "sweep.json")
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert len(rows) == 2
        header = rows[0].split(",")
        row = dict(zip(header, rows[1].split(",")))
        assert row["status"] == "ok"
        assert row["theorem_pass"] == "true"  # mu = 8 = mu_min at these parameters
        assert row["stabilized"] == "true"

    def test_empty_axis_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"base": scenario_dict(), "axes": {"control.mu": []}}, "s.json")
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "bad sweep config" in capsys.readouterr().err

    def test_unknown_axis_field(self, tmp_path):
        cfg = write_config(
            tmp_path, {"base": scenario_dict(), "axes": {"params.zeta": [1.0]}}, "s.json"
        )
        with pytest.raises(ValueError, match="unknown field"):
            main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "1"])

    def test_a0_axis_repins_constant_tension(self, tmp_path):
        sweep = {"base": scenario_dict(t_final=1.0), "axes": {"params.a0": [0.25, 0.75]}}
        cfg = write_config(tmp_path, sweep, "s.json")
        out = tmp_path / "a0sweep"
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()[1:]
        assert all(r.split(",")[1] == "ok" for r in rows)


class TestVerifyLemmas:
    def test_small_run_with_report(self, tmp_path, capsys):
        report = tmp_path / "lemmas.json"
        code = main(["verify-lemmas", "--samples", "50", "--seed", "3", "--report", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["total_violations"] == 0
        assert payload["worst_relative_margin"] >= -1e-8
        assert "fv_approximation" in capsys.readouterr().out


class TestFit:
    def test_fit_on_synthetic_csv(self, tmp_path, capsys):
        t = np.linspace(0, 20, 101)
        v = 3.0 * np.exp(-0.25 * t)
        path = tmp_path / "ts.csv"
        with open(path, "w") as fh:
            fh.write("t,norm_v_sq,norm_uxx_sq\n")
            for ti, vi in zip(t, v):
                fh.write(f"{ti!r},{vi/2!r},{vi/2!r}\n")
        out = tmp_path / "fit.json"
        code = main(["fit", "--csv", str(path), "--kind", "exponential",
                     "--window", "2", "20", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["exponential"]["rate"] == pytest.approx(0.25, rel=1e-6)

    def test_missing_csv(self, tmp_path, capsys):
        assert main(["fit", "--csv", str(tmp_path / "no.csv")]) == 2
