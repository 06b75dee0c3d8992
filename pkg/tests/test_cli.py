import json
from importlib.resources import files

import pytest

from rydgate.cli import main

BUNDLED = files("rydgate") / "configs"


def physics_block(**kw):
    block = {"B_MHz": 500.0, "delta_p_MHz": -3.0}
    block.update(kw)
    return block


def sinusoidal_block():
    return {"family": "sinusoidal",
            "params": {"Omega0_MHz": 2.564, "Omega1_MHz": 0.950,
                       "Omega2_MHz": 0.116, "Delta0_MHz": 1.004,
                       "Delta1_MHz": -1.093, "Delta2_MHz": -0.002},
            "Tg_us": 1.0, "angular": True}


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run(argv):
    return main([str(a) for a in argv])


class TestSimulate:
    def test_bundled_sinusoidal_pulse(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run(["simulate", "--config", BUNDLED / "sinusoidal_pulse.json",
                    "--out", out])
        assert code == 0
        report = json.loads((out / "gate_report.json").read_text())
        assert report["fidelity"] >= 0.9999
        assert report["provenance"]["tool"] == "rydgate"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["artifacts"] == ["gate_report.json",
                                         "trajectory_00.csv",
                                         "trajectory_01.csv"]
        header = (out / "trajectory_00.csv").read_text().splitlines()[0]
        assert header == ("t_us,pop_00,pop_R,pop_rr,pop_pp,"
                          "phase_00,phase_R,phase_rr,phase_pp")
        assert "fidelity" in capsys.readouterr().out

    def test_bundled_bernstein_pulse(self, tmp_path):
        out = tmp_path / "out"
        assert run(["simulate", "--config", BUNDLED / "bernstein_pulse.json",
                    "--out", out]) == 0
        report = json.loads((out / "gate_report.json").read_text())
        assert report["corrected"]["gate_error"] < 1e-5

    def test_malformed_json_exits_2_without_artifacts(self, tmp_path,
                                                      capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"physics": {,}')
        out = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", out]) == 2
        assert not out.exists()
        err = capsys.readouterr().err
        assert "config error at" in err and "bad.json:1:" in err

    def test_unknown_field_named_in_diagnostic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(B_mhz=500.0),
            "waveform": sinusoidal_block()})
        assert run(["simulate", "--config", cfg, "--out",
                    tmp_path / "out"]) == 2
        assert "physics.B_mhz" in capsys.readouterr().err

    def test_missing_required_field_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": {"B_MHz": 500.0},
            "waveform": sinusoidal_block()})
        assert run(["simulate", "--config", cfg, "--out",
                    tmp_path / "out"]) == 2
        assert "physics.delta_p_MHz" in capsys.readouterr().err

    def test_negative_decay_rate_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(gamma_per_us=-0.1),
            "waveform": sinusoidal_block()})
        assert run(["simulate", "--config", cfg, "--out",
                    tmp_path / "out"]) == 2
        assert "gamma_per_us" in capsys.readouterr().err

    def test_too_coarse_recording_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "waveform": sinusoidal_block(),
            "simulation": {"record_points": 100}})
        assert run(["simulate", "--config", cfg, "--out",
                    tmp_path / "out"]) == 2
        assert "record_points" in capsys.readouterr().err


class TestCalibrateConvention:
    def test_angular_convention_wins(self, tmp_path):
        cfg = write_config(tmp_path, {"physics": physics_block(),
                                      "waveform": sinusoidal_block()})
        out = tmp_path / "out"
        assert run(["calibrate-convention", "--config", cfg,
                    "--out", out]) == 0
        lock = json.loads((out / "convention.lock").read_text())
        assert lock["angular"] is True
        assert lock["fidelity_angular_2pi"] >= 0.9999
        assert lock["fidelity_plain_MHz"] < lock["fidelity_angular_2pi"]

    def test_lock_reused_unless_forced(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"physics": physics_block(),
                                      "waveform": sinusoidal_block()})
        out = tmp_path / "out"
        assert run(["calibrate-convention", "--config", cfg,
                    "--out", out]) == 0
        capsys.readouterr()
        assert run(["calibrate-convention", "--config", cfg,
                    "--out", out]) == 0
        assert "reused" in capsys.readouterr().out
        assert run(["calibrate-convention", "--config", cfg, "--out", out,
                    "--force"]) == 0
        assert "chose angular=True" in capsys.readouterr().out

    def test_unphysical_pulse_exits_4(self, tmp_path, capsys):
        dead = sinusoidal_block()
        for key in ("Omega0_MHz", "Omega1_MHz", "Omega2_MHz"):
            dead["params"][key] = 0.0
        cfg = write_config(tmp_path, {"physics": physics_block(),
                                      "waveform": dead})
        out = tmp_path / "out"
        assert run(["calibrate-convention", "--config", cfg,
                    "--out", out]) == 4
        assert "neither convention" in capsys.readouterr().err
        lock = json.loads((out / "convention.lock").read_text())
        assert lock["fidelity_angular_2pi"] <= 0.99

    def test_sampled_family_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "waveform": {"family": "sampled", "Tg_us": 1.0, "angular": True,
                         "params": {"omega_MHz": [0.0, 1.0, 0.5, 1.0] * 8,
                                    "delta_MHz": [0.0] * 32}}})
        assert run(["calibrate-convention", "--config", cfg,
                    "--out", tmp_path / "out"]) == 2
        assert "waveform.family" in capsys.readouterr().err


MCWF_CONFIG = {
    "physics": physics_block(),
    "waveform": sinusoidal_block(),
    "mcwf": {"gamma_values_per_us": [0.002, 0.004], "n_trajectories": 400,
             "base_seed": 0},
}


class TestMcwf:
    def test_stats_and_fit_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        out = tmp_path / "out"
        assert run(["mcwf", "--config", cfg, "--out", out]) == 0
        lines = (out / "mcwf_stats.csv").read_text().splitlines()
        assert lines[0] == "gamma_per_us,mean_error,stderr,n_traj,base_seed"
        assert len(lines) == 3
        fit = json.loads((out / "fit.json").read_text())
        assert fit["slope_per_gamma"] > 0.0
        assert 0.0 <= fit["r_squared"] <= 1.0

    def test_single_gamma_skips_fit(self, tmp_path):
        cfg_data = json.loads(json.dumps(MCWF_CONFIG))
        cfg_data["mcwf"]["gamma_values_per_us"] = [0.002]
        cfg = write_config(tmp_path, cfg_data)
        out = tmp_path / "out"
        assert run(["mcwf", "--config", cfg, "--out", out]) == 0
        assert not (out / "fit.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["artifacts"] == ["mcwf_stats.csv"]

    def test_worker_count_never_changes_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        serial, parallel = tmp_path / "w1", tmp_path / "w2"
        assert run(["mcwf", "--config", cfg, "--out", serial,
                    "--workers", 1]) == 0
        assert run(["mcwf", "--config", cfg, "--out", parallel,
                    "--workers", 3]) == 0
        for name in ("mcwf_stats.csv", "fit.json", "manifest.json"):
            assert (serial / name).read_bytes() == \
                (parallel / name).read_bytes()

    def test_workers_from_environment(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        out_env, out_flag = tmp_path / "env", tmp_path / "flag"
        monkeypatch.setenv("RPL_WORKERS", "2")
        assert run(["mcwf", "--config", cfg, "--out", out_env]) == 0
        monkeypatch.delenv("RPL_WORKERS")
        assert run(["mcwf", "--config", cfg, "--out", out_flag,
                    "--workers", 2]) == 0
        assert (out_env / "mcwf_stats.csv").read_bytes() == \
            (out_flag / "mcwf_stats.csv").read_bytes()

    def test_seed_override_recorded_and_effective(self, tmp_path):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        base, seeded = tmp_path / "base", tmp_path / "seeded"
        assert run(["mcwf", "--config", cfg, "--out", base]) == 0
        assert run(["mcwf", "--config", cfg, "--out", seeded,
                    "--seed", 7]) == 0
        manifest = json.loads((seeded / "manifest.json").read_text())
        assert manifest["config"]["mcwf"]["base_seed"] == 7
        assert (base / "mcwf_stats.csv").read_text() != \
            (seeded / "mcwf_stats.csv").read_text()


class TestSweep:
    def test_blockade_axis_rows(self, tmp_path):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "waveform": sinusoidal_block(),
            "sweep": {"axis_name": "B_MHz", "values": [250.0, 500.0, 1000.0]}})
        out = tmp_path / "out"
        assert run(["sweep", "--config", cfg, "--out", out]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "axis_name,axis_value,gate_error"
        assert len(lines) == 4
        assert all(line.startswith("B_MHz,") for line in lines[1:])

    def test_unknown_perturbation_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "waveform": sinusoidal_block(),
            "sweep": {"axis_name": "epsilon", "values": [0.0],
                      "perturbation": "magnetic"}})
        assert run(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 2
        assert "sweep.perturbation" in capsys.readouterr().err


class TestOptimize:
    def test_toy_problem_end_to_end(self, tmp_path):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "optimize": {"family": "constant_two_level",
                         "bounds": {"Omega_MHz": [0.2, 2.2]},
                         "budget": 300, "seed": 1, "stop_below": 1e-12,
                         "target": "strict_CZ"}})
        out = tmp_path / "out"
        assert run(["optimize", "--config", cfg, "--out", out]) == 0
        report = json.loads((out / "optimize_report.json").read_text())
        assert report["best_error"] <= 1e-12
        assert report["best_params"]["Omega_MHz"] == pytest.approx(1.0,
                                                                   abs=1e-3)
        assert not report["budget_exhausted"]
        trace = (out / "trace.csv").read_text().splitlines()
        assert len(trace) - 1 == report["n_evaluations"]

    def test_bounds_must_cover_family_parameters(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "optimize": {"family": "constant_two_level", "bounds": {},
                         "budget": 10}})
        assert run(["optimize", "--config", cfg,
                    "--out", tmp_path / "o"]) == 2
        assert "optimize.bounds.Omega_MHz" in capsys.readouterr().err

    def test_unknown_family_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "physics": physics_block(),
            "optimize": {"family": "chirp", "bounds": {}, "budget": 10}})
        assert run(["optimize", "--config", cfg,
                    "--out", tmp_path / "o"]) == 2
        assert "optimize.family" in capsys.readouterr().err


class TestArgumentHandling:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "rydgate" in capsys.readouterr().out

    def test_nonpositive_workers_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        assert run(["mcwf", "--config", cfg, "--out", tmp_path / "o",
                    "--workers", 0]) == 2
        assert "--workers" in capsys.readouterr().err

    def test_oversized_seed_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MCWF_CONFIG)
        assert run(["mcwf", "--config", cfg, "--out", tmp_path / "o",
                    "--seed", 2**64]) == 2
        assert "--seed" in capsys.readouterr().err

    def test_unknown_top_level_block_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"physics": physics_block(),
                                      "waveform": sinusoidal_block(),
                                      "extras": {}})
        assert run(["simulate", "--config", cfg,
                    "--out", tmp_path / "o"]) == 2
        assert "config.extras" in capsys.readouterr().err
