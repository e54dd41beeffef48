import numpy as np
import pytest

import emtsim as em
from emtsim.cli import main as cli_main
from emtsim.scenarios import segment_times


class TestConfig:
    def test_defaults_valid(self):
        cfg = em.ScenarioConfig("three_bus")
        assert cfg.method == "improved" and cfg.integrator == "obreshkov22"

    @pytest.mark.parametrize("kw", [
        dict(scenario="nope"),
        dict(scenario="fig1", method="magic"),
        dict(scenario="fig1", method="cda", integrator="obreshkov22"),
        dict(scenario="fig1", method="improved", integrator="itm"),
        dict(scenario="fig1", method="preliminary", integrator="itm"),
        dict(scenario="fig1", step_size=0.0),
        dict(scenario="fig1", t_end=-1.0),
        dict(scenario="fig1", eps_fraction=0.7),
    ])
    def test_rejects_bad_combinations(self, kw):
        with pytest.raises(em.ParameterError):
            em.ScenarioConfig(**kw)

    def test_reference_config(self):
        cfg = em.reference_config()
        assert (cfg.method, cfg.integrator, cfg.step_size) == ("cda", "itm", 5e-6)

    def test_file_round_trip(self, tmp_path):
        cfg = em.ScenarioConfig("three_bus", "preliminary", "obreshkov22",
                                2e-3, 0.02, 0.3, str(tmp_path / "o.csv"))
        p = tmp_path / "run.cfg"
        cfg.to_file(p)
        assert em.ScenarioConfig.from_file(p) == cfg

    def test_file_unknown_key(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[scenario]\nscenario = fig1\nwibble = 3\n")
        with pytest.raises(em.ParameterError):
            em.ScenarioConfig.from_file(p)

    def test_file_missing_scenario(self, tmp_path):
        p = tmp_path / "bad2.cfg"
        p.write_text("[scenario]\nmethod = improved\n")
        with pytest.raises(em.ParameterError):
            em.ScenarioConfig.from_file(p)


class TestSegmentTimes:
    def test_exact_division(self):
        grid = segment_times(0.0, 0.2, 1e-3)
        assert len(grid) == 201
        assert grid[0] == 0.0 and grid[-1] == 0.2

    def test_shortened_final_step(self):
        grid = segment_times(0.0, 0.2, 3e-3)
        assert grid[-1] == 0.2
        assert grid[-2] == pytest.approx(0.198, abs=1e-12)

    def test_span_shorter_than_step(self):
        assert segment_times(0.0, 1e-4, 1e-3) == [0.0, 1e-4]

    def test_validation(self):
        with pytest.raises(em.ParameterError):
            segment_times(0.2, 0.1, 1e-3)


class TestFig1Scenario:
    def test_improved_run_grid_and_relaxation(self):
        cfg = em.ScenarioConfig("fig1", "improved", "obreshkov22", 1e-3,
                                t_end=0.01)
        series, diag = em.simulate(cfg)
        want_times = np.array(segment_times(0.0, 0.01, 1e-3))
        assert np.array_equal(series.times, want_times)
        # zero sources: after the switching step the currents are frozen
        i1 = series.column("i1")
        assert np.all(i1[1:] == i1[1])
        assert abs(i1[1] + series.column("i2")[1]) <= 1e-10
        assert diag.max_g_residual <= 1e-8

    def test_cda_run(self):
        cfg = em.ScenarioConfig("fig1", "cda", "itm", 1e-3, t_end=0.01)
        series, diag = em.simulate(cfg)
        assert diag.max_g_residual <= 1e-8
        assert diag.max_f_deviation <= 1e-8
        assert series.column("u")[0] == pytest.approx(0.1, abs=1e-12)


class TestThreeBusScenario:
    def test_prefault_window(self):
        cfg = em.ScenarioConfig("three_bus", "cda", "itm", 1e-3, t_end=0.05)
        series, diag = em.simulate(cfg)
        v1m = series.column("v1m")
        assert np.max(np.abs(v1m - v1m[0])) <= 2e-3
        assert diag.max_g_residual <= 1e-8
        spacing = np.diff(series.times)
        assert np.max(np.abs(spacing - 1e-3)) <= 1e-12

    def test_newton_failure_carries_step_info(self):
        cfg = em.ScenarioConfig("three_bus", "cda", "itm", 1e-3, t_end=0.01)
        with pytest.raises(em.ConvergenceError) as info:
            em.simulate(cfg, em.NewtonSettings(tol=1e-10, max_iter=1))
        assert "step" in str(info.value)
        assert info.value.residual_norm is not None

    def test_determinism_bit_identical_csv(self, tmp_path):
        paths = []
        for k in (1, 2):
            p = tmp_path / f"run{k}.csv"
            cfg = em.ScenarioConfig("three_bus", "improved", "obreshkov22",
                                    1e-3, t_end=0.02, output_path=str(p))
            em.run_scenario(cfg)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestConvergenceStudy:
    def test_bem_first_order_on_decay(self):
        study = em.convergence_study("decay", "bem", (0.2, 0.1, 0.05))
        assert abs(study.slopes[-1] - 1.0) <= 0.2

    def test_validation(self):
        with pytest.raises(em.ParameterError):
            em.convergence_study("decay", "bem", (0.2, 0.1))
        with pytest.raises(em.ParameterError):
            em.convergence_study("decay", "bem", (0.2, 0.1, 0.06))
        with pytest.raises(em.ParameterError):
            em.convergence_study("three_bus", "bem", (0.2, 0.1, 0.05))
        with pytest.raises(em.ParameterError):
            em.convergence_study("decay", "rk4", (0.2, 0.1, 0.05))


class TestCli:
    def test_run_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "fig1.csv"
        rc = cli_main(["run", "--scenario", "fig1", "--method", "cda",
                       "--integrator", "itm", "--step-size", "1e-3",
                       "--t-end", "0.005", "--out", str(out)])
        assert rc == 0
        series = em.read_csv(out)
        assert series.names == ("i1", "i2", "u")
        assert len(series) == 6
        assert "fig1/cda" in capsys.readouterr().out

    def test_run_from_config_file(self, tmp_path):
        out = tmp_path / "cfg.csv"
        cfgp = tmp_path / "run.cfg"
        em.ScenarioConfig("fig1", "cda", "itm", 1e-3, t_end=0.004,
                          output_path=str(out)).to_file(cfgp)
        assert cli_main(["run", "--config", str(cfgp)]) == 0
        assert out.exists()

    def test_compare_zero_errors(self, tmp_path, capsys):
        out = tmp_path / "a.csv"
        cli_main(["run", "--scenario", "fig1", "--method", "cda",
                  "--integrator", "itm", "--step-size", "1e-3",
                  "--t-end", "0.005", "--out", str(out)])
        rc = cli_main(["compare", "--run", str(out), "--reference", str(out),
                       "--signal", "u", "--window", "0.0,0.005"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "max_abs=0.000000e+00" in text

    def test_converge_prints_slopes(self, capsys):
        rc = cli_main(["converge", "--scenario", "decay", "--integrator",
                       "itm", "--steps", "0.2,0.1,0.05"])
        assert rc == 0
        assert "slope=" in capsys.readouterr().out

    def test_missing_file_is_diagnosed(self, tmp_path, capsys):
        rc = cli_main(["compare", "--run", str(tmp_path / "no.csv"),
                       "--reference", str(tmp_path / "no.csv"),
                       "--signal", "u", "--window", "0,1"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_window_string(self, tmp_path, capsys):
        rc = cli_main(["compare", "--run", "x", "--reference", "y",
                       "--signal", "u", "--window", "zz"])
        assert rc == 2

    def test_run_without_scenario(self, capsys):
        assert cli_main(["run"]) == 2

    def test_invalid_choice_exits_nonzero(self):
        with pytest.raises(SystemExit) as info:
            cli_main(["run", "--scenario", "bogus"])
        assert info.value.code != 0
