import math
from pathlib import Path

import numpy as np
import pytest

from irspca import (ConfigError, ContractError, ResultTable, build_scenario,
                    calibrate, emit_csv, experiment_spec, figure_spec,
                    parse_config, read_csv, run_experiment)
from irspca.cli import main as cli_main

SMALL = {"M": "8", "J": "3", "tau_p": "16"}


def spec_with(**kv):
    raw = dict(SMALL)
    raw.update({k: str(v) for k, v in kv.items()})
    return experiment_spec(raw)


class TestParseConfig:
    def test_key_value_forms_and_comments(self):
        raw = parse_config("""
            # geometry
            d1 = 120.5
            M: 16            # antennas
            nu = inf
        """)
        assert raw == {"d1": "120.5", "M": "16", "nu": "inf"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("M = 4\nM = 8\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("just some words\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            experiment_spec({"kind": "calibrate", "M": "8", "bogus": "1"})

    def test_typed_fields(self):
        spec = spec_with(kind="add", trials=7, gamma=150.0, nu="inf",
                         sweep="M", sweep_values="8,16")
        assert spec.trials == 7
        assert spec.gamma == 150.0
        assert spec.scenario_cfg.nu == math.inf
        assert spec.sweep_values == (8.0, 16.0)

    def test_invalid_sweep_param(self):
        with pytest.raises(ConfigError):
            spec_with(kind="add", sweep="d1d2", sweep_values="1,2")


class TestRunExperiment:
    def test_calibrate_passthrough(self):
        spec = spec_with(kind="calibrate", M=16, gamma=200.0)
        table = run_experiment(spec)
        scenario = build_scenario(spec.scenario_cfg)
        det = calibrate(200.0, 16, scenario.sigma0_sq)
        got = {row[8]: row[9] for row in table.rows}
        assert got["xi_bar"] == pytest.approx(det.xi_bar, rel=1e-12)
        assert got["eta_g"] == pytest.approx(det.eta_g, rel=1e-12)
        assert got["eta_e"] == pytest.approx(det.eta_e, rel=1e-12)

    def test_add_kind_rows(self):
        spec = spec_with(kind="add", trials=6, gamma=50.0, max_blocks=100,
                         r_p="0.9")
        table = run_experiment(spec)
        metrics = {row[8] for row in table.rows}
        assert {"mean_delay", "mean_wtg", "false_alarm_fraction"} <= metrics
        detectors = {row[0] for row in table.rows}
        assert detectors == {"gcusum", "ed"}

    def test_arl2fa_kind_forces_null(self):
        spec = spec_with(kind="arl2fa", trials=5, gamma=20.0, max_blocks=60,
                         detectors="ed")
        table = run_experiment(spec)
        assert {row[8] for row in table.rows} == {"arl2fa"}
        assert all(row[4] == math.inf for row in table.rows)

    def test_snr_kind_emits_all_conditions(self):
        spec = spec_with(kind="snr", trials=40, sweep="J", sweep_values="1,3")
        table = run_experiment(spec)
        metrics = {row[8] for row in table.rows}
        for name in ("snr_b_no_irs", "snr_e_irs", "snr_e_mrt_pca",
                     "snr_e_zf_pca", "zf_fallback_fraction"):
            assert name in metrics
        assert {row[7] for row in table.rows} == {1.0, 3.0}

    def test_gamma_sweep_changes_thresholds(self):
        spec = spec_with(kind="calibrate", sweep="gamma",
                         sweep_values="100,1000")
        table = run_experiment(spec)
        eta = table.values("eta_g")
        assert eta[100.0] == pytest.approx(math.log(100.0))
        assert eta[1000.0] == pytest.approx(math.log(1000.0))

    def test_determinism_same_spec_same_bytes(self):
        spec = spec_with(kind="add", trials=5, gamma=50.0, max_blocks=80,
                         r_p="0.8", sweep="M", sweep_values="8,16")
        a = run_experiment(spec).lines()
        b = run_experiment(spec).lines()
        assert a == b

    def test_worker_count_independence(self):
        base = dict(kind="add", trials=9, gamma=50.0, max_blocks=80, r_p="0.8")
        one = run_experiment(spec_with(**base, workers=1)).body_lines()
        three = run_experiment(spec_with(**base, workers=3)).body_lines()
        assert one == three


class TestEmitCsv:
    def test_round_trip(self, tmp_path):
        spec = spec_with(kind="calibrate", M=16, gamma=200.0)
        table = run_experiment(spec)
        path = tmp_path / "out.csv"
        emit_csv(table, path)
        text = path.read_text()
        assert text.startswith("#")
        assert "detector,M,gamma" in text
        back = read_csv(path)
        assert back.meta["seed"] == table.meta["seed"]
        for ours, theirs in zip(table.rows, back.rows):
            for a, b in zip(ours, theirs):
                if isinstance(a, float) and not math.isnan(a):
                    assert float(b) == pytest.approx(a, rel=1e-8)

    def test_nine_significant_digits(self, tmp_path):
        table = ResultTable(meta={"seed": "0"},
                            rows=[("ed", 4, 1.0, 1.0, 1.0, 1,
                                   "-", 0.0, "m", 0.123456789123, 0.0, 0.0)])
        path = tmp_path / "digits.csv"
        emit_csv(table, path)
        assert "0.123456789" in path.read_text()

    def test_empty_table_rejected_without_file(self, tmp_path):
        path = tmp_path / "never.csv"
        with pytest.raises(ContractError):
            emit_csv(ResultTable(meta={}, rows=[]), path)
        assert not path.exists()

    def test_unwritable_path_raises_oserror(self, tmp_path):
        spec = spec_with(kind="calibrate", M=8, gamma=50.0)
        table = run_experiment(spec)
        with pytest.raises(OSError):
            emit_csv(table, tmp_path / "no" / "such" / "dir" / "x.csv")


class TestFigurePresets:
    def test_presets_exist_for_all_figures(self):
        for fid in range(4, 11):
            spec = figure_spec(fid, dict(SMALL, trials="4", gamma="25"))
            assert spec.kind in ("add", "wawtg", "snr", "snr_rp_opt")

    def test_figure8_smoke(self):
        spec = figure_spec(8, dict(SMALL, trials="20",
                                   sweep_values="1,3"))
        table = run_experiment(spec)
        zf = table.values("snr_e_zf_pca")
        assert set(zf) == {1.0, 3.0}

    def test_unknown_figure_rejected(self):
        with pytest.raises(ConfigError):
            figure_spec(11, {})


class TestCli:
    def test_calibrate_to_file(self, tmp_path, capsys):
        out = tmp_path / "cal.csv"
        code = cli_main(["calibrate", "--set", "M=8", "--set", "J=3",
                         "--set", "tau_p=16", "--set", "gamma=200",
                         "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "eta_e" in out.read_text()

    def test_stdout_when_no_out(self, capsys):
        code = cli_main(["calibrate", "--set", "M=8", "--set", "J=3",
                         "--set", "tau_p=16", "--set", "gamma=50"])
        captured = capsys.readouterr()
        assert code == 0
        assert "xi_bar" in captured.out

    def test_config_file_loading(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("M = 8\nJ = 3\ntau_p = 16\ngamma = 100\n")
        out = tmp_path / "cal.csv"
        code = cli_main(["calibrate", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        table = read_csv(out)
        eta_g = [row[9] for row in table.rows if row[8] == "eta_g"]
        assert eta_g == [pytest.approx(math.log(100.0))]

    def test_bad_config_exit_code(self, capsys):
        assert cli_main(["add", "--set", "M=0"]) == 2
        assert cli_main(["add", "--set", "nonsense=1"]) == 2

    def test_io_error_exit_code(self, tmp_path):
        code = cli_main(["calibrate", "--set", "M=8", "--set", "J=3",
                         "--set", "tau_p=16", "--set", "gamma=50",
                         "--out", str(tmp_path / "nodir" / "x.csv")])
        assert code == 4

    def test_figure_writes_csv_and_png(self, tmp_path):
        out = tmp_path / "fig8.csv"
        code = cli_main(["figure", "8", "--set", "M=8", "--set", "J=3",
                         "--set", "tau_p=16", "--trials", "10",
                         "--set", "sweep_values=1,3", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert (tmp_path / "fig8.png").exists()

    def test_figure_no_plot(self, tmp_path):
        out = tmp_path / "fig8.csv"
        code = cli_main(["figure", "8", "--set", "M=8", "--set", "J=3",
                         "--set", "tau_p=16", "--trials", "6",
                         "--set", "sweep_values=1,3", "--no-plot",
                         "--out", str(out)])
        assert code == 0
        assert not (tmp_path / "fig8.png").exists()

    def test_seed_flag_changes_hash(self, tmp_path):
        outs = []
        for seed in (1, 2):
            out = tmp_path / f"s{seed}.csv"
            cli_main(["calibrate", "--set", "M=8", "--set", "J=3",
                      "--set", "tau_p=16", "--set", "gamma=50",
                      "--seed", str(seed), "--out", str(out)])
            outs.append(read_csv(out).meta["config_hash"])
        assert outs[0] != outs[1]
