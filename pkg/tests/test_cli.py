"""Config parsing and command-line behavior."""

import numpy as np
import pytest

from kljnsim.cli import RunConfig, cmd_tables, cmd_waveforms, main, parse_config

FAST_CFG = """
# compact setup for command tests
scenarios = 1,2
tau_multipliers = 1,2,3,4
n_trials = 6
n_cal = 50
record_len = 65536
master_seed = 9
"""


def _write(tmp_path, text):
    path = tmp_path / "conf.cfg"
    path.write_text(text)
    return str(path)


class TestParseConfig:
    def test_empty_text_gives_demonstration_defaults(self):
        cfg = parse_config("")
        p = cfg.physical
        assert (p.r_h, p.r_l, p.z0) == (11e3, 2e3, 50.0)
        assert (p.temperature, p.bandwidth, p.fly_time) == (7e15, 5e3, 1e-5)
        assert cfg.n_trials == 1000 and cfg.n_cal == 200
        assert cfg.scenarios == (1, 2, 3, 4)

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nr_h = 12e3  # inline\n")
        assert cfg.physical.r_h == 12e3

    def test_dt_divisor_arithmetic(self):
        cfg = parse_config("dt_divisor = 100")
        assert cfg.physical.dt == pytest.approx(1e-7, rel=1e-15)

    def test_unknown_key_named_in_error(self):
        with pytest.raises(ValueError, match="unknown config key: 'r_x'"):
            parse_config("r_x = 5")

    def test_bad_value_names_key(self):
        with pytest.raises(ValueError, match="n_trials"):
            parse_config("n_trials = many")

    def test_equal_resistors_rejected(self):
        with pytest.raises(ValueError, match="r_h"):
            parse_config("r_h = 2e3\nr_l = 2e3")

    def test_non_positive_z0_rejected(self):
        with pytest.raises(ValueError, match="z0"):
            parse_config("z0 = -50")

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config("this is not a config line")

    def test_bool_values(self):
        assert parse_config("random_state = true").random_state
        assert not parse_config("random_state = off").random_state
        with pytest.raises(ValueError, match="random_state"):
            parse_config("random_state = maybe")

    def test_round_trip_through_to_text(self):
        cfg = parse_config(FAST_CFG)
        assert parse_config(cfg.to_text()) == cfg

    def test_out_dir_key(self, tmp_path):
        cfg = parse_config(f"out_dir = {tmp_path}/from_key\n" + FAST_CFG + "scenarios = 1\n")
        assert main(["tables", "--config", _write(tmp_path, cfg.to_text())]) == 0
        assert (tmp_path / "from_key" / "scenario_1.csv").exists()


class TestCmdTables:
    def test_writes_one_csv_per_scenario(self, tmp_path):
        cfg = parse_config(FAST_CFG)
        paths = cmd_tables(cfg, str(tmp_path))
        assert [p.name for p in paths] == ["scenario_1.csv", "scenario_2.csv"]
        for p in paths:
            lines = p.read_text().splitlines()
            assert lines[0] == "scenario,tau_s,p_ev,se_v,p_ei,se_i,n,loosened_fraction"
            assert len(lines) == 5
        assert (tmp_path / "effective_config.txt").exists()

    def test_repeat_run_is_byte_identical(self, tmp_path):
        cfg = parse_config(FAST_CFG)
        first = cmd_tables(cfg, str(tmp_path / "a"))
        second = cmd_tables(cfg, str(tmp_path / "b"))
        for p1, p2 in zip(first, second):
            assert p1.read_bytes() == p2.read_bytes()

    def test_single_scenario_config(self, tmp_path):
        cfg = parse_config(FAST_CFG + "scenarios = 1\n")
        paths = cmd_tables(cfg, str(tmp_path))
        assert len(paths) == 1


class TestCmdWaveforms:
    def test_dump_columns_and_length(self, tmp_path):
        cfg = parse_config(FAST_CFG)
        path = cmd_waveforms(cfg, 1, str(tmp_path))
        lines = path.read_text().splitlines()
        assert lines[0].split("\t") == ["time_s", "ugen_a", "ugen_b", "v_a", "v_b", "i_a", "i_b"]
        assert len(lines) == 1 + 2 * cfg.physical.dt_divisor

    def test_no_defense_dump_has_arrival_jump(self, tmp_path):
        cfg = parse_config(FAST_CFG)
        path = cmd_waveforms(cfg, 1, str(tmp_path))
        data = np.loadtxt(path, skiprows=1)
        steps = np.abs(np.diff(data[:, 3]))
        arrival = steps[cfg.physical.dt_divisor - 1]
        assert arrival > 10.0 * np.median(steps)

    def test_full_defense_dump_has_no_arrival_jump(self, tmp_path):
        cfg = parse_config("n_cal = 50\nmaster_seed = 9\nrecord_len = 262144")
        path = cmd_waveforms(cfg, 4, str(tmp_path))
        data = np.loadtxt(path, skiprows=1)
        steps = np.abs(np.diff(data[:, 3]))
        arrival = steps[cfg.physical.dt_divisor - 1]
        assert arrival <= 10.0 * np.median(steps)


class TestMain:
    def test_tables_exit_zero(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(FAST_CFG + "scenarios = 1\n")
        rc = main(["tables", "--config", str(cfg_file), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "scenario_1.csv").exists()

    def test_flag_overrides_config_and_is_echoed(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(FAST_CFG + "scenarios = 1\n")
        out = tmp_path / "out"
        rc = main(["tables", "--config", str(cfg_file), "--seed", "123",
                   "--trials", "4", "--out", str(out)])
        assert rc == 0
        echoed = (out / "effective_config.txt").read_text()
        assert "master_seed = 123" in echoed
        assert "n_trials = 4" in echoed

    def test_config_error_exit_two(self, tmp_path, capsys):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("z0 = 0\n")
        rc = main(["validate", "--config", str(cfg_file)])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_file_exit_two(self, tmp_path):
        rc = main(["tables", "--config", str(tmp_path / "nope.cfg")])
        assert rc == 2

    def test_validate_short_duration_names_minimum(self, tmp_path, capsys):
        rc = main(["validate", "--duration", "0.05", "--out", str(tmp_path)])
        assert rc == 2
        assert "0.2" in capsys.readouterr().err

    def test_waveforms_command(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(FAST_CFG)
        rc = main(["waveforms", "--config", str(cfg_file), "--scenario", "1",
                   "--out", str(tmp_path / "w")])
        assert rc == 0
        assert (tmp_path / "w" / "waveforms_scenario_1.tsv").exists()
