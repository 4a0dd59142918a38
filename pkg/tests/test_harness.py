import math

import numpy as np
import pytest

from onebit_dmimo.errors import ConfigurationError, DomainError, SimulationError
from onebit_dmimo.harness import (PRESETS, ResultRow, ResultTable, emit_csv, load_scenario,
                                  preset, run_frame, run_point, sweep_ue_power)
from onebit_dmimo.harness.cli import main
from onebit_dmimo.waveform import EvmReport

SCENARIO = """\
[geometry]
rrh = 0,0; 3.5,0; 0,4
ue = 1.75,2

[radio]
bandwidth_hz = 5e6
scale = 1

[power]
ue_dbm = -5

[mode]
quantizer = one_bit
direction = uplink
combiner = mrc

[seed]
seed = 3
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "su.ini"
    path.write_text(SCENARIO)
    return path


class TestScenarioFile:
    def test_parse(self, scenario_file):
        s = load_scenario(scenario_file)
        assert s.rrh_positions == ((0.0, 0.0), (3.5, 0.0), (0.0, 4.0))
        assert s.ue_positions == ((1.75, 2.0),)
        assert s.ue_power_dbm == (-5.0,)
        assert s.bandwidth_hz == 5e6
        assert s.seed == 3
        assert s.mode == "one_bit"

    def test_per_ue_powers(self, tmp_path):
        path = tmp_path / "two.ini"
        path.write_text("[geometry]\nrrh = 0,0; 3,0\nue = 1,1; 2,2\n[power]\nue_dbm = -5, 0\n")
        assert load_scenario(path).ue_power_dbm == (-5.0, 0.0)

    @pytest.mark.parametrize("text", [
        "[radio]\nscale = 1\n",
        "[geometry]\nrrh = 0,0\n",
        "[geometry]\nrrh = 0,0\nue = a,b\n",
        "[geometry]\nrrh = 0,0\nue = 1,1\n[mode]\nquantizer = two_bit\n",
        "[geometry]\nrrh = 0,0\nue = 1,1\n[radio]\nscale = 0.5\n",
        "not an ini file",
    ])
    def test_invalid(self, tmp_path, text):
        path = tmp_path / "bad.ini"
        path.write_text(text)
        with pytest.raises(ConfigurationError):
            load_scenario(path)

    def test_ue_too_close(self, tmp_path):
        path = tmp_path / "close.ini"
        path.write_text("[geometry]\nrrh = 0,0\nue = 0.1,0\n")
        with pytest.raises(DomainError):
            load_scenario(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "nope.ini")


class TestPresets:
    @pytest.mark.parametrize("name", PRESETS)
    def test_builds(self, name):
        s = preset(name)
        assert s.n_rrh >= 1 and s.n_ue >= 1

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            preset("fig11")

    def test_fig10_layout(self):
        s = preset("fig10")
        assert s.n_rrh == 12 and s.n_ue == 5
        assert s.ue_positions[-1] == (6.0, 6.0)

    def test_overrides(self):
        assert preset("fig9", seed=7, mode="inf_bit").seed == 7


class TestCsv:
    def table(self):
        t = ResultTable(2)
        t.add(-5.0, EvmReport(np.array([3.14159265, 12.5]), np.array([-40.0, -52.123456]),
                              "one_bit"))
        return t

    def test_header_only(self, tmp_path):
        path = emit_csv(ResultTable(3), tmp_path / "e.csv")
        assert path.read_bytes() == (b"sweep_value,ue_id,evm_percent,mode,rx_power_dbm_rrh_0,"
                                     b"rx_power_dbm_rrh_1,rx_power_dbm_rrh_2\n")

    def test_rows(self, tmp_path):
        lines = emit_csv(self.table(), tmp_path / "r.csv").read_bytes().split(b"\n")
        assert lines[1] == b"-5,0,3.14159,one_bit,-40,-52.1235"
        assert lines[2] == b"-5,1,12.5,one_bit,-40,-52.1235"
        assert lines[3] == b""
        assert b"\r" not in b"".join(lines)

    def test_identical_tables_identical_bytes(self, tmp_path):
        a = emit_csv(self.table(), tmp_path / "a.csv").read_bytes()
        b = emit_csv(self.table(), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_non_finite(self, tmp_path):
        t = ResultTable(1)
        t.rows.append(ResultRow(1.0, 0, math.inf, "one_bit", (-math.inf,)))
        assert emit_csv(t, tmp_path / "x.csv").read_text().splitlines()[1] == "1,0,inf,one_bit,-inf"

    def test_row_width_mismatch(self, tmp_path):
        t = ResultTable(2)
        t.rows.append(ResultRow(1.0, 0, 1.0, "one_bit", (-1.0,)))
        with pytest.raises(SimulationError):
            emit_csv(t, tmp_path / "x.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            emit_csv(self.table(), tmp_path / "missing" / "x.csv")

    def test_column(self):
        assert self.table().column(1) == ([-5.0], [12.5])


class TestEngine:
    def test_single_ue_uplink_meets_requirement(self):
        s = preset("su_coverage", seed=4)
        one = run_frame(s).per_ue_evm[0]
        inf = run_frame(s.with_(mode="inf_bit")).per_ue_evm[0]
        assert one <= 12.5
        assert inf < one

    def test_noiseless_inf_bit_is_transparent(self):
        s = preset("su_coverage", mode="inf_bit")
        s = s.with_(frontend=s.frontend.noiseless())
        # the UE still sees no noise, but the CU still filters; remaining error is
        # filter and resampler distortion only
        assert run_frame(s).per_ue_evm[0] < 0.5

    def test_silent_ue_does_not_crash(self):
        rep = run_frame(preset("su_coverage", ue_power_dbm=-math.inf))
        assert np.isfinite(rep.per_ue_evm[0]) and rep.per_ue_evm[0] > 50

    def test_report_shapes(self):
        rep = run_point(preset("fig9", n_frames=1))
        assert rep.per_ue_evm.shape == (2,)
        assert rep.per_rrh_rx_power.shape == (3,)
        assert rep.mode == "one_bit"

    def test_rx_power_follows_path_loss(self):
        rep = run_frame(preset("su_coverage"))
        p = rep.per_rrh_rx_power
        # RRHs 1 and 4 sit 2 m from the UE, the corners about 2.66 m
        assert p[1] > p[0] and p[4] > p[5]
        assert p[1] == pytest.approx(p[4], abs=0.5)

    def test_thread_count_does_not_change_results(self):
        s = preset("fig9", n_frames=1, seed=5)
        a = run_point(s, workers=1).per_ue_evm
        b = run_point(s, workers=4).per_ue_evm
        np.testing.assert_array_equal(a, b)

    def test_seed_changes_results(self):
        a = run_frame(preset("su_coverage", seed=1)).per_ue_evm
        b = run_frame(preset("su_coverage", seed=2)).per_ue_evm
        assert a[0] != b[0]

    def test_scaled_mode_matches_physical(self):
        s = preset("fig9", n_frames=1)
        a = run_point(s.with_(scale=1.0)).per_ue_evm
        b = run_point(s.with_(scale=10.0)).per_ue_evm
        np.testing.assert_allclose(a, b, atol=1.0)

    def test_downlink_single_ue(self):
        rep = run_frame(preset("su_coverage", direction="downlink"))
        assert rep.per_ue_evm[0] < 12.5

    def test_sweep_keeps_fixed_ue(self):
        s = preset("fig9", n_frames=1, bandwidth_hz=5e6)
        table = sweep_ue_power([0.0, -10.0], s, fixed_power_dbm=-5.0)
        assert [r.sweep_value for r in table.rows] == [0.0, 0.0, -10.0, -10.0]
        assert len(table.column(1)[1]) == 2


class TestCli:
    def test_run(self, scenario_file, tmp_path):
        out = tmp_path / "o.csv"
        assert main(["run", "--scenario", str(scenario_file), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("sweep_value,ue_id,evm_percent,mode,rx_power_dbm_rrh_0")
        assert len(lines) == 2

    def test_run_is_reproducible(self, scenario_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            main(["run", "--scenario", str(scenario_file), "--seed", "9", "--out", str(out)])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_scenario_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[radio]\n")
        assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
        assert "sim: error" in capsys.readouterr().err

    def test_unwritable_output(self, scenario_file, tmp_path):
        out = tmp_path / "no" / "o.csv"
        assert main(["run", "--scenario", str(scenario_file), "--out", str(out)]) == 2

    def test_unknown_preset(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--preset", "fig11", "--out", str(tmp_path / "o.csv")])

    def test_fig9_sweep(self, tmp_path):
        out = tmp_path / "f9.csv"
        assert main(["sweep", "--preset", "fig9", "--seed", "1", "--out", str(out)]) == 0
        rows = out.read_text().splitlines()[1:]
        assert [r.split(",")[3] for r in rows] == ["one_bit"] * 2 + ["inf_bit"] * 2
