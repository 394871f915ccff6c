"""End-to-end tests of the command-line interface (in-process, via main)."""

import json

import pytest

from solaruav.cli import main


class TestSolve:
    def test_solve_prints_summary(self, capsys):
        code = main(["solve", "--k", "2", "--n-f", "4", "--seed", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "objective:" in out
        assert "uav position:" in out
        assert "all constraints satisfied" in out

    def test_solve_writes_solution_file(self, tmp_path, capsys):
        path = tmp_path / "sol.json"
        code = main(["solve", "--k", "2", "--n-f", "4", "--seed", "2", "--out", str(path)])
        assert code == 0
        payload = json.loads(path.read_text())
        assert payload["k"] == 2
        assert len(payload["p"]) == 2 and len(payload["p"][0]) == 4
        assert len(payload["r"]) == 3

    def test_baseline1_scheme_pins_center(self, capsys):
        code = main(
            ["solve", "--k", "2", "--n-f", "4", "--seed", "1", "--scheme", "baseline1"]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "x=0.00 m  y=0.00 m" in out

    def test_usage_error_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--scheme", "bogus"])
        assert exc.value.code == 2


class TestValidate:
    def _solution(self, tmp_path, capsys):
        path = tmp_path / "sol.json"
        assert main(["solve", "--k", "2", "--n-f", "4", "--seed", "3", "--out", str(path)]) == 0
        capsys.readouterr()
        return path

    def test_round_trip_validates(self, tmp_path, capsys):
        path = self._solution(tmp_path, capsys)
        assert main(["validate", str(path)]) == 0
        assert "validation OK" in capsys.readouterr().out

    def test_tampered_power_fails_with_c3(self, tmp_path, capsys):
        path = self._solution(tmp_path, capsys)
        payload = json.loads(path.read_text())
        payload["p"][0][0] = 100.0
        path.write_text(json.dumps(payload))
        assert main(["validate", str(path)]) == 1
        out = capsys.readouterr().out
        assert "C3" in out

    def test_missing_file_exits_1(self, capsys):
        assert main(["validate", "/nonexistent/sol.json"]) == 1


class TestCampaign:
    def test_runs_config_and_writes_csv(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(
            "scenario: clitest\n"
            "sweep_axis: p_max_dbm\n"
            "sweep_values: [40.0]\n"
            "trials: 1\n"
            "n_users: 2\n"
            "schemes: [proposed]\n"
            "system:\n  n_subcarriers: 4\n"
        )
        out = tmp_path / "rows.csv"
        assert main(["campaign", "--config", str(cfg), "--out", str(out)]) == 0
        text = out.read_text()
        assert text.splitlines()[0].startswith("scenario,scheme")
        assert "clitest,proposed" in text

    def test_bad_config_key_exits_1(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("scenario: x\nsweep_axis: p_max_dbm\nsweep_values: [40.0]\nbogus: 1\n")
        assert main(["campaign", "--config", str(cfg)]) == 1
        assert "bogus" in capsys.readouterr().err


class TestOracleCompare:
    def test_small_comparison_table(self, capsys):
        code = main(
            [
                "oracle-compare",
                "--k", "2", "--n-f", "3", "--seeds", "2",
                "--grid-pitch", "500", "--z-pitch", "100",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "gap_%" in out
        assert "percentiles" in out
