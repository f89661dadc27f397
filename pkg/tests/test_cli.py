"""Command-line behavior: exit codes, precedence, and the full workflow."""

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from rtp_arb import FiveMinuteSample, PriceSeries, write_price_csv
from rtp_arb.cli import _assemble, _build_parser, run

UTC = timezone.utc


def write_series_csv(path, prices, year=2021):
    start = datetime(year, 1, 1, tzinfo=UTC)
    hours = [start + i * timedelta(hours=1) for i in range(len(prices))]
    write_price_csv(PriceSeries(hours, prices), path)
    return str(path)


def wave_csv(path, year=2021, days=6):
    return write_series_csv(path, ([1.0] * 12 + [5.0] * 12) * days, year)


@pytest.fixture
def clean_env(monkeypatch):
    monkeypatch.delenv("RTP_ARB_DATA_DIR", raising=False)


class TestExitCodes:
    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == 0
        assert "COMMAND" in capsys.readouterr().out

    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == 2

    def test_missing_subcommand_is_usage_error(self):
        assert run([]) == 2

    def test_missing_required_flag_is_usage_error(self):
        assert run(["train"]) == 2

    def test_missing_prices_file_is_runtime_error(self, tmp_path, capsys, clean_env):
        code = run(["train", "--prices", str(tmp_path / "missing.csv")])
        assert code == 1
        assert "missing.csv" in capsys.readouterr().err

    def test_invalid_battery_setting_is_runtime_error(self, tmp_path, capsys, clean_env):
        prices = wave_csv(tmp_path / "p.csv")
        code = run(["oracle", "--prices", prices, "--capacity-kwh", "0"])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestOracleCommand:
    def test_worked_example(self, tmp_path, capsys, clean_env):
        prices = write_series_csv(tmp_path / "three.csv", [3.0, 1.0, 5.0])
        cfg = tmp_path / "unit.cfg"
        cfg.write_text("capacity_kwh = 1\nrate_kw = 1\nwindow_hours = 1\n")
        code = run(["oracle", "--prices", prices, "--config", str(cfg)])
        assert code == 0
        out = capsys.readouterr().out
        assert "4.0" in out
        assert "2 hours" in out

    def test_flat_prices_worth_nothing(self, tmp_path, capsys, clean_env):
        prices = write_series_csv(tmp_path / "flat.csv", [2.0] * 30)
        assert run(["oracle", "--prices", prices]) == 0
        assert "0.0" in capsys.readouterr().out


class TestConfigPrecedence:
    def parse(self, argv):
        return _build_parser().parse_args(argv)

    def test_flag_beats_file_beats_default(self, tmp_path, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("capacity_kwh = 7.5\nseed = 4\n# a comment\n; another\n")
        args = self.parse(
            ["train", "--prices", "x.csv", "--config", str(cfg), "--capacity-kwh", "9.0"]
        )
        merged = _assemble(args)
        assert merged.capacity_kwh == 9.0
        assert merged.seed == 4
        assert merged.rate_kw == 5.0

    def test_defaults_without_file(self, clean_env):
        merged = _assemble(self.parse(["train", "--prices", "x.csv"]))
        assert merged.capacity_kwh == 13.5
        assert merged.window_hours == 48
        assert merged.steps == 200_000
        assert merged.years == (2015, 2016, 2017, 2018, 2019)

    def test_years_parsed_from_file(self, tmp_path, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("years = 2016,2017\n")
        merged = _assemble(self.parse(["fetch", "--config", str(cfg)]))
        assert merged.years == (2016, 2017)

    def test_unknown_key_rejected(self, tmp_path, capsys, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("capacity = 7\n")
        code = run(["oracle", "--prices", "x.csv", "--config", str(cfg)])
        assert code == 1
        assert "capacity" in capsys.readouterr().err

    def test_malformed_line_cites_number(self, tmp_path, capsys, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("capacity_kwh = 7\njust words\n")
        assert run(["oracle", "--prices", "x.csv", "--config", str(cfg)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys, clean_env):
        assert run(["oracle", "--prices", "x.csv", "--config", str(tmp_path / "no.cfg")]) == 1
        assert "no.cfg" in capsys.readouterr().err


class TestDataDirPrecedence:
    def parse(self, argv):
        return _build_parser().parse_args(argv)

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RTP_ARB_DATA_DIR", str(tmp_path / "env"))
        args = self.parse(["fetch", "--data-dir", str(tmp_path / "flag")])
        assert _assemble(args).data_dir == tmp_path / "flag"

    def test_env_beats_file(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RTP_ARB_DATA_DIR", str(tmp_path / "env"))
        cfg = tmp_path / "settings.cfg"
        cfg.write_text(f"data_dir = {tmp_path / 'file'}\n")
        args = self.parse(["fetch", "--config", str(cfg)])
        assert _assemble(args).data_dir == tmp_path / "env"

    def test_file_beats_default(self, tmp_path, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text(f"data_dir = {tmp_path / 'file'}\n")
        args = self.parse(["fetch", "--config", str(cfg)])
        assert _assemble(args).data_dir == tmp_path / "file"

    def test_builtin_default(self, clean_env):
        args = self.parse(["fetch"])
        assert _assemble(args).data_dir == Path.home() / ".local" / "share" / "rtp-arb"


class TestFetchCommand:
    def test_excluded_year_needs_force(self, tmp_path, capsys, clean_env):
        code = run(["fetch", "--year", "2020", "--data-dir", str(tmp_path)])
        assert code == 1
        assert "--force" in capsys.readouterr().err

    def test_no_years_configured(self, tmp_path, capsys, clean_env):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("years =\n")
        assert run(["fetch", "--config", str(cfg), "--data-dir", str(tmp_path)]) == 1
        assert "nothing to fetch" in capsys.readouterr().err

    def test_fetch_writes_cache(self, tmp_path, capsys, clean_env, monkeypatch):
        def fake_feed(start, end, endpoint):
            assert endpoint == "https://feed.test/api"
            out = []
            for hour in range(48):
                base = start + timedelta(hours=hour)
                out += [
                    FiveMinuteSample(base + timedelta(minutes=5 * i), float(hour % 24))
                    for i in range(12)
                ]
            return out

        monkeypatch.setattr("rtp_arb.cli.fetch_five_minute_feed", fake_feed)
        code = run(
            [
                "fetch",
                "--year",
                "2018",
                "--data-dir",
                str(tmp_path / "cache"),
                "--endpoint",
                "https://feed.test/api",
            ]
        )
        assert code == 0
        out_path = tmp_path / "cache" / "comed_2018.csv"
        assert out_path.exists()
        assert "2018: 48 hours" in capsys.readouterr().out
        from rtp_arb import read_price_csv

        series = read_price_csv(out_path)
        assert len(series) == 48
        assert series.prices[3] == 3.0


class TestWorkflow:
    TRAIN_FLAGS = [
        "--window-hours", "4",
        "--capacity-kwh", "4",
        "--rate-kw", "2",
        "--steps", "60",
        "--eval-every", "30",
        "--learning-starts", "8",
        "--update-every", "2",
        "--batch-size", "8",
        "--buffer-capacity", "64",
    ]

    def train(self, tmp_path, year, out_dir):
        prices = wave_csv(tmp_path / f"y{year}.csv", year=year)
        code = run(
            ["train", "--prices", prices, "--out-dir", str(out_dir), "--seed", "1"]
            + self.TRAIN_FLAGS
        )
        return code, prices

    def test_train_eval_cross_test_plot(self, tmp_path, capsys, clean_env):
        out_dir = tmp_path / "out"
        code, prices_2021 = self.train(tmp_path, 2021, out_dir)
        assert code == 0
        out = capsys.readouterr().out
        assert "trained on 2021" in out
        assert (out_dir / "agent_2021.ckpt").exists()
        assert (out_dir / "training_curves.csv").exists()
        assert (out_dir / "training_curves.svg").exists()

        code, prices_2022 = self.train(tmp_path, 2022, out_dir)
        assert code == 0
        capsys.readouterr()
        merged = (out_dir / "training_curves.csv").read_text()
        assert "2021," in merged and "2022," in merged

        code = run(
            [
                "eval",
                "--checkpoint",
                str(out_dir / "agent_2021.ckpt"),
                "--prices",
                prices_2021,
                "--day",
                "2021-01-02",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "greedy return" in out
        daily = (out_dir / "daily_policy.csv").read_text().rstrip("\n").split("\n")
        assert len(daily) == 25
        assert (out_dir / "daily_policy.svg").exists()

        manifest = out_dir / "manifest.csv"
        manifest.write_text(
            "year,checkpoint_path,prices_path\n"
            f"2021,agent_2021.ckpt,{Path(prices_2021).name}\n"
            f"2022,agent_2022.ckpt,{Path(prices_2022).name}\n"
        )
        (out_dir / Path(prices_2021).name).write_text(Path(prices_2021).read_text())
        (out_dir / Path(prices_2022).name).write_text(Path(prices_2022).read_text())
        code = run(["cross-test", "--manifest", str(manifest), "--out-dir", str(out_dir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "raw returns" in out
        ct = (out_dir / "cross_test.csv").read_text().rstrip("\n").split("\n")
        assert len(ct) == 1 + 4

        code = run(["plot", "--in", str(out_dir)])
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("wrote") == 3

    def test_eval_rejects_bad_day(self, tmp_path, capsys, clean_env):
        out_dir = tmp_path / "out"
        code, prices = self.train(tmp_path, 2021, out_dir)
        assert code == 0
        capsys.readouterr()
        code = run(
            [
                "eval",
                "--checkpoint",
                str(out_dir / "agent_2021.ckpt"),
                "--prices",
                prices,
                "--day",
                "January 2",
            ]
        )
        assert code == 1
        assert "YYYY-MM-DD" in capsys.readouterr().err


class TestManifestAndPlotErrors:
    def test_missing_manifest(self, tmp_path, capsys, clean_env):
        assert run(["cross-test", "--manifest", str(tmp_path / "m.csv")]) == 1
        assert "m.csv" in capsys.readouterr().err

    def test_manifest_bad_header(self, tmp_path, capsys, clean_env):
        m = tmp_path / "m.csv"
        m.write_text("year,ckpt,prices\n")
        assert run(["cross-test", "--manifest", str(m)]) == 1
        assert "row 1" in capsys.readouterr().err

    def test_manifest_bad_year(self, tmp_path, capsys, clean_env):
        m = tmp_path / "m.csv"
        m.write_text("year,checkpoint_path,prices_path\ntwenty,a.ckpt,p.csv\n")
        assert run(["cross-test", "--manifest", str(m)]) == 1
        assert "row 2" in capsys.readouterr().err

    def test_plot_missing_dir(self, tmp_path, capsys, clean_env):
        assert run(["plot", "--in", str(tmp_path / "nope")]) == 1
        assert "nope" in capsys.readouterr().err

    def test_plot_empty_dir(self, tmp_path, capsys, clean_env):
        d = tmp_path / "empty"
        d.mkdir()
        assert run(["plot", "--in", str(d)]) == 1
        assert "no result CSVs" in capsys.readouterr().err
