"""Command-line entry point tying the pipeline together.

Subcommands: ``fetch`` (feed to cached CSV), ``train`` (one agent on one
year), ``eval`` (greedy return of a checkpoint, optional daily dispatch
trace), ``cross-test`` (all agents on all years from a manifest),
``oracle`` (hindsight-optimal value of a series), ``plot`` (re-render SVGs
from result CSVs).

Every setting follows the same precedence: command-line flag, then config
file, then built-in default. The config file is flat ``key = value`` text;
``#`` starts a comment. Exit codes: 0 success, 1 runtime or data error,
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Callable

from .dqn import EpsilonSchedule, load_checkpoint, save_checkpoint
from .env import (
    DEFAULT_CAPACITY_KWH,
    DEFAULT_RATE_KW,
    DEFAULT_WINDOW_HOURS,
    Action,
    BatteryConfig,
)
from .errors import ConfigError, RtpArbError
from .experiment import (
    CROSS_TEST_CSV,
    DAILY_POLICY_CSV,
    DEFAULT_EVAL_EVERY,
    DEFAULT_TOTAL_STEPS,
    TRAINING_CURVES_CSV,
    Hyperparams,
    checkpoint_config,
    cross_test,
    daily_policy_trace,
    emit_outputs,
    evaluate_greedy,
    read_cross_test_csv,
    read_daily_policy_csv,
    read_training_curves_csv,
    render_daily_policy_svg,
    train_agent,
    write_cross_test_csv,
    write_daily_policy_csv,
    write_training_curves_csv,
)
from . import charts
from .ingest import (
    DEFAULT_ENDPOINT,
    aggregate_hourly,
    default_data_dir,
    fetch_five_minute_feed,
    read_price_csv,
    write_price_csv,
    year_csv_path,
)
from .oracle import hindsight_optimal

DEFAULT_YEARS = (2015, 2016, 2017, 2018, 2019)
#: Year excluded by default: real-time prices that year had irregularities
#: (briefly negative and near-zero for long stretches), so it would distort
#: comparisons. Fetchable anyway with --force.
EXCLUDED_YEAR = 2020


def _parse_years(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"years must be a comma-separated list of integers, got {text!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the pipeline with its effective value."""

    capacity_kwh: float = DEFAULT_CAPACITY_KWH
    rate_kw: float = DEFAULT_RATE_KW
    window_hours: int = DEFAULT_WINDOW_HOURS
    gamma: float = 0.99
    learning_rate: float = 1e-4
    batch_size: int = 32
    buffer_capacity: int = 200_000
    learning_starts: int = 1_000
    update_every: int = 4
    target_sync_every: int = 1_000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.1
    steps: int = DEFAULT_TOTAL_STEPS
    eval_every: int = DEFAULT_EVAL_EVERY
    seed: int = 0
    years: tuple[int, ...] = DEFAULT_YEARS
    endpoint: str = DEFAULT_ENDPOINT
    data_dir: Path = None  # type: ignore[assignment]  # resolved in _assemble
    out_dir: Path = Path("runs")

    def battery(self) -> BatteryConfig:
        return BatteryConfig(self.capacity_kwh, self.rate_kw, self.window_hours)

    def hyper(self) -> Hyperparams:
        return Hyperparams(
            gamma=self.gamma,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            learning_starts=self.learning_starts,
            update_every=self.update_every,
            target_sync_every=self.target_sync_every,
            epsilon=EpsilonSchedule(
                self.epsilon_start, self.epsilon_end, self.epsilon_decay_fraction
            ),
        )


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "capacity_kwh": float,
    "rate_kw": float,
    "window_hours": int,
    "gamma": float,
    "learning_rate": float,
    "batch_size": int,
    "buffer_capacity": int,
    "learning_starts": int,
    "update_every": int,
    "target_sync_every": int,
    "epsilon_start": float,
    "epsilon_end": float,
    "epsilon_decay_fraction": float,
    "steps": int,
    "eval_every": int,
    "seed": int,
    "years": _parse_years,
    "endpoint": str,
    "data_dir": str,
    "out_dir": str,
}


def _parse_config_file(path) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file does not exist: {p}")
    values: dict[str, str] = {}
    for line_no, raw in enumerate(p.read_text(encoding="utf-8").split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{p}: line {line_no}: expected 'key = value', got {line!r}")
        values[key.strip()] = val.strip()
    return values


def _assemble(args: argparse.Namespace) -> RunConfig:
    """Merge built-in defaults, config file, and flags (in rising precedence)."""
    values: dict[str, Any] = {}
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = _parse_config_file(args.config)
    for key, raw in file_values.items():
        if key not in _CONVERTERS:
            raise ConfigError(f"{args.config}: unknown config key {key!r}")
        try:
            values[key] = _CONVERTERS[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{args.config}: bad value for {key!r}: {raw!r}") from exc
    for key in _CONVERTERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    # The cache dir has an extra layer: flag beats RTP_ARB_DATA_DIR beats the
    # config file beats the built-in location.
    if getattr(args, "data_dir", None) is not None:
        data_dir = Path(args.data_dir)
    elif os.environ.get("RTP_ARB_DATA_DIR"):
        data_dir = default_data_dir()
    elif "data_dir" in values:
        data_dir = Path(values["data_dir"])
    else:
        data_dir = default_data_dir()
    values["data_dir"] = data_dir
    values["out_dir"] = Path(values.get("out_dir", "runs"))
    if "years" in values and not isinstance(values["years"], tuple):
        values["years"] = _parse_years(str(values["years"]))

    cfg = RunConfig(**values)
    cfg.battery()  # validate eagerly so bad settings fail before any work
    cfg.hyper()
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat key = value settings file")
    common.add_argument("--capacity-kwh", type=float, dest="capacity_kwh", help="battery capacity")
    common.add_argument("--rate-kw", type=float, dest="rate_kw", help="charge/discharge rate")
    common.add_argument("--window-hours", type=int, dest="window_hours", help="observed price window")
    common.add_argument("--data-dir", dest="data_dir", help="price CSV cache directory")
    common.add_argument("--out-dir", dest="out_dir", help="where results are written")

    parser = argparse.ArgumentParser(
        prog="rtp-arb",
        description="Battery arbitrage on hourly real-time prices: data, training, baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fetch", parents=[common], help="download a year of prices into the cache")
    p.add_argument("--year", type=int, help="calendar year (default: every configured year)")
    p.add_argument("--force", action="store_true", help="allow the excluded year 2020")
    p.add_argument("--endpoint", help="price feed base URL")

    p = sub.add_parser("train", parents=[common], help="train one agent on a price CSV")
    p.add_argument("--prices", required=True, help="hourly price CSV")
    p.add_argument("--steps", type=int, help="environment steps to train")
    p.add_argument("--eval-every", type=int, dest="eval_every", help="greedy evaluation cadence")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--gamma", type=float)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--buffer-capacity", type=int, dest="buffer_capacity")
    p.add_argument("--learning-starts", type=int, dest="learning_starts")
    p.add_argument("--update-every", type=int, dest="update_every")
    p.add_argument("--target-sync-every", type=int, dest="target_sync_every")
    p.add_argument("--epsilon-start", type=float, dest="epsilon_start")
    p.add_argument("--epsilon-end", type=float, dest="epsilon_end")
    p.add_argument("--epsilon-decay-fraction", type=float, dest="epsilon_decay_fraction")

    p = sub.add_parser("eval", parents=[common], help="greedy return of a checkpoint on a series")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--prices", required=True, help="hourly price CSV")
    p.add_argument("--day", help="also write the dispatch trace of this UTC day (YYYY-MM-DD)")

    p = sub.add_parser("cross-test", parents=[common], help="evaluate all agents on all years")
    p.add_argument(
        "--manifest",
        required=True,
        help="CSV with header year,checkpoint_path,prices_path; paths relative to it",
    )

    p = sub.add_parser("oracle", parents=[common], help="hindsight-optimal value of a series")
    p.add_argument("--prices", required=True, help="hourly price CSV")

    p = sub.add_parser("plot", parents=[common], help="re-render SVGs from result CSVs")
    p.add_argument("--in", dest="in_dir", required=True, help="directory holding result CSVs")
    return parser


def _cmd_fetch(cfg: RunConfig, args: argparse.Namespace) -> int:
    years = (args.year,) if args.year is not None else cfg.years
    if not years:
        raise ConfigError("nothing to fetch: pass --year or set years in the config")
    for year in years:
        if year == EXCLUDED_YEAR and not args.force:
            raise ConfigError(
                f"year {EXCLUDED_YEAR} is excluded by default (known price irregularities); "
                "pass --force to fetch it anyway"
            )
    cfg.data_dir.mkdir(parents=True, exist_ok=True)
    for year in years:
        start = datetime(year, 1, 1, tzinfo=timezone.utc)
        end = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
        samples = fetch_five_minute_feed(start, end, endpoint=cfg.endpoint)
        series, report = aggregate_hourly(samples)
        path = year_csv_path(cfg.data_dir, year)
        write_price_csv(series, path)
        print(
            f"{year}: {report.hours_emitted} hours -> {path} "
            f"({len(report.hours_interpolated)} interpolated, "
            f"min {report.samples_per_hour_min} samples/hour)"
        )
    return 0


def _cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    series = read_price_csv(args.prices)
    config = cfg.battery()
    curve, ckpt = train_agent(series, config, cfg.hyper(), cfg.steps, cfg.eval_every, cfg.seed)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = cfg.out_dir / f"agent_{curve.year}.ckpt"
    save_checkpoint(ckpt.net, ckpt.opt, ckpt.norm, ckpt.metadata, ckpt_path)

    # Merge with curves from earlier runs in the same output directory so a
    # year-by-year workflow accumulates one combined file.
    curves_path = cfg.out_dir / TRAINING_CURVES_CSV
    curves = [curve]
    if curves_path.exists():
        curves += [c for c in read_training_curves_csv(curves_path) if c.year != curve.year]
        curves.sort(key=lambda c: c.year)
    emit_outputs(curves, None, cfg.out_dir)

    best_step, best_ret = curve.best()
    print(f"trained on {curve.year}: best greedy return {best_ret:.1f} cents at step {best_step}")
    print(f"checkpoint: {ckpt_path}")
    print(f"curves: {curves_path}")
    return 0


def _cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    series = read_price_csv(args.prices)
    config = checkpoint_config(ckpt)
    ret = evaluate_greedy(ckpt, series, config)
    print(
        f"greedy return on {args.prices}: {ret:.1f} cents "
        f"(battery {config.capacity_kwh:g} kWh at {config.rate_kw:g} kW)"
    )
    if args.day is not None:
        try:
            day = date.fromisoformat(args.day)
        except ValueError as exc:
            raise ConfigError(f"--day must be YYYY-MM-DD, got {args.day!r}") from exc
        trace = daily_policy_trace(ckpt, series, config, day)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = cfg.out_dir / DAILY_POLICY_CSV
        write_daily_policy_csv(trace, csv_path)
        svg_path = render_daily_policy_svg(trace, cfg.out_dir / "daily_policy.svg")
        print(f"daily dispatch: {csv_path} and {svg_path}")
    return 0


def _read_manifest(path) -> list[tuple[int, Path, Path]]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"manifest does not exist: {p}")
    lines = p.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != "year,checkpoint_path,prices_path":
        raise ConfigError(f"{p}: row 1: expected header 'year,checkpoint_path,prices_path'")
    rows = []
    base = p.parent
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ConfigError(f"{p}: row {row_no}: expected 3 fields, got {len(parts)}")
        try:
            year = int(parts[0])
        except ValueError as exc:
            raise ConfigError(f"{p}: row {row_no}: bad year {parts[0]!r}") from exc
        rows.append((year, base / parts[1], base / parts[2]))
    return rows


def _cmd_cross_test(cfg: RunConfig, args: argparse.Namespace) -> int:
    rows = _read_manifest(args.manifest)
    checkpoints = {}
    series = {}
    for year, ckpt_path, prices_path in rows:
        checkpoints[year] = load_checkpoint(ckpt_path)
        series[year] = read_price_csv(prices_path)
    matrix = cross_test(checkpoints, series)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out_dir / CROSS_TEST_CSV
    write_cross_test_csv(matrix, csv_path)
    means = matrix.off_diagonal_means()
    svg_path = cfg.out_dir / "cross_test.svg"
    charts.bar_chart(
        [str(y) for y in matrix.years],
        [means[y] for y in matrix.years],
        "Mean normalized return outside the training year",
        "normalized return",
        svg_path,
    )

    head = "agent\\test" + "".join(f"{y:>12}" for y in matrix.years)
    print("raw returns (cents):")
    print(head)
    for i, agent_year in enumerate(matrix.years):
        cells = "".join(f"{matrix.raw[i, j]:12.1f}" for j in range(len(matrix.years)))
        print(f"{agent_year:>10}{cells}")
    for year in matrix.years:
        mean = means[year]
        print(f"agent {year}: mean normalized return in other years = {mean:.3f}")
    if matrix.suppressed_years:
        print(
            "normalization suppressed for "
            + ", ".join(str(y) for y in matrix.suppressed_years)
            + " (same-year return not positive)"
        )
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def _cmd_oracle(cfg: RunConfig, args: argparse.Namespace) -> int:
    series = read_price_csv(args.prices)
    plan = hindsight_optimal(series, cfg.battery())
    counts = Counter(plan.actions)
    print(f"hindsight optimal value: {plan.value!r} cents over {len(plan.actions)} hours")
    print(
        f"plan: {counts[Action.CHARGE]} charge, {counts[Action.DISCHARGE]} discharge, "
        f"{counts[Action.IDLE]} idle"
    )
    return 0


def _cmd_plot(cfg: RunConfig, args: argparse.Namespace) -> int:
    d = Path(args.in_dir)
    if not d.is_dir():
        raise ConfigError(f"--in directory does not exist: {d}")
    made = []

    curves_csv = d / TRAINING_CURVES_CSV
    if curves_csv.exists():
        curves = read_training_curves_csv(curves_csv)
        out = d / "training_curves.svg"
        charts.line_chart(
            [charts.Series(str(c.year), c.steps, c.returns) for c in curves],
            "Greedy return during training",
            "environment steps",
            "return (cents)",
            out,
        )
        made.append(out)

    ct_csv = d / CROSS_TEST_CSV
    if ct_csv.exists():
        matrix = read_cross_test_csv(ct_csv)
        means = matrix.off_diagonal_means()
        out = d / "cross_test.svg"
        charts.bar_chart(
            [str(y) for y in matrix.years],
            [means[y] for y in matrix.years],
            "Mean normalized return outside the training year",
            "normalized return",
            out,
        )
        made.append(out)

    dp_csv = d / DAILY_POLICY_CSV
    if dp_csv.exists():
        made.append(render_daily_policy_svg(read_daily_policy_csv(dp_csv), d / "daily_policy.svg"))

    if not made:
        raise ConfigError(
            f"no result CSVs found in {d} (looked for {TRAINING_CURVES_CSV}, "
            f"{CROSS_TEST_CSV}, {DAILY_POLICY_CSV})"
        )
    for path in made:
        print(f"wrote {path}")
    return 0


_DISPATCH = {
    "fetch": _cmd_fetch,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "cross-test": _cmd_cross_test,
    "oracle": _cmd_oracle,
    "plot": _cmd_plot,
}


def run(argv: list[str] | None = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return int(exc.code) if exc.code else 0
    try:
        cfg = _assemble(args)
        return _DISPATCH[args.command](cfg, args)
    except RtpArbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
