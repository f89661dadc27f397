"""Training protocol: looped-year runs, curves, cross-year tests, outputs.

One agent is trained per calendar year of hourly prices. Training loops the
year episodically, pausing on a fixed cadence for a full-year greedy
evaluation; the sequence of those evaluations is the training curve, and the
parameters at the curve's maximum become the year's checkpoint. Trained
agents are then cross-tested on the other years, with each test return
normalized by the score of the agent trained on that test year. Results
land as CSV files plus SVG charts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import charts
from .dqn import (
    Checkpoint,
    EpsilonSchedule,
    ReplayBuffer,
    epsilon_at,
    push_transition,
    select_action,
    sync_target,
    train_step,
)
from .env import (
    HOUR,
    Action,
    BatteryConfig,
    PriceSeries,
    Transition,
    reset,
    step,
)
from .errors import ConfigError, TrainingDivergedError, ValidationError
from .network import AdamState, ObservationNormalizer, QNetwork, forward, init_network
from .ingest import TIMESTAMP_FORMAT

log = logging.getLogger(__name__)

TRAINING_CURVES_CSV = "training_curves.csv"
CROSS_TEST_CSV = "cross_test.csv"
DAILY_POLICY_CSV = "daily_policy.csv"

TRAINING_CURVES_HEADER = "year,step,greedy_return_cents"
CROSS_TEST_HEADER = "agent_year,test_year,raw_return_cents,normalized"
DAILY_POLICY_HEADER = "hour_start_utc,price_cents_per_kwh,action,charge_kwh_after"

DEFAULT_TOTAL_STEPS = 200_000
DEFAULT_EVAL_EVERY = 10_000


@dataclass(frozen=True)
class Hyperparams:
    """Learning knobs; the defaults are the ones the rest of the project uses."""

    gamma: float = 0.99
    learning_rate: float = 1e-4
    batch_size: int = 32
    buffer_capacity: int = 200_000
    learning_starts: int = 1_000
    update_every: int = 4
    target_sync_every: int = 1_000
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("batch_size", "buffer_capacity", "learning_starts", "update_every", "target_sync_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class TrainingCurve:
    """Greedy returns measured on a fixed cadence during one training run."""

    year: int
    points: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValidationError("training curve has no points")
        if self.points[0][0] != 0:
            raise ValidationError(f"curve must start at step 0, got {self.points[0][0]}")
        for (a, _), (b, _) in zip(self.points, self.points[1:]):
            if b <= a:
                raise ValidationError(f"curve steps must increase, got {a} then {b}")

    @property
    def steps(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.points)

    @property
    def returns(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.points)

    def best(self) -> tuple[int, float]:
        """(step, return) of the curve maximum; earliest step wins ties."""
        best_step, best_ret = self.points[0]
        for s, r in self.points[1:]:
            if r > best_ret:
                best_step, best_ret = s, r
        return best_step, best_ret


def greedy_rollout(
    net: QNetwork,
    norm: ObservationNormalizer,
    prices: PriceSeries,
    config: BatteryConfig,
) -> tuple[float, list[Action], list[float]]:
    """One full deterministic pass from an empty battery.

    Returns the episode return plus the per-step actions and post-action
    charge levels (both length M-1 for M prices).
    """
    state, obs = reset(prices, config)
    total = 0.0
    actions: list[Action] = []
    charges: list[float] = []
    done = False
    while not done:
        a = select_action(forward(net, obs, norm), 0.0)
        state, obs, r, done = step(state, a, prices, config)
        total += r
        actions.append(a)
        charges.append(state.charge_kwh)
    return total, actions, charges


def train_agent(
    prices: PriceSeries,
    config: BatteryConfig,
    hyper: Hyperparams,
    total_steps: int = DEFAULT_TOTAL_STEPS,
    eval_every: int = DEFAULT_EVAL_EVERY,
    seed: int = 0,
) -> tuple[TrainingCurve, Checkpoint]:
    """Train one agent on a looped year of prices.

    The series is replayed episodically (battery reset to empty each pass)
    for ``total_steps`` environment steps. Before any training and then
    every ``eval_every`` steps, a full-year greedy evaluation is recorded;
    the returned checkpoint holds the parameters behind the highest
    evaluation. Three independent random streams (weight init, exploration,
    replay sampling) derive from ``seed``, making runs bit-reproducible.

    On numerical divergence the raised error carries the partial curve.
    """
    if total_steps < 1 or eval_every < 1 or total_steps % eval_every != 0:
        raise ConfigError(
            f"total_steps ({total_steps}) must be a positive multiple of eval_every ({eval_every})"
        )
    init_ss, explore_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
    net = init_network(config.window_hours, init_ss)
    target = net.clone()
    opt = AdamState.for_network(net, hyper.learning_rate)
    norm = ObservationNormalizer.from_series(prices.prices, config.capacity_kwh)
    buffer = ReplayBuffer(hyper.buffer_capacity, config.window_hours + 1)
    explore_rng = np.random.default_rng(explore_ss)
    sample_rng = np.random.default_rng(sample_ss)

    year = prices.hours[0].year
    points: list[tuple[int, float]] = []
    best: tuple[float, int, QNetwork, AdamState] | None = None

    def evaluate(at_step: int) -> None:
        nonlocal best
        ret, _, _ = greedy_rollout(net, norm, prices, config)
        points.append((at_step, ret))
        if best is None or ret > best[0]:
            best = (ret, at_step, net.clone(), opt.clone())
        log.info("year %d step %d greedy return %.2f cents", year, at_step, ret)

    evaluate(0)
    state, obs = reset(prices, config)
    for k in range(total_steps):
        eps = epsilon_at(hyper.epsilon, k, total_steps)
        a = select_action(forward(net, obs, norm), eps, explore_rng)
        new_state, new_obs, r, done = step(state, a, prices, config)
        push_transition(buffer, Transition(obs, a, r, new_obs, done))
        state, obs = (new_state, new_obs) if not done else reset(prices, config)

        if k + 1 >= hyper.learning_starts and (k + 1) % hyper.update_every == 0:
            try:
                loss = train_step(
                    net, target, buffer, opt, hyper.batch_size, hyper.gamma, norm, sample_rng
                )
            except TrainingDivergedError as exc:
                exc.curve = TrainingCurve(year, tuple(points))
                raise
            if loss is not None and opt.step_count % hyper.target_sync_every == 0:
                sync_target(net, target)
        if (k + 1) % eval_every == 0:
            evaluate(k + 1)

    assert best is not None
    best_ret, best_step, best_net, best_opt = best
    curve = TrainingCurve(year, tuple(points))
    metadata = {
        "year": year,
        "step": best_step,
        "greedy_return_cents": best_ret,
        "seed": seed,
        "capacity_kwh": config.capacity_kwh,
        "rate_kw": config.rate_kw,
        "window_hours": config.window_hours,
        "total_steps": total_steps,
        "eval_every": eval_every,
    }
    return curve, Checkpoint(best_net, best_opt, norm, metadata)


def checkpoint_config(ckpt: Checkpoint) -> BatteryConfig:
    """Battery parameters a checkpoint was trained with, from its metadata."""
    try:
        return BatteryConfig(
            capacity_kwh=float(ckpt.metadata["capacity_kwh"]),
            rate_kw=float(ckpt.metadata["rate_kw"]),
            window_hours=int(ckpt.metadata["window_hours"]),
        )
    except KeyError as exc:
        raise ConfigError(f"checkpoint metadata lacks battery field {exc}") from exc


def evaluate_greedy(ckpt: Checkpoint, prices: PriceSeries, config: BatteryConfig) -> float:
    """Full-series greedy return of a saved agent, from an empty battery."""
    expected = config.window_hours + 1
    if ckpt.net.input_dim != expected:
        raise ConfigError(
            f"checkpoint expects observation width {ckpt.net.input_dim}, "
            f"config window needs {expected}"
        )
    total, _, _ = greedy_rollout(ckpt.net, ckpt.norm, prices, config)
    return total


@dataclass(frozen=True)
class CrossTestMatrix:
    """All agents evaluated on all years.

    ``raw`` holds returns in cents, rows indexed by agent year and columns
    by test year (same ordering). ``normalized`` divides each column by its
    same-year return; columns whose same-year return is not positive are
    suppressed (NaN) and listed in ``suppressed_years``.
    """

    years: tuple[int, ...]
    raw: np.ndarray
    normalized: np.ndarray
    suppressed_years: tuple[int, ...]

    def off_diagonal_means(self) -> dict[int, float]:
        """Per-agent mean normalized return over the other, unsuppressed years."""
        out: dict[int, float] = {}
        for i, year in enumerate(self.years):
            vals = [
                self.normalized[i, j]
                for j in range(len(self.years))
                if j != i and np.isfinite(self.normalized[i, j])
            ]
            out[year] = float(np.mean(vals)) if vals else float("nan")
        return out


def cross_test(
    checkpoints: Mapping[int, Checkpoint], series: Mapping[int, PriceSeries]
) -> CrossTestMatrix:
    """Evaluate every agent on every year and normalize by same-year returns."""
    if set(checkpoints) != set(series):
        raise ConfigError(
            f"checkpoint years {sorted(checkpoints)} do not match series years {sorted(series)}"
        )
    years = tuple(sorted(series))
    if len(years) < 2:
        raise ConfigError(f"cross-test needs at least 2 years, got {len(years)}")

    n = len(years)
    raw = np.empty((n, n))
    for i, agent_year in enumerate(years):
        ckpt = checkpoints[agent_year]
        config = checkpoint_config(ckpt)
        for j, test_year in enumerate(years):
            raw[i, j] = evaluate_greedy(ckpt, series[test_year], config)

    normalized = np.full((n, n), np.nan)
    suppressed = []
    for j, test_year in enumerate(years):
        same_year = raw[j, j]
        if same_year > 0.0:
            normalized[:, j] = raw[:, j] / same_year
        else:
            suppressed.append(test_year)
            log.warning(
                "year %d same-year return %.3f cents is not positive; "
                "normalization suppressed for that column",
                test_year,
                same_year,
            )
    return CrossTestMatrix(years, raw, normalized, tuple(suppressed))


@dataclass(frozen=True)
class DailyPolicyTrace:
    """One day of greedy dispatch: 24 hourly prices, actions, and charges."""

    hours: tuple[datetime, ...]
    prices: tuple[float, ...]
    actions: tuple[Action, ...]
    charge_after: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.hours)
        if n == 0 or n % 24 != 0:
            raise ValidationError(f"daily trace needs whole days of 24 rows, got {n}")
        if not len(self.prices) == len(self.actions) == len(self.charge_after) == n:
            raise ValidationError("daily trace fields are not the same length")


def daily_policy_trace(
    ckpt: Checkpoint, prices: PriceSeries, config: BatteryConfig, day: date
) -> DailyPolicyTrace:
    """Greedy dispatch restricted to one UTC day of the series.

    The rollout still covers the whole series (the policy sees full price
    history and carries charge into the day); only the 24 rows of ``day``
    are returned. The final series hour has no action, so a day touching it
    is rejected.
    """
    if ckpt.net.input_dim != config.window_hours + 1:
        raise ConfigError(
            f"checkpoint expects observation width {ckpt.net.input_dim}, "
            f"config window needs {config.window_hours + 1}"
        )
    first = prices.index_of(datetime.combine(day, dtime(), tzinfo=timezone.utc))
    last = first + 23
    if last > len(prices) - 2:
        raise ValidationError(
            f"day {day.isoformat()} is not fully covered by dispatchable hours of {prices!r}"
        )
    _, actions, charges = greedy_rollout(ckpt.net, ckpt.norm, prices, config)
    hours = prices.hours[first : last + 1]
    return DailyPolicyTrace(
        hours=tuple(hours),
        prices=tuple(float(p) for p in prices.prices[first : last + 1]),
        actions=tuple(actions[first : last + 1]),
        charge_after=tuple(charges[first : last + 1]),
    )


def _write_lines(path: Path, lines: Sequence[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_training_curves_csv(curves: Sequence[TrainingCurve], path) -> None:
    lines = [TRAINING_CURVES_HEADER]
    for curve in curves:
        for s, r in curve.points:
            lines.append(f"{curve.year},{s},{r!r}")
    _write_lines(Path(path), lines)


def read_training_curves_csv(path) -> list[TrainingCurve]:
    rows = _read_rows(path, TRAINING_CURVES_HEADER, 3)
    by_year: dict[int, list[tuple[int, float]]] = {}
    for row_no, (year_s, step_s, ret_s) in rows:
        try:
            by_year.setdefault(int(year_s), []).append((int(step_s), float(ret_s)))
        except ValueError as exc:
            raise ValidationError(f"{path}: row {row_no}: bad numeric field") from exc
    return [TrainingCurve(year, tuple(pts)) for year, pts in sorted(by_year.items())]


def write_cross_test_csv(matrix: CrossTestMatrix, path) -> None:
    lines = [CROSS_TEST_HEADER]
    for i, agent_year in enumerate(matrix.years):
        for j, test_year in enumerate(matrix.years):
            norm = matrix.normalized[i, j]
            norm_s = repr(float(norm)) if np.isfinite(norm) else ""
            lines.append(f"{agent_year},{test_year},{float(matrix.raw[i, j])!r},{norm_s}")
    _write_lines(Path(path), lines)


def read_cross_test_csv(path) -> CrossTestMatrix:
    rows = _read_rows(path, CROSS_TEST_HEADER, 4)
    raw_map: dict[tuple[int, int], float] = {}
    norm_map: dict[tuple[int, int], float] = {}
    for row_no, (agent_s, test_s, raw_s, norm_s) in rows:
        try:
            key = (int(agent_s), int(test_s))
            raw_map[key] = float(raw_s)
            norm_map[key] = float(norm_s) if norm_s else float("nan")
        except ValueError as exc:
            raise ValidationError(f"{path}: row {row_no}: bad numeric field") from exc
    years = tuple(sorted({a for a, _ in raw_map}))
    n = len(years)
    if set(raw_map) != {(a, t) for a in years for t in years}:
        raise ValidationError(f"{path}: cross-test grid is not complete over {years}")
    raw = np.array([[raw_map[(a, t)] for t in years] for a in years])
    normalized = np.array([[norm_map[(a, t)] for t in years] for a in years])
    suppressed = tuple(t for j, t in enumerate(years) if not np.isfinite(normalized[:, j]).any())
    return CrossTestMatrix(years, raw, normalized, suppressed)


def write_daily_policy_csv(trace: DailyPolicyTrace, path) -> None:
    lines = [DAILY_POLICY_HEADER]
    for ts, price, action, charge in zip(
        trace.hours, trace.prices, trace.actions, trace.charge_after
    ):
        lines.append(f"{ts.strftime(TIMESTAMP_FORMAT)},{price!r},{action},{charge!r}")
    _write_lines(Path(path), lines)


def read_daily_policy_csv(path) -> DailyPolicyTrace:
    rows = _read_rows(path, DAILY_POLICY_HEADER, 4)
    hours = []
    prices = []
    actions = []
    charges = []
    for row_no, (ts_s, price_s, action_s, charge_s) in rows:
        try:
            hours.append(datetime.strptime(ts_s, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc))
        except ValueError as exc:
            raise ValidationError(f"{path}: row {row_no}: bad timestamp {ts_s!r}") from exc
        try:
            actions.append(Action[action_s.upper()])
        except KeyError as exc:
            raise ValidationError(f"{path}: row {row_no}: unknown action {action_s!r}") from exc
        try:
            prices.append(float(price_s))
            charges.append(float(charge_s))
        except ValueError as exc:
            raise ValidationError(f"{path}: row {row_no}: bad numeric field") from exc
    return DailyPolicyTrace(tuple(hours), tuple(prices), tuple(actions), tuple(charges))


def _read_rows(path, header: str, n_fields: int) -> list[tuple[int, list[str]]]:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"file does not exist: {p}")
    lines = p.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != header:
        got = lines[0] if lines else ""
        raise ValidationError(f"{p}: row 1: expected header {header!r}, got {got!r}")
    out = []
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n_fields:
            raise ValidationError(f"{p}: row {row_no}: expected {n_fields} fields, got {len(parts)}")
        out.append((row_no, parts))
    return out


def emit_outputs(
    curves: Sequence[TrainingCurve],
    matrix: CrossTestMatrix | None,
    out_dir,
    daily: DailyPolicyTrace | None = None,
) -> list[Path]:
    """Write every available result as CSV plus an SVG rendering.

    Always emits the training curves; the cross-test matrix and the daily
    dispatch trace are optional. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    curves_csv = out / TRAINING_CURVES_CSV
    write_training_curves_csv(curves, curves_csv)
    written.append(curves_csv)
    curves_svg = out / "training_curves.svg"
    charts.line_chart(
        [charts.Series(str(c.year), c.steps, c.returns) for c in curves],
        "Greedy return during training",
        "environment steps",
        "return (cents)",
        curves_svg,
    )
    written.append(curves_svg)

    if matrix is not None:
        ct_csv = out / CROSS_TEST_CSV
        write_cross_test_csv(matrix, ct_csv)
        written.append(ct_csv)
        means = matrix.off_diagonal_means()
        ct_svg = out / "cross_test.svg"
        charts.bar_chart(
            [str(y) for y in matrix.years],
            [means[y] for y in matrix.years],
            "Mean normalized return outside the training year",
            "normalized return",
            ct_svg,
        )
        written.append(ct_svg)

    if daily is not None:
        dp_csv = out / DAILY_POLICY_CSV
        write_daily_policy_csv(daily, dp_csv)
        written.append(dp_csv)
        written.append(render_daily_policy_svg(daily, out / "daily_policy.svg"))
    return written


def render_daily_policy_svg(trace: DailyPolicyTrace, path) -> Path:
    """Step chart of one day: price level plus battery charge, hour by hour."""
    hours_axis = list(range(len(trace.hours)))
    marks = "".join(str(a)[0].upper() for a in trace.actions)
    charts.line_chart(
        [
            charts.Series("price (c/kWh)", hours_axis, trace.prices),
            charts.Series("charge (kWh)", hours_axis, trace.charge_after),
        ],
        f"Dispatch on {trace.hours[0].date().isoformat()} [{marks}]",
        "hour (UTC)",
        "price / charge",
        path,
        step=True,
    )
    return Path(path)
