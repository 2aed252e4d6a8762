"""Command-line front end.

Exit codes: 0 success, 1 data error, 2 usage or configuration error.
Data goes to ``--out`` (or stdout); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from typing import Dict, List

import numpy as np

from gridcast import snapshot
from gridcast.adaptive import AdaptiveForecaster, forecast, update
from gridcast.config import RunConfig, default_text
from gridcast.csvio import read_windows, write_windows
from gridcast.errors import ConfigError, GridcastError, NoData
from gridcast.harness import (
    PersistenceForecaster,
    RecurrentForecaster,
    ScenarioKind,
    StressScenario,
    apply_scenario,
    evaluate,
    figure_rows,
    long_csv,
    per_line_csv,
    rank_score,
    reports_to_csv,
    sweep,
)
from gridcast.quality import compute_global_rms
from gridcast.recurrent import RecurrentConfig
from gridcast.synthgen import generate_lines
from gridcast.timeseries import Flag, SeriesWindow, TimeGrid, stack_windows

log = logging.getLogger("gridcast")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


# --- helpers ----------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value)
    for flag, key in getattr(args, "_flag_keys", ()):
        value = getattr(args, flag, None)
        if value is not None:
            cfg.set(key, str(value))
    return cfg


def _grid(cfg: RunConfig) -> TimeGrid:
    g = cfg.section("grid")
    return TimeGrid(int(g["origin_epoch_s"]), int(g["step_s"]))


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _read_lines(path, grid: TimeGrid):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            windows = read_windows(fh, grid)
    except OSError as exc:
        raise NoData(f"cannot read {path}: {exc}") from exc
    if not windows:
        raise NoData(f"no usable rows in {path}")
    return list(windows.values())


def _input_lines(args, cfg: RunConfig, grid: TimeGrid):
    if args.input:
        return _read_lines(args.input, grid)
    gen = cfg.generator()
    if gen.step_s != grid.step_s:
        raise ConfigError("generator.step_s must equal grid.step_s when generating input")
    return generate_lines(gen, int(cfg.values["harness.lines"]))


def _forecasters(names: str, cfg: RunConfig, tau_d: int):
    params = cfg.smoothing(86400 // tau_d)
    out = []
    for name in (n.strip() for n in names.split(",") if n.strip()):
        if name == "persistence":
            out.append(PersistenceForecaster())
        elif name == "adaptive":
            out.append(AdaptiveForecaster(params))
        elif name in ("recurrent", "recurrent-raw"):
            rc = RecurrentConfig(tau_d=tau_d, horizon=params.horizon,
                                 n_days=int(cfg.values["harness.n_days"]),
                                 filtered=name == "recurrent")
            out.append(RecurrentForecaster(rc))
        else:
            raise ConfigError(f"unknown model {name!r}")
    if not out:
        raise ConfigError("no models selected")
    return out


def _evaluate_all(lines, cfg: RunConfig, horizon: int, tau_d: int, models: str):
    split = float(cfg.values["harness.split"])
    _, values, flags = stack_windows(lines)
    s = max(1, int(np.floor(split * values.shape[0] + 1e-9)))
    train = [SeriesWindow(0, values[:s, j], flags[:s, j]) for j in range(values.shape[1])]
    stats = compute_global_rms(train, **cfg.quality_factors())
    return [evaluate(f, lines, horizon, split, stats) for f in _forecasters(models, cfg, tau_d)]


def _write_reports(args, cfg, reports):
    timing = bool(cfg.values["harness.with_timing"]) or args.with_timing
    ranks = rank_score(reports) if timing and len(reports) >= 2 else None
    for r in reports:
        log.info("%s: rmse=%.6g elapsed=%.3fs predictions=%d skipped=%d",
                 r.name, r.aggregate_rmse, r.elapsed_s, r.n_predictions, r.n_skipped)
    with _output(args.out) as fh:
        fh.write(reports_to_csv(reports, with_timing=timing, rankings=ranks))
    if getattr(args, "per_line", None):
        with _output(args.per_line) as fh:
            fh.write(per_line_csv(reports))


# --- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    gen = cfg.generator()
    lines = generate_lines(gen, int(cfg.values["harness.lines"]))
    grid = TimeGrid(int(cfg.values["grid.origin_epoch_s"]), gen.step_s)
    with _output(args.out) as fh:
        write_windows(lines, grid, fh)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    grid = _grid(cfg)
    lines = _read_lines(args.input, grid)
    stats = compute_global_rms(lines, **cfg.quality_factors())
    start, values, flags = stack_windows(lines)
    numeric = np.where(flags == Flag.PRESENT, values, np.nan)
    model = AdaptiveForecaster(cfg.smoothing(grid.step_s))
    model.fit(numeric, stats, flags, [w.line_id for w in lines])
    meta = {
        "origin_epoch_s": grid.origin_epoch_s,
        "step_s": grid.step_s,
        "next_index": start + values.shape[0],
    }
    snapshot.save(model.state, args.snapshot, meta)
    if args.stats:
        with _output(args.stats) as fh:
            fh.write(f"global_rms = {stats.global_rms!r}\n")
            for key, value in cfg.quality_factors().items():
                fh.write(f"{key} = {value}\n")
    log.info("trained %d lines over %d steps", len(lines), values.shape[0])
    return EXIT_OK


def cmd_forecast(args) -> int:
    _load_config(args)  # validates --config/--set even though nothing here is tunable
    state, meta = snapshot.load(args.snapshot)
    grid = TimeGrid(int(meta["origin_epoch_s"]), int(meta["step_s"]))
    next_index = int(meta["next_index"])
    horizon = args.horizon or state.params.horizon
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    column = {lid: j for j, lid in enumerate(state.line_ids)}
    windows = _read_lines(args.input, grid) if args.input else []
    for w in windows:
        if w.line_id not in column:
            log.warning("line %s not in snapshot; skipped", w.line_id)
    windows = [w for w in windows if w.line_id in column]
    end = max([w.end_index for w in windows], default=next_index)
    if windows and min(w.start_index for w in windows) < next_index:
        log.warning("ignoring rows before index %d (already absorbed by the snapshot)", next_index)
    span = max(0, end - next_index)
    block = np.full((span, state.n_lines), np.nan)
    for w in windows:
        lo = max(w.start_index, next_index)
        if lo >= w.end_index:
            continue
        a = lo - w.start_index
        vals = np.where(w.flags[a:] == Flag.PRESENT, w.values[a:], np.nan)
        block[lo - next_index:w.end_index - next_index, column[w.line_id]] = vals

    order = sorted(range(state.n_lines), key=lambda j: state.line_ids[j])
    rows: Dict[int, List[str]] = {j: [] for j in order}

    def emit(origin: int) -> None:
        preds = [forecast(state, h) for h in range(1, horizon + 1)]
        for j in order:
            for h in range(1, horizon + 1):
                rows[j].append(f"{state.line_ids[j]},{origin},{h},{float(preds[h - 1][j])!r}\n")

    if span == 0:
        emit(next_index - 1)
    for k in range(span):
        update(state, block[k])
        if args.all_origins or k == span - 1:
            emit(next_index + k)
    with _output(args.out) as fh:
        fh.write("line_id,origin_index,horizon,value\n")
        for j in order:
            fh.writelines(rows[j])
    if args.save_snapshot:
        snapshot.save(state, args.save_snapshot, dict(meta, next_index=next_index + span))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    grid = _grid(cfg)
    lines = _input_lines(args, cfg, grid)
    models = args.models or str(cfg.values["harness.models"])
    reports = _evaluate_all(lines, cfg, cfg.smoothing(grid.step_s).horizon, grid.steps_per_day, models)
    _write_reports(args, cfg, reports)
    return EXIT_OK


def cmd_stress(args) -> int:
    cfg = _load_config(args)
    grid = _grid(cfg)
    lines = _input_lines(args, cfg, grid)
    scenario = StressScenario(ScenarioKind(args.kind), args.intensity, args.seed)
    mutated = apply_scenario(lines, scenario, block_len=grid.steps_per_day)
    models = args.models or str(cfg.values["harness.models"])
    reports = _evaluate_all(mutated, cfg, cfg.smoothing(grid.step_s).horizon, grid.steps_per_day, models)
    for r in reports:
        if not np.isfinite(r.aggregate_rmse):
            raise NoData(f"{r.name} produced a non-finite RMSE under {args.kind}")
    _write_reports(args, cfg, reports)
    return EXIT_OK


def _parse_grid(items) -> Dict[str, list]:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid expects name=v1,v2,..., got {item!r}")
        name, values = item.split("=", 1)
        key = "adaptive." + name.strip()
        probe = RunConfig()
        parsed = []
        for v in values.split(","):
            probe.set(key, v)
            parsed.append(probe.values[key])
        grid[name.strip()] = parsed
    return grid


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    grid = _grid(cfg)
    lines = _input_lines(args, cfg, grid)
    reports = sweep(_parse_grid(args.grid), lines, cfg.smoothing(grid.step_s).horizon,
                    float(cfg.values["harness.split"]), cfg.smoothing(grid.step_s))
    timing = bool(cfg.values["harness.with_timing"]) or args.with_timing
    with _output(args.out) as fh:
        fh.write(reports_to_csv(reports, with_timing=timing))
    return EXIT_OK


def cmd_figures(args) -> int:
    cfg = _load_config(args)
    grid = _grid(cfg)
    lines = _input_lines(args, cfg, grid)
    by_id = {w.line_id: w for w in lines}
    line = by_id.get(args.line) if args.line else lines[0]
    if line is None:
        raise NoData(f"line {args.line!r} not found")
    tau_d = grid.steps_per_day
    n_days = int(cfg.values["harness.n_days"])
    horizon = args.horizon or cfg.smoothing(grid.step_s).horizon
    lo = n_days * tau_d + 1
    if len(line) <= lo + horizon:
        raise NoData(f"line needs more than {n_days} days plus the horizon")
    stats = compute_global_rms([line.slice(0, lo)], **cfg.quality_factors())
    rc = RecurrentConfig(tau_d=tau_d, horizon=horizon, n_days=n_days)
    rows = figure_rows(line, rc, stats, lo, len(line))
    with _output(args.out) as fh:
        fh.write(long_csv(rows))
    return EXIT_OK


def cmd_defaults(args) -> int:
    with _output(args.out) as fh:
        fh.write(default_text())
    return EXIT_OK


# --- argument parsing -------------------------------------------------------


def _common(p: argparse.ArgumentParser, flag_keys=()) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.set_defaults(_flag_keys=tuple(flag_keys))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcast",
        description="Short-term grid flow forecasting from recurrent fluctuations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic series as CSV")
    _common(p, [("seed", "generator.seed"), ("days", "generator.days"),
                ("step", "generator.step_s"), ("lines", "harness.lines")])
    p.add_argument("--seed", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--step", type=int, help="step in seconds")
    p.add_argument("--lines", type=int, help="number of independent lines")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit the streaming engine and write a snapshot")
    _common(p, [("step", "grid.step_s")])
    p.add_argument("--input", required=True, help="training CSV")
    p.add_argument("--snapshot", required=True, help="snapshot file to write")
    p.add_argument("--stats", help="also write the validity statistics here")
    p.add_argument("--step", type=int, help="grid step in seconds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="stream new data through a snapshot and forecast")
    _common(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--input", help="new data CSV (optional)")
    p.add_argument("--horizon", type=int, help="steps ahead (default: trained horizon)")
    p.add_argument("--all-origins", action="store_true",
                   help="forecast after every new step, not just the last")
    p.add_argument("--save-snapshot", help="write the updated state here")
    p.set_defaults(func=cmd_forecast)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "score forecasters on a CSV or generated lines"),
        ("stress", cmd_stress, "score forecasters on mutated data"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p, [("step", "grid.step_s")])
        p.add_argument("--input", help="CSV input (default: generate from config)")
        p.add_argument("--models", help="comma list: persistence,adaptive,recurrent,recurrent-raw")
        p.add_argument("--per-line", help="write per-line RMSE CSV here")
        p.add_argument("--with-timing", action="store_true",
                       help="include elapsed time and 2:1 rank scores (not reproducible)")
        p.add_argument("--step", type=int, help="grid step in seconds")
        if name == "stress":
            p.add_argument("--kind", required=True, choices=[k.value for k in ScenarioKind])
            p.add_argument("--intensity", type=float, default=0.05)
            p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="grid search over adaptive parameters")
    _common(p, [("step", "grid.step_s")])
    p.add_argument("--input")
    p.add_argument("--grid", action="append", required=True, metavar="NAME=V1,V2",
                   help="parameter values, e.g. r_d=0.05,0.15,0.3 (repeatable)")
    p.add_argument("--with-timing", action="store_true")
    p.add_argument("--step", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figures", help="long-format CSV of fluctuations and last-day forecasts")
    _common(p, [("step", "grid.step_s")])
    p.add_argument("--input")
    p.add_argument("--line", help="line id (default: first)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--step", type=int)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("defaults", help="print every configuration key with its default")
    p.add_argument("--out")
    p.set_defaults(verbose=False)
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gridcast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GridcastError, ValueError, OSError) as exc:
        print(f"gridcast: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
