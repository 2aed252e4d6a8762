import itertools
import math

import numpy as np
import pytest

from gridcast.adaptive import AdaptiveForecaster, SmoothingParams
from gridcast.errors import ConfigError, NoEvaluablePoints
from gridcast.harness import (
    EvalReport,
    PersistenceForecaster,
    RecordingForecaster,
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
    rmse,
    sweep,
)
from gridcast.quality import ValidityStats
from gridcast.recurrent import RecurrentConfig
from gridcast.synthgen import GeneratorConfig, generate, generate_lines
from gridcast.timeseries import Flag, SeriesWindow


def win(values, line_id="x"):
    return SeriesWindow.from_array(np.asarray(values, dtype=float), line_id=line_id)


def report(name, rmse_, elapsed):
    return EvalReport(name, {}, rmse_, elapsed, 1, 0)


# --- evaluate ---------------------------------------------------------------


def test_persistence_constant_series_is_exact():
    r = evaluate(PersistenceForecaster(), [win([4.0] * 50)], horizon=3, split=0.5)
    assert r.aggregate_rmse == 0.0


def test_persistence_on_ramp():
    r = evaluate(PersistenceForecaster(), [win(np.arange(100.0))], horizon=12, split=0.5)
    assert r.aggregate_rmse == 12.0
    assert r.n_predictions == 100 - 50 - 12


def test_rmse_twenty_point_hand_case():
    y = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4,
         6, 2, 6, 4, 3, 3, 8, 3, 2, 7, 9]
    r = evaluate(PersistenceForecaster(), [win(y)], horizon=1, split=10)
    # spreadsheet: error at each of the 20 origins is y[t+1] - y[t]
    errors = [y[t + 1] - y[t] for t in range(10, 30)]
    assert errors == [3, 1, -2, 2, -6, -1, 1, 5, -4, 2, -4, 4, -2, -1, 0, 5, -5, -1, 5, 2]
    assert r.n_predictions == 20
    assert r.aggregate_rmse == math.sqrt(sum(e * e for e in errors) / 20)
    assert r.per_line_rmse == {"x": r.aggregate_rmse}


def test_skipped_targets_are_counted():
    y = np.arange(40.0)
    y[[25, 30, 31]] = np.nan
    r = evaluate(PersistenceForecaster(), [win(y), win(np.arange(40.0), "z")], horizon=2, split=20)
    origins = 40 - 2 - 20
    assert r.n_predictions + r.n_skipped == 2 * origins
    assert r.n_skipped == 3
    assert r.aggregate_rmse >= 0


def test_evaluate_errors():
    with pytest.raises(NoEvaluablePoints):
        evaluate(PersistenceForecaster(), [win(np.arange(10.0))], horizon=12, split=0.5)
    y = np.r_[np.arange(10.0), np.full(10, np.nan)]
    with pytest.raises(NoEvaluablePoints):
        evaluate(PersistenceForecaster(), [win(y)], horizon=1, split=10)
    with pytest.raises(ConfigError):
        evaluate(PersistenceForecaster(), [win(np.arange(10.0))], horizon=0)
    with pytest.raises(ConfigError):
        evaluate(PersistenceForecaster(), [win(np.arange(10.0))], horizon=1, split=1.5)


def test_harness_never_feeds_past_the_origin():
    lines = generate_lines(GeneratorConfig(days=3), 2)
    rec = RecordingForecaster(AdaptiveForecaster(SmoothingParams(tau_d=96, horizon=4, monitor_lag=4)))
    origins = []
    evaluate(rec, lines, horizon=4, split=0.5, on_forecast=lambda t, p: origins.append(t))
    assert len(origins) == len(rec.seen_at_forecast)
    for origin, seen in zip(origins, rec.seen_at_forecast):
        assert seen == origin + 1  # rows 0..origin, nothing later


def test_persistence_holds_through_gaps():
    f = PersistenceForecaster().fit(np.array([[1.0, np.nan]]), None)
    f.update(np.array([np.nan, 2.0]))
    assert f.forecast(3).tolist() == [1.0, 2.0]


def test_recurrent_beats_persistence_on_fixture():
    w = generate(GeneratorConfig(seed=1))
    tau = 96
    stats = ValidityStats(float(np.sqrt(np.nanmean(w.values[:7 * tau] ** 2))))
    rec = evaluate(RecurrentForecaster(RecurrentConfig(tau_d=tau, horizon=4)), [w], 4, 7 * tau, stats)
    per = evaluate(PersistenceForecaster(), [w], 4, 7 * tau, stats)
    assert rec.aggregate_rmse < per.aggregate_rmse


def test_rmse_helper():
    assert rmse([1.0, 2.0], [1.0, 4.0]) == math.sqrt(2.0)
    assert rmse([1.0, 2.0], [np.nan, 4.0]) == 2.0
    with pytest.raises(NoEvaluablePoints):
        rmse([1.0], [np.nan])


# --- scenarios --------------------------------------------------------------


@pytest.mark.parametrize("kind", list(ScenarioKind))
def test_zero_intensity_is_identity(kind):
    lines = generate_lines(GeneratorConfig(days=3), 3)
    out = apply_scenario(lines, StressScenario(kind, 0.0, seed=1), block_len=96)
    assert len(out) == len(lines) and all(a == b for a, b in zip(out, lines))


def test_drop_points_exact_count():
    w = win(np.arange(1.0, 1001.0))
    out = apply_scenario([w], StressScenario(ScenarioKind.DROP_POINTS, 0.05, seed=3))[0]
    assert int((out.flags == Flag.MISSING).sum()) == 50
    assert len(out) == 1000


def test_inject_outliers_in_equal_thirds():
    w = win(np.arange(1.0, 1001.0))
    out = apply_scenario([w], StressScenario("InjectOutliers", 0.03, seed=3))[0]
    changed = out.values != w.values
    changed |= out.flags != w.flags
    assert changed.sum() == 30
    assert (out.flags == Flag.NONNUMERIC).sum() == 10
    assert (out.values == 0.0).sum() == 10
    assert (np.abs(out.values) > 1e5).sum() == 10


def test_shuffle_preserves_blocks():
    w = win(np.repeat(np.arange(10.0), 5))
    out = apply_scenario([w], StressScenario(ScenarioKind.SHUFFLE_SEGMENTS, 0.5, seed=2), block_len=5)[0]
    blocks = sorted(tuple(out.values[k:k + 5]) for k in range(0, 50, 5))
    assert blocks == sorted(tuple(w.values[k:k + 5]) for k in range(0, 50, 5))
    assert not np.array_equal(out.values, w.values)


def test_resize_grid_changes_line_count():
    lines = generate_lines(GeneratorConfig(days=1), 10)
    out = apply_scenario(lines, StressScenario(ScenarioKind.RESIZE_GRID, 0.2, seed=4))
    assert abs(len(out) - len(lines)) == 2


@pytest.mark.parametrize("kind", list(ScenarioKind))
def test_scenarios_are_pure_and_deterministic(kind):
    lines = generate_lines(GeneratorConfig(days=3), 4)
    copies = [SeriesWindow(w.start_index, w.values.copy(), w.flags.copy(), w.line_id) for w in lines]
    sc = StressScenario(kind, 0.3, seed=11)
    a = apply_scenario(lines, sc, block_len=96)
    b = apply_scenario(lines, sc, block_len=96)
    assert all(x == y for x, y in zip(a, b)) and len(a) == len(b)
    assert all(x == y for x, y in zip(lines, copies))


def test_scenario_validation():
    with pytest.raises(ConfigError):
        StressScenario(ScenarioKind.DROP_POINTS, 1.5)
    with pytest.raises(ValueError):
        StressScenario("Explode", 0.1)


# --- ranking ----------------------------------------------------------------


def test_rank_dominant_entrant_wins():
    ranks = rank_score([report("B", 2.0, 2.0), report("A", 1.0, 1.0)])
    assert [r.name for r in ranks] == ["A", "B"]


def test_rank_two_to_one_weighting():
    a = report("A", 1.0, 2.0)  # accuracy rank 1, speed rank 2
    b = report("B", 2.0, 1.0)  # accuracy rank 2, speed rank 1
    ranks = rank_score([b, a])
    assert [(r.name, r.score) for r in ranks] == [("A", 4), ("B", 5)]


def test_rank_ties_enumerated():
    rmses = {"A": 1.0, "B": 2.0, "C": 3.0}
    ties = 0
    for perm in itertools.permutations([1, 2, 3]):
        speed = dict(zip("ABC", perm))
        reports = [report(n, rmses[n], float(speed[n])) for n in "CBA"]
        scores = {n: 2 * "ABC".index(n) + 2 + speed[n] for n in "ABC"}
        expected = sorted("ABC", key=lambda n: (scores[n], rmses[n]))
        got = rank_score(reports)
        assert [r.name for r in got] == expected
        assert {r.name: r.score for r in got} == scores
        ties += len(set(scores.values())) < 3
    assert ties > 0  # at least one assignment exercises the tie-break


def test_rank_needs_two():
    with pytest.raises(ConfigError):
        rank_score([report("A", 1.0, 1.0)])


def test_rank_shared_ranks_on_equal_values():
    ranks = rank_score([report("A", 1.0, 1.0), report("B", 1.0, 2.0)])
    assert [(r.name, r.accuracy_rank, r.speed_rank) for r in ranks] == [("A", 1, 1), ("B", 1, 2)]


# --- sweeps and CSV ---------------------------------------------------------

SMALL = SmoothingParams(tau_d=24, horizon=3, monitor_lag=3)


def small_lines():
    return generate_lines(GeneratorConfig(days=10, step_s=3600), 2)


def test_single_point_sweep_equals_evaluate():
    lines = small_lines()
    rows = sweep({"r_d": [0.3]}, lines, 3, 0.5, SMALL)
    direct = evaluate(AdaptiveForecaster(SmoothingParams(tau_d=24, horizon=3, monitor_lag=3, r_d=0.3)),
                      lines, 3, 0.5)
    assert len(rows) == 1
    assert rows[0].aggregate_rmse == direct.aggregate_rmse
    assert rows[0].params == {"r_d": 0.3}


def test_two_by_two_sweep():
    rows = sweep({"r_d": [0.1, 0.2], "r_g": [0.01, 0.05]}, small_lines(), 3, 0.5, SMALL)
    assert [r.params for r in rows] == [
        {"r_d": 0.1, "r_g": 0.01}, {"r_d": 0.1, "r_g": 0.05},
        {"r_d": 0.2, "r_g": 0.01}, {"r_d": 0.2, "r_g": 0.05},
    ]
    text = reports_to_csv(rows, with_timing=False)
    lines = text.splitlines()
    assert lines[0] == "name,r_d,r_g,horizon,aggregate_rmse,n_predictions,n_skipped"
    assert len(lines) == 5
    assert reports_to_csv(rows, with_timing=False) == text


def test_sweep_rejects_empty_grid():
    with pytest.raises(ConfigError):
        sweep({}, small_lines())
    with pytest.raises(ConfigError):
        sweep({"r_d": []}, small_lines())


@pytest.mark.slow
def test_stored_daily_rate_sits_on_flat_optimum():
    lines = generate_lines(GeneratorConfig(seed=2024, days=21, step_s=300), 10)
    grid = [0.05, 0.1, 0.15, 0.25, 0.4]
    rows = sweep({"r_d": grid}, lines, 12, 0.5)
    err = {r.params["r_d"]: r.aggregate_rmse for r in rows}
    best = min(err.values())
    assert err[SmoothingParams().r_d] <= 1.005 * best
    assert err[0.05] > best and err[0.4] > best


def test_csv_outputs():
    reps = [EvalReport("p", {"b": 2.0, "a": 1.0}, 1.5, 0.25, 10, 1, horizon=4),
            EvalReport("q", {"a": 3.0, "b": 0.5}, 2.5, 0.5, 10, 1, horizon=4)]
    text = reports_to_csv(reps, with_timing=True, rankings=rank_score(reps))
    assert text.splitlines()[1] == "p,4,1.5,10,1,0.250000,3,1,1"
    assert per_line_csv(reps).splitlines()[1:3] == ["p,a,1.0", "p,b,2.0"]


def test_figure_rows_long_format():
    w = generate(GeneratorConfig(days=8))
    tau = 96
    stats = ValidityStats(1.0)
    rc = RecurrentConfig(tau_d=tau, horizon=4)
    rows = figure_rows(w, rc, stats, 7 * tau + 1, len(w))
    series = {s for _, s, _ in rows}
    assert series == {"observed", "fluct_raw", "fluct_filtered", "composed_raw", "composed_filtered",
                      "forecast_persistence", "forecast_recurrent"}
    text = long_csv(rows)
    assert text.startswith("time_index,series,value\n")
    assert all(math.isfinite(v) for _, _, v in rows)
