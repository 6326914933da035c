import csv
import json
import math

import numpy as np
import pytest

from gapcast.betting import (
    Side,
    Strategy,
    arbitrage_stakes,
    bin_by_overround,
    cumulative_profit,
    gap_prediction_columns,
    overround_bin_index,
    overround_distribution,
    run_backtest,
    select_bets,
    settle,
    summary_dict,
    walk_forward_forecasts,
    write_bets_csv,
    write_cumulative_csv,
    write_summary_json,
)
from gapcast.errors import NotEnoughDataError
from gapcast.ingest import OddsSummary
from gapcast.ordinal import Forecast, build_feature_table, combo_spec
from gapcast.records import ALL_STATISTICS


def odds_for(implied_home, implied_draw, implied_away):
    return OddsSummary(1 / implied_home, 1 / implied_draw, 1 / implied_away)


class TestSelectBets:
    def test_value_on_home(self):
        picks = select_bets(Forecast(0.40, 0.30, 0.30), odds_for(0.35, 0.30, 0.40))
        assert [p.side for p in picks] == [Side.HOME]

    def test_equality_is_not_value(self):
        o = OddsSummary(2.0, 4.0, 4.0)
        assert select_bets(Forecast(0.5, 0.25, 0.25), o) == []

    def test_both_sides(self):
        picks = select_bets(Forecast(0.52, 0.18, 0.30), odds_for(0.48, 0.20, 0.28))
        assert [p.side for p in picks] == [Side.HOME, Side.AWAY]
        assert all(p.kelly_fraction > 0 for p in picks)

    def test_never_draw(self):
        picks = select_bets(Forecast(0.1, 0.8, 0.1), odds_for(0.3, 0.3, 0.4))
        assert picks == []


@pytest.fixture(scope="module")
def table(synth3):
    dataset, _, schedule = synth3
    preds = gap_prediction_columns(dataset, schedule, ALL_STATISTICS)
    return build_feature_table(dataset, preds)


@pytest.fixture(scope="module")
def results(synth3, table):
    dataset = synth3[0]
    spec = combo_spec("B1", True)
    wf = walk_forward_forecasts(table, spec)
    return {s: run_backtest(dataset, spec, s, table=table, forecasts=wf) for s in Strategy}


def test_stake_normalisation(results):
    level, kelly = results[Strategy.LEVEL], results[Strategy.KELLY]
    assert level.n_bets > 0 and level.n_bets == kelly.n_bets
    assert all(b.stake == 1.0 for b in level.bets)
    assert abs(kelly.mean_stake - 1.0) <= 1e-9


def test_accounting_identity(results):
    for res in results.values():
        replay = math.fsum(settle(b.stake, b.decimal_odds, b.won) for b in res.bets)
        assert res.total_profit == replay
        assert res.mean_profit_pct == pytest.approx(100 * replay / res.total_stake)
        for b in res.bets:
            assert b.side in (Side.HOME, Side.AWAY)
            assert b.model_prob > b.implied_prob


def test_backtest_without_table(synth3, results):
    dataset, _, schedule = synth3
    res = run_backtest(dataset, combo_spec("B1", True), "level", schedule)
    assert res.bets == results[Strategy.LEVEL].bets


def test_observed_specs_rejected(synth3):
    with pytest.raises(ValueError):
        run_backtest(synth3[0], combo_spec("A1"), "level", synth3[2])


def test_days_without_training_produce_no_bets(table, results):
    wf = walk_forward_forecasts(table, combo_spec("B1", True))
    assert wf.days_skipped > 0
    first = min(b.date for b in results[Strategy.LEVEL].bets)
    assert first > min(table.dates).astype(object)


def test_not_refit_on_days_without_eligible_matches(table):
    spec = combo_spec("B0", True)
    wf = walk_forward_forecasts(table, spec, keep_models=True)
    match_days = {d.astype(object) for d in np.unique(table.dates)}
    assert set(wf.models) <= match_days
    assert len(wf.models) == wf.days_fitted


def test_single_side_option(synth3, table):
    spec = combo_spec("B1", True)
    both = run_backtest(synth3[0], spec, "kelly", table=table)
    single = run_backtest(synth3[0], spec, "kelly", table=table, both_sides=False)
    n_both = sum(b.both_sides for b in both.bets)
    assert single.n_bets == both.n_bets - n_both // 2
    assert not any(b.both_sides for b in single.bets)


class TestOverround:
    def test_bin_assignment(self):
        assert overround_bin_index(-1.0) == 0
        assert overround_bin_index(0.0) == 1
        assert overround_bin_index(2.5) == 2
        assert overround_bin_index(7.5) == 4

    def test_partition(self, results):
        res = results[Strategy.KELLY]
        bins = bin_by_overround(res, replicates=200)
        assert len(bins) == 5
        assert sum(b.count for b in bins) == res.n_bets
        for b in bins:
            if b.count:
                assert b.lower <= b.mean_overround < b.upper

    def test_empty_result(self, results):
        res = results[Strategy.LEVEL]
        empty = type(res)(res.strategy, res.spec, [])
        with pytest.raises(NotEnoughDataError):
            bin_by_overround(empty)

    def test_histogram_and_share(self, table):
        counts, edges, share = overround_distribution(table)
        ok = np.all(np.isfinite(table.max_odds), axis=1)
        assert counts.sum() == ok.sum()
        expected = np.mean(np.sum(1 / table.max_odds[ok], axis=1) < 1)
        assert share == pytest.approx(expected)

    def test_arbitrage_construction(self, table):
        ok = np.all(np.isfinite(table.max_odds), axis=1)
        rows = table.max_odds[ok]
        negative = rows[np.sum(1 / rows, axis=1) < 1]
        assert len(negative) > 0
        for odds in negative:
            stakes, ret = arbitrage_stakes(odds)
            payouts = stakes * odds
            assert ret > 0
            assert np.allclose(payouts, payouts[0])
            assert np.all(payouts > stakes.sum())


def test_cumulative_series(results):
    res = results[Strategy.KELLY]
    series = cumulative_profit(res.bets)
    assert series["ALL"][-1][1] == pytest.approx(res.total_profit)
    assert sum(s[-1][1] for k, s in series.items() if k != "ALL") == pytest.approx(res.total_profit)


def test_serialization(results, tmp_path):
    res = results[Strategy.KELLY]
    write_bets_csv(res, tmp_path / "bets.csv")
    rows = list(csv.DictReader((tmp_path / "bets.csv").open()))
    assert len(rows) == res.n_bets
    assert sum(float(r["profit"]) for r in rows) == pytest.approx(res.total_profit)
    write_cumulative_csv(res, tmp_path / "cum.csv")
    summary = summary_dict(res, replicates=200, bins=bin_by_overround(res, replicates=200))
    write_summary_json(summary, tmp_path / "summary.json")
    back = json.loads((tmp_path / "summary.json").read_text())
    assert back["n_bets"] == res.n_bets and back["strategy"] == "kelly"
    assert back["ci_lower"] <= back["mean_profit_pct"] <= back["ci_upper"]
    assert back["overround_bins"][0]["lower"] is None


def test_no_lookahead_spot_check(synth3, results):
    dataset, _, _ = synth3
    from gapcast.params import schedule_params

    days = sorted({b.date for b in results[Strategy.LEVEL].bets})
    cut = days[len(days) // 3]
    short = dataset.truncated(cut)
    sched = schedule_params(short, ALL_STATISTICS)
    res = run_backtest(short, combo_spec("B1", True), "level", sched)
    base = [b for b in results[Strategy.LEVEL].bets if b.date <= cut]
    assert res.bets == base
