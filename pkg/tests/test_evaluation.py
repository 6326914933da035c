import csv

import numpy as np
import pytest

from gapcast.errors import NotEnoughDataError
from gapcast.evaluation import (
    Side,
    bootstrap_mean_ci,
    comparison_table,
    format_comparison,
    mae_table,
    ordering_matches,
    running_mean_baseline,
    observed_matrix,
    write_mae_csv,
    write_scatter_csv,
)
from gapcast.betting import gap_prediction_columns
from gapcast.records import ALL_STATISTICS, Statistic
from gapcast.store import Dataset
from gapcast.synthetic import random_rates, synth_league


class TestBootstrap:
    def test_identical_values(self):
        ci = bootstrap_mean_ci([2.5] * 50, replicates=100)
        assert (ci.lower, ci.point, ci.upper) == (2.5, 2.5, 2.5)

    def test_normal_width(self):
        x = np.random.default_rng(0).standard_normal(10_000)
        ci = bootstrap_mean_ci(x, replicates=10_000, seed=1)
        assert ci.upper - ci.lower == pytest.approx(2 * 1.96 / 100, rel=0.15)
        assert ci.lower <= ci.point <= ci.upper

    def test_deterministic(self):
        x = np.random.default_rng(1).exponential(size=300)
        assert bootstrap_mean_ci(x, 500, seed=7) == bootstrap_mean_ci(x, 500, seed=7)
        for chunk in (1000, 10**9):
            assert bootstrap_mean_ci(x, 500, seed=7, chunk_elements=chunk) == bootstrap_mean_ci(x, 500, seed=7)

    def test_too_few_values(self):
        for bad in ([], [1.0]):
            with pytest.raises(NotEnoughDataError):
                bootstrap_mean_ci(bad)


def test_running_mean_uses_earlier_days_only(synth3):
    dataset = synth3[0]
    obs = observed_matrix(dataset, Statistic.CORNERS)
    base = running_mean_baseline(dataset, obs)
    i = len(dataset) // 2
    rec = dataset.records[i]
    earlier = [j for j, r in enumerate(dataset.records) if r.league_id == rec.league_id and r.date < rec.date]
    assert base[i] == pytest.approx(obs[earlier].mean(axis=0))


def test_constant_statistic_gives_zero_error():
    rates = random_rates(6, np.random.default_rng(0), constant=True)
    lg = synth_league(n_teams=6, n_seasons=12, true_means=rates, noise="none", seed=2)
    dataset = Dataset.from_records(lg.records)
    schedule = {(Statistic.CORNERS, s): (0.4, 0.5, 0.5) for s in dataset.seasons}
    from gapcast.gap import RatingParams

    schedule = {k: RatingParams(*v) for k, v in schedule.items()}
    preds = gap_prediction_columns(dataset, schedule, [Statistic.CORNERS])
    last = np.array([r.season == dataset.seasons[-1] for r in dataset.records])
    reports = mae_table(dataset, preds, mask=last)
    assert all(r.mae_gap < 1e-6 and r.mae_baseline == 0.0 for r in reports)


def test_mae_table_layout_and_csv(synth3, tmp_path):
    dataset, _, schedule = synth3
    preds = gap_prediction_columns(dataset, schedule, ALL_STATISTICS)
    reports = mae_table(dataset, preds)
    assert [(r.side, r.statistic) for r in reports] == [(s, t) for s in Side for t in ALL_STATISTICS]
    assert all(r.n > 0 and r.mae_gap >= 0 and r.mae_baseline >= 0 for r in reports)
    full = mae_table(dataset, preds, baseline="full")
    assert [r.mae_gap for r in full] == [r.mae_gap for r in reports]
    write_mae_csv(reports, tmp_path / "mae.csv")
    assert len(list(csv.reader((tmp_path / "mae.csv").open()))) == 9
    n = write_scatter_csv(dataset, preds, tmp_path / "scatter.csv")
    assert n == sum(r.n for r in reports)


def test_mae_replay_is_bit_identical(synth3):
    dataset, _, schedule = synth3
    a = mae_table(dataset, gap_prediction_columns(dataset, schedule, ALL_STATISTICS))
    b = mae_table(dataset, gap_prediction_columns(dataset, schedule, ALL_STATISTICS))
    assert a == b


def test_synthetic_outcome_frequencies_match_model():
    lg = synth_league(n_teams=20, n_seasons=5, seed=8, spread=0.5)
    probs = lg.truth.probabilities
    counts = np.bincount([r.outcome.index for r in lg.records], minlength=3)
    n = len(lg.records)
    expected = probs.sum(axis=0)
    sd = np.sqrt((probs * (1 - probs)).sum(axis=0))
    assert np.all(np.abs(counts - expected) <= 2 * sd)
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert n == 5 * 20 * 19


def test_ordering_groups():
    assert ordering_matches(["A1", "A3", "A2", "A4", "A6", "A5", "A7", "A0"])
    assert not ordering_matches(["A3", "A1", "A2", "A4", "A6", "A5", "A7", "A0"])
    assert not ordering_matches(["A1", "A3", "A2"])


def test_comparison_table_without_data():
    rows = comparison_table()
    assert all(r.within_tolerance is None for r in rows)
    text = format_comparison(rows)
    assert "not run" in text and "18%" in text
