import datetime as dt

import numpy as np
import pytest

from gapcast.errors import DataFormatError, NotEnoughDataError, ParameterDomainError
from gapcast.gap import DEFAULT_SEED_PARAMS, RatingParams, build_tapes
from gapcast.params import (
    LAMBDA_BOUNDS,
    PHI_BOUNDS,
    grid_points,
    objective,
    optimize,
    read_schedule,
    schedule_params,
    write_schedule,
)
from gapcast.records import Statistic
from gapcast.store import Dataset
from gapcast.synthetic import random_rates, synth_league

from conftest import make_record

SOT = Statistic.SHOTS_ON_TARGET


def history_of(records, stat=SOT):
    return build_tapes(Dataset.from_records(records), stat)


def test_single_match_sse():
    hist = history_of([make_record(on=(7, 2), shots=(10, 5))])
    for params in ((0.3, 0.2, 0.8), (1.5, 0.5, 0.5)):
        assert objective(params, hist).sse == 7**2 + 2**2


def test_out_of_domain_params():
    hist = history_of([make_record()])
    with pytest.raises(ParameterDomainError):
        objective((-0.5, 0.5, 0.5), hist)


def test_empty_history():
    with pytest.raises(NotEnoughDataError):
        optimize({})


def test_flat_objective_returns_seed():
    recs = [
        make_record(f"T{i}", f"T{j}", date=dt.date(2000, 8, 1) + dt.timedelta(days=k), on=(0, 0), shots=(0, 0),
                    season="2000-01")
        for k, (i, j) in enumerate([(0, 1), (1, 2), (2, 0), (1, 0)])
    ]
    report = optimize(history_of(recs), DEFAULT_SEED_PARAMS)
    assert report.params == DEFAULT_SEED_PARAMS
    assert report.sse == 0.0


@pytest.fixture(scope="module")
def hetero():
    rng = np.random.default_rng(2)
    lg = synth_league(n_teams=12, n_seasons=3, true_means=random_rates(12, rng, spread=0.5), seed=2)
    return Dataset.from_records(lg.records)


def test_optimum_beats_seed_and_grid(hetero):
    hist = build_tapes(hetero, SOT)
    report = optimize(hist)
    assert report.sse <= objective(DEFAULT_SEED_PARAMS, hist).sse
    assert all(report.sse <= objective(p, hist).sse for p in grid_points())
    lam, phi1, phi2 = report.params.as_tuple()
    assert LAMBDA_BOUNDS[0] <= lam <= LAMBDA_BOUNDS[1] and lam > 0
    assert PHI_BOUNDS[0] <= phi1 <= PHI_BOUNDS[1] and PHI_BOUNDS[0] <= phi2 <= PHI_BOUNDS[1]
    assert report.sse < objective((0.0, 0.5, 0.5), hist).sse


def test_two_team_constant_league_beats_random_points():
    rates = random_rates(2, np.random.default_rng(0), constant=True)
    lg = synth_league(n_teams=2, n_seasons=3, true_means=rates, seed=4)
    hist = build_tapes(Dataset.from_records(lg.records), SOT)
    best = optimize(hist).sse
    rng = np.random.default_rng(9)
    for _ in range(25):
        p = (rng.uniform(1e-3, 2.0), rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99))
        assert best <= objective(p, hist).sse


def test_parallel_grid_matches_serial(hetero):
    hist = build_tapes(hetero, SOT)
    assert optimize(hist, jobs=3) == optimize(hist, jobs=1)


class TestSchedule:
    def test_boundaries_and_training_window(self, hetero):
        sched = schedule_params(hetero, [SOT])
        assert [e.season for e in sched.entries] == ["2001-02", "2002-03"]
        first_season = sum(r.season == "2000-01" for r in hetero.records)
        assert sched.entries[0].n_matches == first_season
        assert (SOT, "2000-01") not in sched

    def test_single_season_store_gives_empty_schedule(self):
        lg = synth_league(n_teams=6, n_seasons=1, seed=3)
        assert len(schedule_params(Dataset.from_records(lg.records), [SOT])) == 0

    def test_independent_of_current_season_data(self, hetero):
        full = schedule_params(hetero, [SOT])
        # keep only the opening day of the final season
        last = "2002-03"
        first_day = min(r.date for r in hetero.records if r.season == last)
        partial = hetero.truncated(first_day)
        assert schedule_params(partial, [SOT])[(SOT, last)] == full[(SOT, last)]

    def test_deterministic_and_round_trip(self, hetero, tmp_path):
        a = schedule_params(hetero, [SOT, Statistic.GOALS])
        b = schedule_params(hetero, [SOT, Statistic.GOALS])
        assert a.entries == b.entries
        assert a.statistics() == [Statistic.GOALS, SOT]
        path = tmp_path / "schedule.csv"
        write_schedule(a, path)
        assert read_schedule(path).entries == a.entries

    def test_bad_header(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataFormatError):
            read_schedule(path)

    def test_four_statistics_four_blocks(self, synth3):
        sched = synth3[2]
        assert len(sched.statistics()) == 4
        assert isinstance(sched[(SOT, "2001-02")], RatingParams)
