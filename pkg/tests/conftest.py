import datetime as dt
import sys

import pytest

from gapcast.params import schedule_params
from gapcast.records import ALL_STATISTICS, BookmakerOdds, MatchRecord
from gapcast.synthetic import synth_store

CSV_HEADER = "Div,Date,HomeTeam,AwayTeam,FTHG,FTAG,FTR,HS,AS,HST,AST,HC,AC,B365H,B365D,B365A,WHH,WHD,WHA"


def make_record(
    home="Alpha", away="Beta", hg=1, ag=0, date=dt.date(2001, 9, 1), league="E0", season="2001-02",
    shots=(10, 8), on=(5, 3), corners=(6, 4), odds=((2.0, 3.4, 4.0),),
) -> MatchRecord:
    return MatchRecord(
        league_id=league, season=season, date=date, home_team=home, away_team=away,
        full_time_home_goals=hg, full_time_away_goals=ag,
        home_shots=shots[0] if shots else None, away_shots=shots[1] if shots else None,
        home_shots_on_target=on[0] if on else None, away_shots_on_target=on[1] if on else None,
        home_corners=corners[0] if corners else None, away_corners=corners[1] if corners else None,
        odds=tuple(BookmakerOdds(f"BK{i}", *o) for i, o in enumerate(odds)),
    )


@pytest.fixture(scope="session")
def synth3():
    """Three-tier, five-season synthetic pyramid with its parameter schedule."""
    dataset, truth = synth_store(n_leagues=3, n_teams=12, n_seasons=5, seed=11)
    schedule = schedule_params(dataset, ALL_STATISTICS)
    return dataset, truth, schedule


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, rows, header=CSV_HEADER):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join([header, *rows]) + "\n")
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
