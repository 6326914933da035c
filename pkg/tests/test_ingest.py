import datetime as dt
import logging

import pytest

from gapcast.errors import DataFormatError, InputError, NoOddsError
from gapcast.ingest import (
    EligibilityReason,
    best_odds,
    compute_eligibility,
    infer_season,
    parse_date,
    parse_league_csv,
    season_from_token,
)
from gapcast.records import MATCH_DATA_STATISTICS, MatchRecord, Outcome, Statistic
from gapcast.store import Dataset, ingest_directory, read_store, summarize, write_store

from conftest import make_record


ROW = "E0,{date},{home},{away},{hg},{ag},{ftr},14,9,5,3,{hc},4,2.10,3.30,3.60,2.05,3.40,3.75"


def row(date="19/08/00", home="Chelsea", away="West Ham", hg=2, ag=1, ftr="H", hc="6"):
    return ROW.format(date=date, home=home, away=away, hg=hg, ag=ag, ftr=ftr, hc=hc)


class TestParsing:
    def test_outcome_and_derived_off_target(self, write_csv):
        path = write_csv("E0_0001.csv", [row()])
        (rec,) = parse_league_csv(path, "E0")
        assert rec.outcome is Outcome.HOME_WIN
        assert rec.home_shots_off_target == 9
        assert rec.away_shots_off_target == 6
        assert rec.season == "2000-01"

    def test_blank_corner_cell_is_absent(self, write_csv):
        (rec,) = parse_league_csv(write_csv("E0_0001.csv", [row(hc="")]), "E0")
        assert rec.home_corners is None
        assert rec.stat(Statistic.CORNERS) is None
        assert not rec.has_stats(MATCH_DATA_STATISTICS)

    def test_rows_without_goals_are_skipped(self, write_csv, caplog):
        rows = [row(), row(date="26/08/00", hg="", ftr="")]
        with caplog.at_level(logging.WARNING):
            recs = parse_league_csv(write_csv("E0_0001.csv", rows), "E0")
        assert len(recs) == 1
        assert "missing goals" in caplog.text

    def test_chronological_order(self, write_csv):
        rows = [row(date="02/09/00", home="A", away="B"), row(date="19/08/00", home="C", away="D")]
        recs = parse_league_csv(write_csv("E0_0001.csv", rows), "E0")
        assert [r.date for r in recs] == sorted(r.date for r in recs)

    def test_result_mismatch_trusts_goals(self, write_csv):
        (rec,) = parse_league_csv(write_csv("E0_0001.csv", [row(ftr="A")]), "E0")
        assert rec.outcome is Outcome.HOME_WIN

    def test_odds_read_for_each_bookmaker(self, write_csv):
        (rec,) = parse_league_csv(write_csv("E0_0001.csv", [row()]), "E0")
        assert {o.bookmaker_id for o in rec.odds} == {"B365", "WH"}
        o = best_odds(rec)
        assert (o.max_home, o.max_draw, o.max_away) == (2.10, 3.40, 3.75)

    def test_no_header(self, write_csv):
        with pytest.raises(DataFormatError):
            parse_league_csv(write_csv("E0_0001.csv", ["1,2,3"], header="a,b,c"), "E0")

    def test_unreadable(self, tmp_path):
        with pytest.raises(InputError):
            parse_league_csv(tmp_path / "missing.csv", "E0")

    def test_latin1_file(self, tmp_path):
        from conftest import CSV_HEADER

        path = tmp_path / "SP1_0102.csv"
        path.write_bytes((CSV_HEADER + "\n" + row(date="01/09/01", home="Málaga") + "\n").encode("latin-1"))
        (rec,) = parse_league_csv(path, "SP1")
        assert rec.home_team == "Málaga"


@pytest.mark.parametrize(
    "token, season",
    [("0001", "2000-01"), ("9900", "1999-00"), ("2000-01", "2000-01"), ("2000_2001", "2000-01"), ("0002", None)],
)
def test_season_tokens(token, season):
    assert season_from_token(token) == season


def test_infer_season_from_parent(tmp_path):
    assert infer_season(tmp_path / "1819" / "E0.csv") == "2018-19"


@pytest.mark.parametrize("text", ["19/08/00", "19/08/2000", "2000-08-19"])
def test_parse_date(text):
    assert parse_date(text) == dt.date(2000, 8, 19)


def test_no_odds_error():
    with pytest.raises(NoOddsError):
        best_odds(make_record(odds=()))


def test_record_invariants():
    with pytest.raises(ValueError):
        make_record(shots=(3, 2), on=(5, 1))
    with pytest.raises(ValueError):
        make_record(hg=-1)


def season_of(n_teams, season="2001-02", league="E0", start=dt.date(2001, 8, 1)):
    """Double round robin with one match per day, in a fixed order."""
    teams = [f"T{i}" for i in range(n_teams)]
    recs, day = [], 0
    for leg in range(2):
        for i in teams:
            for j in teams:
                if i < j:
                    h, a = (i, j) if leg == 0 else (j, i)
                    recs.append(make_record(h, a, date=start + dt.timedelta(days=day), league=league, season=season))
                    day += 1
    return recs


class TestEligibility:
    def test_window_and_first_season(self):
        first = season_of(10, "2000-01", start=dt.date(2000, 8, 1))
        second = season_of(10, "2001-02")
        recs = first + second
        flags = compute_eligibility(recs)
        assert all(f.reason is EligibilityReason.FIRST_DATA_SEASON for f in flags[: len(first)])
        by_team: dict[str, list[int]] = {}
        for i, r in enumerate(second, start=len(first)):
            by_team.setdefault(r.home_team, []).append(i)
            by_team.setdefault(r.away_team, []).append(i)
        for team, idx in by_team.items():
            for pos, i in enumerate(idx):
                if recs[i].home_team != team:
                    continue
                f = flags[i]
                if pos < 6:
                    assert f.reason is EligibilityReason.HOME_TEAM_FEWER_THAN_7_PLAYED
                elif len(idx) - pos - 1 < 6:
                    assert f.reason is EligibilityReason.HOME_TEAM_FEWER_THAN_7_REMAINING
                else:
                    assert f.eligible

    def test_seventh_match_eligible(self):
        first = season_of(20, "2000-01", start=dt.date(2000, 8, 1))
        second = season_of(20, "2001-02")
        flags = compute_eligibility(first + second)
        # T5's home match against T19 is its 7th of 38 in the second season.
        idx = [i for i, r in enumerate(second) if "T5" in (r.home_team, r.away_team)]
        seventh = second[idx[6]]
        assert seventh.home_team == "T5"
        assert flags[len(first) + idx[6]].eligible

    def test_missing_stats(self):
        recs = season_of(10, "2000-01", start=dt.date(2000, 8, 1)) + [
            make_record("T0", "T1", corners=None, date=dt.date(2001, 9, 1))
        ]
        assert compute_eligibility(recs)[-1].reason is EligibilityReason.STATS_MISSING

    def test_short_season_has_no_eligible_matches(self):
        recs = season_of(10, "2000-01", start=dt.date(2000, 8, 1)) + season_of(6, "2001-02")
        flags = compute_eligibility(recs)
        assert not any(f.eligible for f in flags)


class TestStore:
    def test_round_trip_and_determinism(self, tmp_path, synth3):
        dataset = synth3[0]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_store(dataset, a)
        back = read_store(a)
        write_store(back, b)
        assert a.read_bytes() == b.read_bytes()
        assert back.records == dataset.records
        assert back.flags == dataset.flags

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"league_id": "E0"}\n')
        with pytest.raises(DataFormatError, match="bad.jsonl:1"):
            read_store(path)

    def test_missing_store(self, tmp_path):
        with pytest.raises(InputError):
            read_store(tmp_path / "nope.jsonl")

    def test_ingest_directory_and_summary(self, write_csv, tmp_path):
        write_csv("E0/0001.csv", [r.replace("E0,", "E0,", 1) for r in [row(), row(date="26/08/00", home="Leeds")]])
        write_csv("E0/0102.csv", [row(date="18/08/01")])
        write_csv("E0/dup_0102.csv", [row(date="18/08/01")])
        dataset, report = ingest_directory(tmp_path)
        assert report.files == 3 and report.duplicates == 1
        assert dataset.seasons == ["2000-01", "2001-02"]
        (summary,) = summarize(dataset)
        assert (summary.league_id, summary.matches, summary.with_match_data) == ("E0", 3, 3)
        assert summary.name == "English Premier League"

    def test_truncation_keeps_fixture_metadata(self, synth3):
        dataset = synth3[0]
        cut = dataset.records[len(dataset) // 2].date
        short = dataset.truncated(cut)
        assert all(r.date <= cut for r in short.records)
        assert short.season_teams == dataset.season_teams
        assert short.flags == dataset.flags[: len(short)]
