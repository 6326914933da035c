import csv
import json

import pytest

from gapcast.cli import EXIT_INPUT, EXIT_OK, main
from gapcast.store import read_store, write_store
from gapcast.synthetic import synth_store

from conftest import CSV_HEADER


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, synth3):
    out = tmp_path_factory.mktemp("run")
    write_store(synth3[0], out / "matches.jsonl")
    assert main(["optimize", "--out", str(out)]) == EXIT_OK
    return out


def test_empty_directory(tmp_path, capsys):
    (tmp_path / "raw").mkdir()
    code = main(["ingest", "--data-dir", str(tmp_path / "raw"), "--out", str(tmp_path)])
    assert code == EXIT_INPUT
    assert "expected layout" in capsys.readouterr().err


def test_ingest_is_byte_identical_on_rerun(tmp_path, capsys):
    raw = tmp_path / "raw" / "E0"
    raw.mkdir(parents=True)
    rows = [
        f"E0,{d:02d}/09/00,T{i},T{j},{i % 3},{j % 2},,12,9,5,4,6,3,2.1,3.3,3.5"
        for d, (i, j) in enumerate([(0, 1), (2, 3), (1, 2), (3, 0)], start=1)
    ]
    (raw / "0001.csv").write_text(CSV_HEADER.rsplit(",", 3)[0] + "\n" + "\n".join(rows) + "\n")
    args = ["ingest", "--data-dir", str(tmp_path / "raw"), "--out", str(tmp_path / "out")]
    assert main(args) == EXIT_OK
    first = (tmp_path / "out" / "matches.jsonl").read_bytes()
    assert main(args) == EXIT_OK
    assert (tmp_path / "out" / "matches.jsonl").read_bytes() == first
    summary = capsys.readouterr().out
    assert "English Premier League" in summary and "eligible" in summary


def test_optimize_outputs(workdir):
    rows = list(csv.DictReader((workdir / "schedule.csv").open()))
    assert {r["statistic"] for r in rows} == {"goals", "shots_on_target", "shots_off_target", "corners"}
    assert min(r["season"] for r in rows) == "2001-02"


def test_optimize_rerun_identical(workdir, tmp_path):
    (tmp_path / "matches.jsonl").write_bytes((workdir / "matches.jsonl").read_bytes())
    assert main(["optimize", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "schedule.csv").read_bytes() == (workdir / "schedule.csv").read_bytes()


def test_optimize_single_season(tmp_path, capsys):
    dataset, _ = synth_store(n_leagues=1, n_teams=6, n_seasons=1, seed=1)
    write_store(dataset, tmp_path / "matches.jsonl")
    assert main(["optimize", "--out", str(tmp_path)]) == EXIT_OK
    assert "schedule is empty" in capsys.readouterr().out
    assert len((tmp_path / "schedule.csv").read_text().splitlines()) == 1


def test_missing_store(tmp_path):
    assert main(["optimize", "--out", str(tmp_path)]) == EXIT_INPUT


def test_aic_tables(workdir):
    assert main(["aic", "--out", str(workdir), "--combos", "A1,A4,A0,B1,B8,B16"]) == EXIT_OK
    rows = {r["combo"]: r for r in csv.DictReader((workdir / "aic_observed.csv").open())}
    assert rows["A0"]["aic_without_odds"] == "0.0"
    assert rows["A1"]["on"] == "*" and rows["A4"]["off"] == ""
    predicted = {r["combo"]: r for r in csv.DictReader((workdir / "aic_predicted.csv").open())}
    assert set(predicted) == {"B1", "B8", "B0"}
    assert predicted["B0"]["aic_without_odds"] == "0.0"


def test_backtest_artifacts(workdir):
    code = main(["backtest", "--out", str(workdir), "--combos", "B1", "--strategy", "kelly", "--replicates", "200"])
    assert code == EXIT_OK
    summary = json.loads((workdir / "backtest" / "summary_B1_odds_kelly.json").read_text())
    assert abs(summary["mean_stake"] - 1.0) <= 1e-9
    assert len(summary["overround_bins"]) == 5
    assert (workdir / "backtest" / "overround_histogram.csv").exists()
    assert (workdir / "backtest" / "cumulative_B1_odds_kelly.csv").exists()


def test_backtest_rejects_observed(workdir):
    assert main(["backtest", "--out", str(workdir), "--combos", "A1"]) == EXIT_INPUT


def test_zero_bet_run(tmp_path):
    dataset, _ = synth_store(n_leagues=1, n_teams=6, n_seasons=2, seed=3)
    write_store(dataset, tmp_path / "matches.jsonl")
    assert main(["optimize", "--out", str(tmp_path)]) == EXIT_OK
    code = main(["backtest", "--out", str(tmp_path), "--combos", "B0", "--no-odds", "--strategy", "level"])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "backtest" / "summary_B0_level.json").read_text())
    assert summary["n_bets"] == 0 and summary["mean_profit_pct"] is None
    bets = (tmp_path / "backtest" / "bets_B0_level.csv").read_text().splitlines()
    assert len(bets) == 1


def test_mae_and_report(workdir, capsys):
    assert main(["mae", "--out", str(workdir)]) == EXIT_OK
    assert len((workdir / "mae.csv").read_text().splitlines()) == 9
    assert main(["report", "--out", str(workdir)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "AIC ordering" in out and "not guaranteed to be reproducible" in out
    assert (workdir / "comparison.csv").exists()


def test_synth_command(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--n-leagues", "2", "--n-seasons", "2"]) == EXIT_OK
    assert len(read_store(tmp_path / "matches.jsonl")) == 2 * 2 * 12 * 11


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["backtest", "--out", str(tmp_path), "--combos", "Z9"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["mae", "--stats", "fouls"])
    assert exc.value.code == 2
