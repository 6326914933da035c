"""Canonical match store: one JSON object per line, one line per match.

Line fields, in order::

    league_id, season, date (ISO), home_team, away_team,
    home_goals, away_goals, outcome ("H"/"D"/"A"),
    home_shots, away_shots, home_shots_on_target, away_shots_on_target,
    home_corners, away_corners            (integers or null),
    odds          list of [bookmaker_id, home, draw, away],
    eligible      bool,
    eligibility   reason code (see EligibilityReason)

Shots off target are not stored; they are always derived from total shots and
shots on target.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataFormatError, InputError
from .ingest import (
    EligibilityFlag,
    EligibilityReason,
    IngestConfig,
    compute_eligibility,
    default_config,
    parse_league_csv,
)
from .records import MATCH_DATA_STATISTICS, BookmakerOdds, MatchRecord

logger = logging.getLogger(__name__)

_STAT_FIELDS = (
    "home_shots",
    "away_shots",
    "home_shots_on_target",
    "away_shots_on_target",
    "home_corners",
    "away_corners",
)


@dataclass
class Dataset:
    """Chronologically ordered records plus their fixture-derived metadata.

    ``flags`` and ``season_teams`` are computed from complete fixture lists and
    are kept unchanged by :meth:`truncated`, mirroring the fact that a
    season's fixtures are published before it starts.
    """

    records: list[MatchRecord]
    flags: list[EligibilityFlag]
    season_teams: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.flags) != len(self.records):
            raise ValueError("flags and records differ in length")
        if not self.season_teams:
            self.season_teams = season_memberships(self.records)

    @classmethod
    def from_records(
        cls,
        records: Iterable[MatchRecord],
        stat_set=MATCH_DATA_STATISTICS,
        first_season: str | None = None,
    ) -> "Dataset":
        ordered = sort_records(records)
        return cls(ordered, compute_eligibility(ordered, stat_set, first_season))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def leagues(self) -> list[str]:
        return sorted({r.league_id for r in self.records})

    @property
    def seasons(self) -> list[str]:
        return sorted({r.season for r in self.records})

    def truncated(self, last_date: dt.date) -> "Dataset":
        """Dataset restricted to matches played on or before ``last_date``."""
        keep = [i for i, r in enumerate(self.records) if r.date <= last_date]
        return Dataset(
            [self.records[i] for i in keep],
            [self.flags[i] for i in keep],
            dict(self.season_teams),
        )

    def subset(self, leagues: Sequence[str]) -> "Dataset":
        wanted = set(leagues)
        keep = [i for i, r in enumerate(self.records) if r.league_id in wanted]
        teams = {k: v for k, v in self.season_teams.items() if k[0] in wanted}
        return Dataset([self.records[i] for i in keep], [self.flags[i] for i in keep], teams)


def sort_records(records: Iterable[MatchRecord]) -> list[MatchRecord]:
    # Stable: keeps file order within (date, league).
    return sorted(records, key=lambda r: (r.date, r.league_id))


def season_memberships(records: Iterable[MatchRecord]) -> dict[tuple[str, str], frozenset[str]]:
    teams: dict[tuple[str, str], set[str]] = defaultdict(set)
    for rec in records:
        teams[(rec.league_id, rec.season)].update((rec.home_team, rec.away_team))
    return {k: frozenset(v) for k, v in teams.items()}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def record_to_dict(record: MatchRecord, flag: EligibilityFlag | None = None) -> dict:
    out = {
        "league_id": record.league_id,
        "season": record.season,
        "date": record.date.isoformat(),
        "home_team": record.home_team,
        "away_team": record.away_team,
        "home_goals": record.full_time_home_goals,
        "away_goals": record.full_time_away_goals,
        "outcome": record.outcome.value,
    }
    for name in _STAT_FIELDS:
        out[name] = getattr(record, name)
    out["odds"] = [[o.bookmaker_id, o.home_odds, o.draw_odds, o.away_odds] for o in record.odds]
    if flag is not None:
        out["eligible"] = flag.eligible
        out["eligibility"] = flag.reason.value
    return out


def record_from_dict(obj: dict) -> tuple[MatchRecord, EligibilityFlag | None]:
    try:
        record = MatchRecord(
            league_id=obj["league_id"],
            season=obj["season"],
            date=dt.date.fromisoformat(obj["date"]),
            home_team=obj["home_team"],
            away_team=obj["away_team"],
            full_time_home_goals=int(obj["home_goals"]),
            full_time_away_goals=int(obj["away_goals"]),
            odds=tuple(BookmakerOdds(b, float(h), float(d), float(a)) for b, h, d, a in obj.get("odds", [])),
            **{name: obj.get(name) for name in _STAT_FIELDS},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed store line: {exc}") from exc
    if "outcome" in obj and obj["outcome"] != record.outcome.value:
        raise DataFormatError(f"outcome disagrees with goals in {record.match_id}")
    flag = EligibilityFlag(EligibilityReason(obj["eligibility"])) if "eligibility" in obj else None
    return record, flag


def write_store(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec, flag in zip(dataset.records, dataset.flags):
            fh.write(json.dumps(record_to_dict(rec, flag), ensure_ascii=False))
            fh.write("\n")


def read_store(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise InputError(f"match store not found: {path}")
    records, flags = [], []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
            try:
                rec, flag = record_from_dict(obj)
            except DataFormatError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
            records.append(rec)
            flags.append(flag)
    if any(f is None for f in flags):
        return Dataset.from_records(records)
    return Dataset(records, flags)


# ---------------------------------------------------------------------------
# Raw directory ingestion
# ---------------------------------------------------------------------------


def league_from_filename(path: Path, config: IngestConfig) -> str:
    """Known league code in the file name or a parent folder, else the first name token."""
    tokens = [t for t in re.split(r"[_\- .()]+", path.stem) if t]
    for token in tokens + [p.name for p in path.parents]:
        if token in config.leagues:
            return token
    return tokens[0] if tokens else path.stem


@dataclass
class IngestReport:
    files: int = 0
    failures: list[str] = field(default_factory=list)
    duplicates: int = 0


def ingest_directory(
    data_dir: str | Path,
    leagues: Sequence[str] | None = None,
    config: IngestConfig | None = None,
    min_season: str | None = None,
    season_override: str | None = None,
) -> tuple[Dataset, IngestReport]:
    """Parse every CSV below ``data_dir`` into one eligibility-flagged dataset."""
    config = config or default_config()
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise InputError(f"data directory not found: {data_dir}")
    report = IngestReport()
    seen: set[str] = set()
    records: list[MatchRecord] = []
    for path in sorted(data_dir.rglob("*.csv")):
        league = league_from_filename(path, config)
        if leagues and league not in leagues:
            continue
        try:
            parsed = parse_league_csv(path, league, season=season_override, config=config)
        except (DataFormatError, InputError) as exc:
            report.failures.append(str(exc))
            logger.error("%s", exc)
            continue
        report.files += 1
        for rec in parsed:
            if min_season is not None and rec.season < min_season:
                continue
            if rec.match_id in seen:
                report.duplicates += 1
                continue
            seen.add(rec.match_id)
            records.append(rec)
    return Dataset.from_records(records), report


@dataclass(frozen=True)
class LeagueSummary:
    league_id: str
    name: str
    matches: int
    with_match_data: int
    eligible: int


def summarize(dataset: Dataset, config: IngestConfig | None = None) -> list[LeagueSummary]:
    config = config or default_config()
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0])
    for rec, flag in zip(dataset.records, dataset.flags):
        row = counts[rec.league_id]
        row[0] += 1
        row[1] += rec.has_stats(MATCH_DATA_STATISTICS)
        row[2] += flag.eligible
    return [
        LeagueSummary(code, config.league(code).name, *counts[code]) for code in sorted(counts)
    ]
