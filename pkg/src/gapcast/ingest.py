"""Parsing of football-data.co.uk CSV files, odds aggregation and eligibility.

The column mapping, the list of bookmaker odds prefixes, the league pyramid
and the team alias table all live in ``data/football_data.json``; adding a
bookmaker or an alias is a config change only.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import functools
import io
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataFormatError, InputError, NoOddsError
from .records import (
    MATCH_DATA_STATISTICS,
    BookmakerOdds,
    MatchRecord,
    Outcome,
    season_label,
    season_start_year,
)

logger = logging.getLogger(__name__)

_REQUIRED_FIELDS = ("date", "home_team", "away_team", "home_goals", "away_goals")
_DATE_FORMATS = ("%d/%m/%Y", "%d/%m/%y", "%Y-%m-%d")


@dataclass(frozen=True)
class LeagueInfo:
    league_id: str
    name: str
    pyramid: str
    tier: int


@dataclass(frozen=True)
class IngestConfig:
    columns: Mapping[str, tuple[str, ...]]
    bookmakers: tuple[str, ...]
    leagues: Mapping[str, LeagueInfo]
    team_aliases: Mapping[str, Mapping[str, str]]

    @classmethod
    def from_dict(cls, raw: Mapping, include_closing: bool = False) -> "IngestConfig":
        bookmakers = list(raw["bookmakers"])
        if include_closing:
            bookmakers += raw.get("closing_bookmakers", [])
        leagues = {
            code: LeagueInfo(code, item["name"], item["pyramid"], int(item["tier"]))
            for code, item in raw.get("leagues", {}).items()
        }
        return cls(
            columns={k: tuple(v) for k, v in raw["columns"].items()},
            bookmakers=tuple(bookmakers),
            leagues=leagues,
            team_aliases=raw.get("team_aliases", {}),
        )

    @classmethod
    def load(cls, path: str | Path | None = None, include_closing: bool = False) -> "IngestConfig":
        if path is None:
            text = resources.files("gapcast.data").joinpath("football_data.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_dict(json.loads(text), include_closing=include_closing)

    def league(self, league_id: str) -> LeagueInfo:
        # Unknown codes form a pyramid of their own.
        return self.leagues.get(league_id, LeagueInfo(league_id, league_id, league_id, 1))

    def canonical_team(self, name: str, league_id: str) -> str:
        name = " ".join(name.split())
        for scope in (league_id, "*"):
            table = self.team_aliases.get(scope, {})
            if name in table:
                return table[name]
        return name


@functools.lru_cache(maxsize=1)
def default_config() -> IngestConfig:
    return IngestConfig.load()


# ---------------------------------------------------------------------------
# Season inference
# ---------------------------------------------------------------------------

_COMPACT_SEASON = re.compile(r"^(\d{2})(\d{2})$")
_LONG_SEASON = re.compile(r"(\d{4})[-_](\d{2}|\d{4})(?!\d)")


def _two_digit_year(yy: int) -> int:
    return 2000 + yy if yy < 50 else 1900 + yy


def season_from_token(token: str) -> str | None:
    """Recognise "0001", "2000-01" or "2000_2001" style season tokens."""
    m = _COMPACT_SEASON.match(token)
    if m:
        first, second = int(m.group(1)), int(m.group(2))
        if (first + 1) % 100 == second:
            return season_label(_two_digit_year(first))
        return None
    m = _LONG_SEASON.search(token)
    if m:
        start = int(m.group(1))
        end = int(m.group(2)) % 100
        if (start + 1) % 100 == end:
            return season_label(start)
    return None


def infer_season(path: str | Path) -> str | None:
    """Season label from a file path, looking at the stem first, then parents."""
    path = Path(path)
    candidates = [path.stem, *re.split(r"[_\- .]+", path.stem)]
    candidates += [p.name for p in path.parents]
    for token in candidates:
        season = season_from_token(token)
        if season:
            return season
    return None


def season_from_dates(dates: Iterable[dt.date]) -> str:
    first = min(dates)
    return season_label(first.year if first.month >= 7 else first.year - 1)


def date_in_season(date: dt.date, season: str) -> bool:
    start = season_start_year(season)
    return dt.date(start, 7, 1) <= date <= dt.date(start + 1, 8, 31)


# ---------------------------------------------------------------------------
# CSV parsing
# ---------------------------------------------------------------------------


def _read_text(path: Path) -> str:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def parse_date(text: str) -> dt.date:
    text = text.strip()
    for fmt in _DATE_FORMATS:
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {text!r}")


def _count(text: str | None) -> int | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if value < 0 or value != int(value):
        return None
    return int(value)


def _odds(text: str | None) -> float | None:
    if text is None or not text.strip():
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if value > 1.0 else None


def _header_index(header: Sequence[str], config: IngestConfig) -> dict[str, int]:
    positions: dict[str, int] = {}
    for i, name in enumerate(header):
        positions.setdefault(name.strip(), i)
    index = {}
    for field, aliases in config.columns.items():
        for alias in aliases:
            if alias in positions:
                index[field] = positions[alias]
                break
    return index


def _bookmaker_columns(header: Sequence[str], config: IngestConfig) -> list[tuple[str, int, int, int]]:
    positions: dict[str, int] = {}
    for i, name in enumerate(header):
        positions.setdefault(name.strip(), i)
    found = []
    for prefix in config.bookmakers:
        cols = [positions.get(prefix + suffix) for suffix in "HDA"]
        if all(c is not None for c in cols):
            found.append((prefix, *cols))
    return found


def parse_league_csv(
    path: str | Path,
    league_id: str,
    season: str | None = None,
    config: IngestConfig | None = None,
) -> list[MatchRecord]:
    """Parse one football-data.co.uk file into chronologically sorted records.

    ``season`` overrides the label inferred from the path. Rows lacking teams,
    a date or goals are skipped with a warning; blank statistic cells become
    ``None``.
    """
    config = config or default_config()
    path = Path(path)
    text = _read_text(path)
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        raise DataFormatError(f"{path}: empty file")
    index = _header_index(header, config)
    missing = [f for f in _REQUIRED_FIELDS if f not in index]
    if missing:
        raise DataFormatError(f"{path}: no recognisable header (missing {', '.join(missing)})")
    books = _bookmaker_columns(header, config)

    def cell(row: list[str], field: str) -> str | None:
        i = index.get(field)
        if i is None or i >= len(row):
            return None
        return row[i]

    rows: list[tuple[int, list[str], dt.date]] = []
    for line_no, row in enumerate(reader, start=2):
        if not any(c.strip() for c in row):
            continue
        home, away = cell(row, "home_team"), cell(row, "away_team")
        date_text = cell(row, "date")
        if not home or not home.strip() or not away or not away.strip() or not date_text:
            logger.warning("%s:%d: missing team or date, row skipped", path, line_no)
            continue
        try:
            date = parse_date(date_text)
        except ValueError:
            logger.warning("%s:%d: bad date %r, row skipped", path, line_no, date_text)
            continue
        if _count(cell(row, "home_goals")) is None or _count(cell(row, "away_goals")) is None:
            logger.warning("%s:%d: missing goals, row skipped", path, line_no)
            continue
        rows.append((line_no, row, date))

    if season is None:
        season = infer_season(path)
        if season is None and rows:
            season = season_from_dates(r[2] for r in rows)
            logger.info("%s: season inferred from dates as %s", path, season)
    records = []
    for line_no, row, date in rows:
        if season is not None and not date_in_season(date, season):
            logger.warning("%s:%d: date %s outside season %s", path, line_no, date, season)
        hg = _count(cell(row, "home_goals"))
        ag = _count(cell(row, "away_goals"))
        stats = {
            name: _count(cell(row, name))
            for name in (
                "home_shots",
                "away_shots",
                "home_shots_on_target",
                "away_shots_on_target",
                "home_corners",
                "away_corners",
            )
        }
        for side in ("home", "away"):
            shots, on = stats[f"{side}_shots"], stats[f"{side}_shots_on_target"]
            if shots is not None and on is not None and shots < on:
                logger.warning("%s:%d: %s shots below shots on target, total dropped", path, line_no, side)
                stats[f"{side}_shots"] = None
        result = (cell(row, "result") or "").strip()
        if result and result != Outcome.from_goals(hg, ag).value:
            logger.warning("%s:%d: result %s disagrees with goals, goals used", path, line_no, result)
        odds = []
        for prefix, ih, idr, ia in books:
            triple = [_odds(row[i]) if i < len(row) else None for i in (ih, idr, ia)]
            if all(v is not None for v in triple):
                odds.append(BookmakerOdds(prefix, *triple))
        records.append(
            MatchRecord(
                league_id=league_id,
                season=season,
                date=date,
                home_team=config.canonical_team(cell(row, "home_team"), league_id),
                away_team=config.canonical_team(cell(row, "away_team"), league_id),
                full_time_home_goals=hg,
                full_time_away_goals=ag,
                odds=tuple(odds),
                **stats,
            )
        )
    records.sort(key=lambda r: r.date)
    return records


# ---------------------------------------------------------------------------
# Odds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OddsSummary:
    max_home: float
    max_draw: float
    max_away: float

    @property
    def implied_home(self) -> float:
        return 1.0 / self.max_home

    @property
    def implied_draw(self) -> float:
        return 1.0 / self.max_draw

    @property
    def implied_away(self) -> float:
        return 1.0 / self.max_away

    @property
    def overround(self) -> float:
        return self.implied_home + self.implied_draw + self.implied_away - 1.0


def overround(odds: Iterable[float]) -> float:
    """Bookmaker margin of a set of decimal odds covering every outcome."""
    return sum(1.0 / o for o in odds) - 1.0


def best_odds(record: MatchRecord) -> OddsSummary:
    """Elementwise maximum odds over every bookmaker quoted for ``record``."""
    if not record.odds:
        raise NoOddsError(f"no odds for {record.match_id}")
    return OddsSummary(
        max_home=max(o.home_odds for o in record.odds),
        max_draw=max(o.draw_odds for o in record.odds),
        max_away=max(o.away_odds for o in record.odds),
    )


def try_best_odds(record: MatchRecord) -> OddsSummary | None:
    return best_odds(record) if record.odds else None


# ---------------------------------------------------------------------------
# Eligibility
# ---------------------------------------------------------------------------

MIN_PLAYED = 6
MIN_REMAINING = 6


class EligibilityReason(str, enum.Enum):
    OK = "ok"
    STATS_MISSING = "stats_missing"
    HOME_TEAM_FEWER_THAN_7_PLAYED = "home_team_fewer_than_7_played"
    HOME_TEAM_FEWER_THAN_7_REMAINING = "home_team_fewer_than_7_remaining"
    FIRST_DATA_SEASON = "first_data_season"


@dataclass(frozen=True)
class EligibilityFlag:
    reason: EligibilityReason

    @property
    def eligible(self) -> bool:
        return self.reason is EligibilityReason.OK


ELIGIBLE = EligibilityFlag(EligibilityReason.OK)


def first_data_season(records: Iterable[MatchRecord], stat_set=MATCH_DATA_STATISTICS) -> str | None:
    seasons = [r.season for r in records if r.has_stats(stat_set)]
    return min(seasons) if seasons else None


def compute_eligibility(
    records: Sequence[MatchRecord],
    stat_set=MATCH_DATA_STATISTICS,
    first_season: str | None = None,
) -> list[EligibilityFlag]:
    """Betting/selection eligibility of every record.

    A match is eligible when it carries every statistic in ``stat_set``, its
    home team has played at least six matches of the season before it and has
    at least six left after it, and its season is not the first season with
    match data in ``records`` (pass ``first_season`` to pin that season).
    Played/remaining counts come from the season's full fixture list.
    """
    if first_season is None:
        first_season = first_data_season(records, stat_set)
    fixtures: dict[tuple[str, str, str], list[int]] = defaultdict(list)
    for i, rec in enumerate(records):
        fixtures[(rec.league_id, rec.season, rec.home_team)].append(i)
        fixtures[(rec.league_id, rec.season, rec.away_team)].append(i)

    flags = []
    for i, rec in enumerate(records):
        if not rec.has_stats(stat_set):
            flags.append(EligibilityFlag(EligibilityReason.STATS_MISSING))
            continue
        if first_season is None or rec.season <= first_season:
            flags.append(EligibilityFlag(EligibilityReason.FIRST_DATA_SEASON))
            continue
        team_matches = fixtures[(rec.league_id, rec.season, rec.home_team)]
        position = team_matches.index(i)
        if position < MIN_PLAYED:
            flags.append(EligibilityFlag(EligibilityReason.HOME_TEAM_FEWER_THAN_7_PLAYED))
        elif len(team_matches) - position - 1 < MIN_REMAINING:
            flags.append(EligibilityFlag(EligibilityReason.HOME_TEAM_FEWER_THAN_7_REMAINING))
        else:
            flags.append(ELIGIBLE)
    return flags
