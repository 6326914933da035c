"""Core match data types."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field


class Statistic(str, enum.Enum):
    GOALS = "goals"
    SHOTS_ON_TARGET = "shots_on_target"
    SHOTS_OFF_TARGET = "shots_off_target"
    CORNERS = "corners"

    @property
    def short(self) -> str:
        return _SHORT[self]


_SHORT = {
    Statistic.GOALS: "goals",
    Statistic.SHOTS_ON_TARGET: "on",
    Statistic.SHOTS_OFF_TARGET: "off",
    Statistic.CORNERS: "corners",
}

ALL_STATISTICS = (
    Statistic.GOALS,
    Statistic.SHOTS_ON_TARGET,
    Statistic.SHOTS_OFF_TARGET,
    Statistic.CORNERS,
)
# Statistics a match must carry to count as having match data.
MATCH_DATA_STATISTICS = frozenset(
    {Statistic.SHOTS_ON_TARGET, Statistic.SHOTS_OFF_TARGET, Statistic.CORNERS}
)


def parse_statistic(text: str) -> Statistic:
    key = text.strip().lower()
    for stat in Statistic:
        if key in (stat.value, stat.short):
            return stat
    raise ValueError(f"unknown statistic {text!r}")


class Outcome(str, enum.Enum):
    HOME_WIN = "H"
    DRAW = "D"
    AWAY_WIN = "A"

    @classmethod
    def from_goals(cls, home_goals: int, away_goals: int) -> "Outcome":
        if home_goals > away_goals:
            return cls.HOME_WIN
        if home_goals < away_goals:
            return cls.AWAY_WIN
        return cls.DRAW

    @property
    def index(self) -> int:
        """Position in the (home, draw, away) probability vector."""
        return "HDA".index(self.value)


@dataclass(frozen=True)
class BookmakerOdds:
    bookmaker_id: str
    home_odds: float
    draw_odds: float
    away_odds: float

    def __post_init__(self) -> None:
        for value in (self.home_odds, self.draw_odds, self.away_odds):
            if not value > 1.0:
                raise ValueError(
                    f"decimal odds must exceed 1, got {value!r} from {self.bookmaker_id}"
                )


@dataclass(frozen=True)
class MatchRecord:
    league_id: str
    season: str
    date: dt.date
    home_team: str
    away_team: str
    full_time_home_goals: int
    full_time_away_goals: int
    home_shots: int | None = None
    away_shots: int | None = None
    home_shots_on_target: int | None = None
    away_shots_on_target: int | None = None
    home_corners: int | None = None
    away_corners: int | None = None
    odds: tuple[BookmakerOdds, ...] = field(default=())

    def __post_init__(self) -> None:
        counts = (
            self.full_time_home_goals,
            self.full_time_away_goals,
            self.home_shots,
            self.away_shots,
            self.home_shots_on_target,
            self.away_shots_on_target,
            self.home_corners,
            self.away_corners,
        )
        for value in counts:
            if value is not None and value < 0:
                raise ValueError(f"negative count in {self.match_id}")
        for shots, on_target in (
            (self.home_shots, self.home_shots_on_target),
            (self.away_shots, self.away_shots_on_target),
        ):
            if shots is not None and on_target is not None and shots < on_target:
                raise ValueError(f"shots below shots on target in {self.match_id}")

    @property
    def outcome(self) -> Outcome:
        return Outcome.from_goals(self.full_time_home_goals, self.full_time_away_goals)

    @property
    def match_id(self) -> str:
        return f"{self.league_id}:{self.date.isoformat()}:{self.home_team}:{self.away_team}"

    @property
    def home_shots_off_target(self) -> int | None:
        if self.home_shots is None or self.home_shots_on_target is None:
            return None
        return self.home_shots - self.home_shots_on_target

    @property
    def away_shots_off_target(self) -> int | None:
        if self.away_shots is None or self.away_shots_on_target is None:
            return None
        return self.away_shots - self.away_shots_on_target

    def stat(self, statistic: Statistic) -> tuple[int, int] | None:
        """Observed (home, away) values of ``statistic``, or None when missing."""
        if statistic is Statistic.GOALS:
            pair = (self.full_time_home_goals, self.full_time_away_goals)
        elif statistic is Statistic.SHOTS_ON_TARGET:
            pair = (self.home_shots_on_target, self.away_shots_on_target)
        elif statistic is Statistic.SHOTS_OFF_TARGET:
            pair = (self.home_shots_off_target, self.away_shots_off_target)
        else:
            pair = (self.home_corners, self.away_corners)
        if pair[0] is None or pair[1] is None:
            return None
        return pair

    def has_stats(self, statistics) -> bool:
        return all(self.stat(s) is not None for s in statistics)


def season_start_year(season: str) -> int:
    return int(season[:4])


def season_label(start_year: int) -> str:
    return f"{start_year}-{(start_year + 1) % 100:02d}"
