"""GAP ratings: per-team home/away attacking and defensive ratings for one statistic.

Two code paths share the update rule:

* :class:`LeagueRatingState` with :func:`predict_stats`, :func:`record_match`
  and :func:`season_rollover` is the readable, match-at-a-time API.
* :class:`LeagueTape` plus :func:`replay_tape` replays a whole league history
  from integer-encoded arrays in a compiled kernel; parameter search and the
  walk-forward backtest use it.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np

from .errors import InputError, ParameterDomainError
from .ingest import IngestConfig, default_config
from .records import Statistic

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RatingParams:
    """Learning rate ``lam`` and cross-venue weights ``phi1`` (home) / ``phi2`` (away).

    ``lam == 0`` is accepted as the degenerate no-learning limit; the
    optimizer only ever reports ``lam > 0``.
    """

    lam: float
    phi1: float
    phi2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ParameterDomainError(f"lambda must be >= 0, got {self.lam}")
        for name in ("phi1", "phi2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterDomainError(f"{name} must lie in (0, 1), got {value}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lam, self.phi1, self.phi2)


DEFAULT_SEED_PARAMS = RatingParams(0.1, 0.5, 0.5)


@dataclass(frozen=True)
class TeamRatings:
    home_attack: float = 0.0
    home_defence: float = 0.0
    away_attack: float = 0.0
    away_defence: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.home_attack, self.home_defence, self.away_attack, self.away_defence)


ZERO_RATINGS = TeamRatings()


def average_ratings(ratings: Iterable[TeamRatings]) -> TeamRatings:
    items = [r.as_tuple() for r in ratings]
    if not items:
        return ZERO_RATINGS
    return TeamRatings(*(sum(col) / len(items) for col in zip(*items)))


@dataclass(frozen=True)
class StatPrediction:
    predicted_home: float
    predicted_away: float

    @property
    def difference(self) -> float:
        return self.predicted_home - self.predicted_away


@dataclass
class LeagueRatingState:
    statistic: Statistic
    params: RatingParams
    ratings: dict[str, TeamRatings] = field(default_factory=dict)
    season: str | None = None
    matches_processed: int = 0
    # Teams first seen in the opening season start at zero; later newcomers
    # without a rollover route start at the league average.
    initial_season: bool = True

    @classmethod
    def fresh(
        cls,
        statistic: Statistic,
        params: RatingParams,
        teams: Iterable[str] = (),
        season: str | None = None,
    ) -> "LeagueRatingState":
        return cls(statistic, params, {t: ZERO_RATINGS for t in sorted(teams)}, season)

    def league_average(self) -> TeamRatings:
        return average_ratings(self.ratings.values())

    def get(self, team: str) -> TeamRatings:
        if team in self.ratings:
            return self.ratings[team]
        return ZERO_RATINGS if self.initial_season else self.league_average()


def predict_stats(state: LeagueRatingState, home: str, away: str) -> StatPrediction:
    """Expected statistic for each side; does not modify ``state``."""
    h, a = state.get(home), state.get(away)
    return StatPrediction(
        (h.home_attack + a.away_defence) / 2.0,
        (a.away_attack + h.home_defence) / 2.0,
    )


def record_match(
    state: LeagueRatingState, home: str, away: str, s_home: float, s_away: float
) -> LeagueRatingState:
    """Apply one match's eight rating updates in place and return ``state``.

    All updates use the pre-match ratings; every result is clamped at zero.
    """
    if s_home < 0 or s_away < 0 or not (math.isfinite(s_home) and math.isfinite(s_away)):
        raise InputError(f"observed statistics must be finite and >= 0, got {s_home}, {s_away}")
    if home == away:
        raise InputError(f"team {home!r} cannot play itself")
    lam, phi1, phi2 = state.params.as_tuple()
    h, a = state.get(home), state.get(away)
    pred = predict_stats(state, home, away)
    rh = s_home - pred.predicted_home
    ra = s_away - pred.predicted_away
    state.ratings[home] = TeamRatings(
        home_attack=max(h.home_attack + lam * phi1 * rh, 0.0),
        home_defence=max(h.home_defence + lam * phi1 * ra, 0.0),
        away_attack=max(h.away_attack + lam * (1.0 - phi1) * rh, 0.0),
        away_defence=max(h.away_defence + lam * (1.0 - phi1) * ra, 0.0),
    )
    state.ratings[away] = TeamRatings(
        home_attack=max(a.home_attack + lam * (1.0 - phi2) * ra, 0.0),
        home_defence=max(a.home_defence + lam * (1.0 - phi2) * rh, 0.0),
        away_attack=max(a.away_attack + lam * phi2 * ra, 0.0),
        away_defence=max(a.away_defence + lam * phi2 * rh, 0.0),
    )
    state.matches_processed += 1
    return state


def season_rollover(
    prev: LeagueRatingState,
    new_teams: Iterable[str],
    promoted_out: Iterable[str] = (),
    relegated_out: Iterable[str] = (),
    relegated_in: Iterable[str] = (),
    promoted_in: Iterable[str] | None = None,
    season: str | None = None,
    params: RatingParams | None = None,
) -> LeagueRatingState:
    """State for the next season of the same league.

    Continuing teams keep their ratings. Teams arriving from the division
    above (``relegated_in``) take the mean ratings of the teams promoted out;
    teams arriving from below (``promoted_in``, by default every other
    arrival) take the mean of the teams relegated out. An empty donor set, or
    an arrival of unknown origin, falls back to the league-wide mean.
    """
    new_teams = set(new_teams)
    relegated_in = set(relegated_in) & new_teams
    arrivals = new_teams - set(prev.ratings)
    if promoted_in is None:
        promoted_in = arrivals - relegated_in
    else:
        promoted_in = set(promoted_in) & new_teams
    league_avg = prev.league_average()

    def donor_mean(donors: Iterable[str]) -> TeamRatings:
        pool = [prev.ratings[t] for t in sorted(donors) if t in prev.ratings]
        return average_ratings(pool) if pool else league_avg

    from_above = donor_mean(promoted_out)
    from_below = donor_mean(relegated_out)
    ratings = {}
    for team in sorted(new_teams):
        if team not in arrivals:
            ratings[team] = prev.ratings[team]
        elif team in relegated_in:
            ratings[team] = from_above
        elif team in promoted_in:
            ratings[team] = from_below
        else:
            ratings[team] = league_avg
    return LeagueRatingState(
        prev.statistic, params or prev.params, ratings, season, 0, initial_season=False
    )


# ---------------------------------------------------------------------------
# Rollover planning across a league pyramid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RolloverInfo:
    season: str
    new_teams: frozenset[str]
    promoted_out: frozenset[str]
    relegated_out: frozenset[str]
    relegated_in: frozenset[str]
    promoted_in: frozenset[str]


class Pyramid:
    """Where each team played in each season, by league tier."""

    def __init__(
        self,
        season_teams: Mapping[tuple[str, str], frozenset[str]],
        config: IngestConfig | None = None,
    ) -> None:
        self.config = config or default_config()
        self.season_teams = season_teams
        self._tier_of: dict[tuple[str, str, str], int] = {}
        self._tracked: set[tuple[str, int, str]] = set()
        for (league, season), teams in season_teams.items():
            info = self.config.league(league)
            self._tracked.add((info.pyramid, info.tier, season))
            for team in teams:
                self._tier_of[(info.pyramid, season, team)] = info.tier
        self._top_tier: dict[str, int] = defaultdict(lambda: 1)
        for info in self.config.leagues.values():
            self._top_tier[info.pyramid] = min(self._top_tier.get(info.pyramid, info.tier), info.tier)
        for league, _season in season_teams:
            info = self.config.league(league)
            self._top_tier[info.pyramid] = min(self._top_tier[info.pyramid], info.tier)

    def league_seasons(self, league: str) -> list[str]:
        return sorted(s for (lg, s) in self.season_teams if lg == league)

    def rollover(self, league: str, prev_season: str, season: str) -> RolloverInfo:
        info = self.config.league(league)
        pyr, tier = info.pyramid, info.tier
        prev_teams = self.season_teams.get((league, prev_season), frozenset())
        new_teams = self.season_teams.get((league, season), frozenset())
        is_top = tier <= self._top_tier[pyr]

        promoted_out, relegated_out = set(), set()
        upper_now = (pyr, tier - 1, season) in self._tracked
        for team in prev_teams - new_teams:
            where = self._tier_of.get((pyr, season, team))
            if where is not None and where < tier:
                promoted_out.add(team)
            elif where is not None and where > tier:
                relegated_out.add(team)
            elif where is None and (is_top or upper_now):
                relegated_out.add(team)

        relegated_in, promoted_in = set(), set()
        upper_before = (pyr, tier - 1, prev_season) in self._tracked
        for team in new_teams - prev_teams:
            where = self._tier_of.get((pyr, prev_season, team))
            if where is not None and where < tier:
                relegated_in.add(team)
            elif where is not None and where > tier:
                promoted_in.add(team)
            elif where is None and (is_top or upper_before):
                promoted_in.add(team)
        return RolloverInfo(
            season,
            frozenset(new_teams),
            frozenset(promoted_out),
            frozenset(relegated_out),
            frozenset(relegated_in),
            frozenset(promoted_in),
        )


# ---------------------------------------------------------------------------
# Compiled league replay
# ---------------------------------------------------------------------------

# Column order of the rating matrix used by the kernel.
HA, HD, AA, AD = 0, 1, 2, 3


def _replay_py(
    home, away, s_home, s_away, has_stat, season_start, n_seasons,
    arr_ptr, arrivals, donor_ptr, donors, ratings, lam, phi1, phi2, pred_h, pred_a,
):
    sse = 0.0
    for k in range(n_seasons):
        if k > 0:
            a0 = arr_ptr[k]
            a1 = arr_ptr[k + 1]
            incoming = np.zeros((a1 - a0, 4))
            for j in range(a0, a1):
                d0 = donor_ptr[j]
                d1 = donor_ptr[j + 1]
                if d1 > d0:
                    for c in range(4):
                        acc = 0.0
                        for q in range(d0, d1):
                            acc += ratings[donors[q], c]
                        incoming[j - a0, c] = acc / (d1 - d0)
            for j in range(a0, a1):
                for c in range(4):
                    ratings[arrivals[j], c] = incoming[j - a0, c]
        for m in range(season_start[k], season_start[k + 1]):
            i = home[m]
            j = away[m]
            hia = ratings[i, 0]
            hid = ratings[i, 1]
            iaa = ratings[i, 2]
            iad = ratings[i, 3]
            jha = ratings[j, 0]
            jhd = ratings[j, 1]
            jaa = ratings[j, 2]
            jad = ratings[j, 3]
            ph = (hia + jad) / 2.0
            pa = (jaa + hid) / 2.0
            pred_h[m] = ph
            pred_a[m] = pa
            if has_stat[m]:
                rh = s_home[m] - ph
                ra = s_away[m] - pa
                sse += rh * rh + ra * ra
                ratings[i, 0] = max(hia + lam * phi1 * rh, 0.0)
                ratings[i, 1] = max(hid + lam * phi1 * ra, 0.0)
                ratings[i, 2] = max(iaa + lam * (1.0 - phi1) * rh, 0.0)
                ratings[i, 3] = max(iad + lam * (1.0 - phi1) * ra, 0.0)
                ratings[j, 0] = max(jha + lam * (1.0 - phi2) * ra, 0.0)
                ratings[j, 1] = max(jhd + lam * (1.0 - phi2) * rh, 0.0)
                ratings[j, 2] = max(jaa + lam * phi2 * ra, 0.0)
                ratings[j, 3] = max(jad + lam * phi2 * rh, 0.0)
    return sse


_replay_jit = numba.njit(cache=True, nogil=True)(_replay_py)


@dataclass
class LeagueTape:
    """One league's history for one statistic, integer-encoded for replay.

    Seasons start at the league's first season in which the statistic is
    recorded. ``arrivals``/``donors`` encode each season's rollover: arrival
    ``arrivals[j]`` of season ``k`` (``arr_ptr[k] <= j < arr_ptr[k+1]``)
    takes the mean ratings of ``donors[donor_ptr[j]:donor_ptr[j+1]]``.
    """

    league_id: str
    statistic: Statistic
    teams: list[str]
    seasons: list[str]
    record_index: np.ndarray
    home: np.ndarray
    away: np.ndarray
    s_home: np.ndarray
    s_away: np.ndarray
    has_stat: np.ndarray
    season_start: np.ndarray
    arr_ptr: np.ndarray
    arrivals: np.ndarray
    donor_ptr: np.ndarray
    donors: np.ndarray
    rollovers: list[RolloverInfo] = field(default_factory=list)

    @property
    def n_matches(self) -> int:
        return len(self.home)

    def seasons_before(self, cutoff: str | None) -> int:
        """Number of leading tape seasons strictly before ``cutoff``."""
        if cutoff is None:
            return len(self.seasons)
        return sum(1 for s in self.seasons if s < cutoff)

    def season_slice(self, k: int) -> slice:
        return slice(int(self.season_start[k]), int(self.season_start[k + 1]))


def build_tape(dataset, league: str, statistic: Statistic, pyramid: Pyramid | None = None) -> LeagueTape | None:
    """Tape for ``league``; None when the league never records ``statistic``."""
    pyramid = pyramid or Pyramid(dataset.season_teams)
    positions = [i for i, r in enumerate(dataset.records) if r.league_id == league]
    with_stat = [i for i in positions if dataset.records[i].stat(statistic) is not None]
    if not with_stat:
        return None
    first = min(dataset.records[i].season for i in with_stat)
    seasons = [s for s in pyramid.league_seasons(league) if s >= first]
    by_season: dict[str, list[int]] = defaultdict(list)
    for i in positions:
        season = dataset.records[i].season
        if season >= first:
            by_season[season].append(i)
    seasons = [s for s in seasons if by_season.get(s)]
    teams = sorted(set().union(*(pyramid.season_teams[(league, s)] for s in seasons)))
    team_idx = {t: n for n, t in enumerate(teams)}

    order = [i for s in seasons for i in by_season[s]]
    season_start = np.zeros(len(seasons) + 1, dtype=np.int64)
    for k, s in enumerate(seasons):
        season_start[k + 1] = season_start[k] + len(by_season[s])
    n = len(order)
    home = np.empty(n, dtype=np.int64)
    away = np.empty(n, dtype=np.int64)
    s_home = np.zeros(n)
    s_away = np.zeros(n)
    has_stat = np.zeros(n, dtype=np.bool_)
    for m, i in enumerate(order):
        rec = dataset.records[i]
        home[m] = team_idx[rec.home_team]
        away[m] = team_idx[rec.away_team]
        pair = rec.stat(statistic)
        if pair is not None:
            s_home[m], s_away[m] = pair
            has_stat[m] = True

    arr_ptr = [0, 0]
    arrivals: list[int] = []
    donor_ptr = [0]
    donors: list[int] = []
    rollovers = []
    for k in range(1, len(seasons)):
        info = pyramid.rollover(league, seasons[k - 1], seasons[k])
        rollovers.append(info)
        prev_members = sorted(pyramid.season_teams[(league, seasons[k - 1])])
        incoming = sorted(info.new_teams - set(prev_members))
        for team in incoming:
            if team in info.relegated_in:
                pool = sorted(info.promoted_out)
            elif team in info.promoted_in:
                pool = sorted(info.relegated_out)
            else:
                pool = []
            if not pool:
                pool = prev_members
            arrivals.append(team_idx[team])
            donors.extend(team_idx[t] for t in pool)
            donor_ptr.append(len(donors))
        arr_ptr.append(len(arrivals))
    return LeagueTape(
        league_id=league,
        statistic=statistic,
        teams=teams,
        seasons=seasons,
        record_index=np.asarray(order, dtype=np.int64),
        home=home,
        away=away,
        s_home=s_home,
        s_away=s_away,
        has_stat=has_stat,
        season_start=season_start,
        arr_ptr=np.asarray(arr_ptr[: len(seasons) + 1], dtype=np.int64),
        arrivals=np.asarray(arrivals, dtype=np.int64),
        donor_ptr=np.asarray(donor_ptr, dtype=np.int64),
        donors=np.asarray(donors, dtype=np.int64),
        rollovers=rollovers,
    )


def build_tapes(dataset, statistic: Statistic, config: IngestConfig | None = None) -> dict[str, LeagueTape]:
    pyramid = Pyramid(dataset.season_teams, config)
    tapes = {}
    for league in dataset.leagues:
        tape = build_tape(dataset, league, statistic, pyramid)
        if tape is not None:
            tapes[league] = tape
    return tapes


@dataclass
class Replay:
    sse: float
    pred_home: np.ndarray
    pred_away: np.ndarray
    ratings: np.ndarray
    n_seasons: int


def replay_tape(
    tape: LeagueTape,
    params: RatingParams | Sequence[float],
    n_seasons: int | None = None,
    compiled: bool = True,
) -> Replay:
    """Replay the first ``n_seasons`` seasons of ``tape`` from zero ratings.

    Predictions are pre-match; ``sse`` sums squared residuals over matches
    that record the statistic.
    """
    lam, phi1, phi2 = params.as_tuple() if isinstance(params, RatingParams) else params
    if n_seasons is None:
        n_seasons = len(tape.seasons)
    ratings = np.zeros((len(tape.teams), 4))
    pred_h = np.full(tape.n_matches, np.nan)
    pred_a = np.full(tape.n_matches, np.nan)
    kernel = _replay_jit if compiled else _replay_py
    sse = kernel(
        tape.home, tape.away, tape.s_home, tape.s_away, tape.has_stat,
        tape.season_start, n_seasons, tape.arr_ptr, tape.arrivals,
        tape.donor_ptr, tape.donors, ratings,
        float(lam), float(phi1), float(phi2), pred_h, pred_a,
    )
    return Replay(float(sse), pred_h, pred_a, ratings, n_seasons)


def replay_states(tape: LeagueTape, params: RatingParams) -> LeagueRatingState:
    """End-of-tape ratings through the object API (reference path)."""
    state: LeagueRatingState | None = None
    for k, season in enumerate(tape.seasons):
        if k == 0:
            sl = tape.season_slice(0)
            members = np.unique(np.concatenate([tape.home[sl], tape.away[sl]]))
            state = LeagueRatingState.fresh(
                tape.statistic, params, (tape.teams[i] for i in members), season
            )
        else:
            info = tape.rollovers[k - 1]
            state = season_rollover(
                state, info.new_teams, info.promoted_out, info.relegated_out,
                info.relegated_in, info.promoted_in, season,
            )
        for m in range(*tape.season_slice(k).indices(tape.n_matches)):
            if tape.has_stat[m]:
                record_match(
                    state, tape.teams[tape.home[m]], tape.teams[tape.away[m]],
                    float(tape.s_home[m]), float(tape.s_away[m]),
                )
    return state


def walk_forward_predictions(
    dataset,
    schedule: Mapping[tuple[Statistic, str], RatingParams],
    statistic: Statistic,
    tapes: Mapping[str, LeagueTape] | None = None,
) -> np.ndarray:
    """Pre-match (home, away) predictions for every record; NaN where unavailable.

    Season ``s`` predictions come from a from-scratch replay of the league
    through season ``s`` under that season's scheduled parameters, so they
    only use matches played before them. Seasons without scheduled
    parameters are left as NaN.
    """
    tapes = tapes if tapes is not None else build_tapes(dataset, statistic)
    out = np.full((len(dataset.records), 2), np.nan)
    for tape in tapes.values():
        for k, season in enumerate(tape.seasons):
            params = schedule.get((statistic, season))
            if params is None:
                continue
            rep = replay_tape(tape, params, k + 1)
            sl = tape.season_slice(k)
            idx = tape.record_index[sl]
            out[idx, 0] = rep.pred_home[sl]
            out[idx, 1] = rep.pred_away[sl]
    return out


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

SNAPSHOT_COLUMNS = (
    "league_id", "team", "statistic", "home_attack", "home_defence",
    "away_attack", "away_defence", "as_of",
)


def snapshot_rows(state: LeagueRatingState, league_id: str, as_of: dt.date | str) -> list[dict]:
    as_of = as_of.isoformat() if isinstance(as_of, dt.date) else as_of
    rows = []
    for team in sorted(state.ratings):
        r = state.ratings[team]
        rows.append(
            dict(
                league_id=league_id,
                team=team,
                statistic=state.statistic.value,
                home_attack=r.home_attack,
                home_defence=r.home_defence,
                away_attack=r.away_attack,
                away_defence=r.away_defence,
                as_of=as_of,
            )
        )
    return rows


def write_snapshot_csv(rows: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SNAPSHOT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
