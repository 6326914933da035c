"""Synthetic leagues with known ground truth.

Statistic means follow the GAP structural form: the home side of ``i`` vs
``j`` expects ``(home_attack_i + away_defence_j) / 2`` and the away side
``(away_attack_j + home_defence_i) / 2``. Outcomes are drawn from a known
cumulative-logit model on the observed statistic differences, and goals are
then drawn conditional on the drawn outcome.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .records import BookmakerOdds, MatchRecord, Outcome, Statistic, season_label

# Column order of per-team rate tables.
HA, HD, AA, AD = 0, 1, 2, 3

BASE_MEANS = {
    Statistic.GOALS: 1.35,
    Statistic.SHOTS_ON_TARGET: 4.6,
    Statistic.SHOTS_OFF_TARGET: 6.2,
    Statistic.CORNERS: 5.3,
}
OUTCOME_STATS = (Statistic.SHOTS_ON_TARGET, Statistic.SHOTS_OFF_TARGET, Statistic.CORNERS)
DEFAULT_COEFFICIENTS = (0.30, 0.04, 0.02)
DEFAULT_CUTS = (-0.25, 1.0)


def logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def ordinal_probabilities(eta, cut_home: float, cut_homedraw: float) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    f1 = logistic(cut_home + eta)
    f2 = logistic(cut_homedraw + eta)
    return np.stack([f1, f2 - f1, 1.0 - f2], axis=-1)


def simulate_outcomes(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Outcome index (0 home, 1 draw, 2 away) per row of ``probabilities``."""
    u = rng.random(len(probabilities))
    cum = np.cumsum(probabilities, axis=1)
    return np.minimum((u[:, None] >= cum[:, :2]).sum(axis=1), 2)


def round_robin(n_teams: int, rng: np.random.Generator) -> list[list[tuple[int, int]]]:
    """Double round-robin rounds of (home, away) pairs via the circle method."""
    teams = list(range(n_teams)) + ([-1] if n_teams % 2 else [])
    n = len(teams)
    rounds = []
    for r in range(n - 1):
        pairs = []
        for i in range(n // 2):
            a, b = teams[i], teams[n - 1 - i]
            if a < 0 or b < 0:
                continue
            pairs.append((a, b) if (r + i) % 2 == 0 else (b, a))
        rounds.append(pairs)
        teams = [teams[0], teams[-1], *teams[1:-1]]
    order = rng.permutation(len(rounds))
    first = [rounds[i] for i in order]
    return first + [[(b, a) for a, b in rnd] for rnd in first]


def random_rates(
    n_teams: int,
    rng: np.random.Generator,
    spread: float = 0.25,
    home_advantage: float = 0.14,
    constant: bool = False,
    offset: float = 0.0,
) -> dict[Statistic, np.ndarray]:
    """Heterogeneous per-team rate tables sharing attack/defence strengths."""
    if constant:
        att = np.zeros(n_teams)
        dfn = np.zeros(n_teams)
        home_advantage = 0.0
    else:
        att = rng.normal(offset, spread, n_teams)
        dfn = rng.normal(-offset, spread, n_teams)
    rates = {}
    for stat, mu in BASE_MEANS.items():
        table = np.empty((n_teams, 4))
        table[:, HA] = mu * np.exp(home_advantage + att)
        table[:, AA] = mu * np.exp(-home_advantage + att)
        table[:, HD] = mu * np.exp(-home_advantage + dfn)
        table[:, AD] = mu * np.exp(home_advantage + dfn)
        rates[stat] = table
    return rates


@dataclass
class SynthTruth:
    teams: list[str]
    rates: dict[Statistic, np.ndarray]
    coefficients: tuple[float, ...]
    cuts: tuple[float, float]
    expected: dict[Statistic, np.ndarray] = field(default_factory=dict)
    probabilities: np.ndarray | None = None


@dataclass
class SynthLeague:
    records: list[MatchRecord]
    truth: SynthTruth


def _draw_goals(outcome: int, mu_h: float, mu_a: float, rng: np.random.Generator) -> tuple[int, int]:
    for _ in range(200):
        gh, ga = int(rng.poisson(mu_h)), int(rng.poisson(mu_a))
        if Outcome.from_goals(gh, ga).index == outcome:
            return gh, ga
    base = int(round(min(mu_h, mu_a)))
    return [(base + 1, base), (base, base), (base, base + 1)][outcome]


def _bookmaker_odds(
    p: np.ndarray, rng: np.random.Generator, n_books: int, margin: float, noise_sd: float
) -> tuple[BookmakerOdds, ...]:
    books = []
    for b in range(n_books):
        implied = p * (1.0 + margin) * np.exp(rng.normal(0.0, noise_sd, 3))
        odds = np.maximum(1.0 / implied, 1.01)
        books.append(BookmakerOdds(f"BK{b}", *(round(float(o), 2) for o in odds)))
    return tuple(books)


def synth_league(
    n_teams: int = 20,
    n_seasons: int = 5,
    true_means: Mapping[Statistic, np.ndarray] | None = None,
    noise: str = "poisson",
    seed: int = 0,
    league_id: str = "SYN1",
    first_year: int = 2000,
    coefficients: Sequence[float] = DEFAULT_COEFFICIENTS,
    cuts: tuple[float, float] = DEFAULT_CUTS,
    n_books: int = 2,
    margin: float = 0.05,
    odds_noise: float = 0.04,
    spread: float = 0.25,
) -> SynthLeague:
    """Generate ``n_seasons`` double round-robin seasons for one league.

    ``true_means`` maps each statistic to an ``(n_teams, 4)`` table of
    home-attack, home-defence, away-attack, away-defence rates; by default
    heterogeneous rates are drawn. ``noise`` is ``"poisson"`` or ``"none"``
    (counts are then the rounded means). ``spread`` is the standard deviation
    of the log-scale team strengths used when rates are drawn.
    """
    if noise not in ("poisson", "none"):
        raise ValueError(f"unknown noise model {noise!r}")
    rng = np.random.default_rng(seed)
    rates = dict(true_means) if true_means is not None else random_rates(n_teams, rng, spread=spread)
    for stat, table in rates.items():
        if np.any(np.asarray(table) < 0):
            raise ValueError(f"negative rates for {stat.value}")
    teams = [f"{league_id}-T{i:02d}" for i in range(n_teams)]
    truth = SynthTruth(teams, rates, tuple(coefficients), tuple(cuts))
    records, expected, probs = _play_seasons(
        rng, [(league_id, teams, list(range(n_teams)))] * n_seasons, rates,
        first_year, noise, coefficients, cuts, n_books, margin, odds_noise,
    )
    truth.expected = expected
    truth.probabilities = probs
    return SynthLeague(records, truth)


def _play_seasons(rng, season_layouts, rates, first_year, noise, coefficients, cuts, n_books, margin, odds_noise):
    """Play seasons given as ``(league_id, team names, rate row per team)``."""
    records = []
    expected = {stat: [] for stat in rates}
    probs = []
    beta = np.asarray(coefficients, dtype=float)
    for k, (league_id, names, rows) in enumerate(season_layouts):
        year = first_year + k
        start = dt.date(year, 8, 10)
        for r, rnd in enumerate(round_robin(len(names), rng)):
            date = start + dt.timedelta(days=7 * r)
            for hi, ai in rnd:
                h, a = rows[hi], rows[ai]
                values = {}
                for stat, table in rates.items():
                    mu_h = (table[h, HA] + table[a, AD]) / 2.0
                    mu_a = (table[a, AA] + table[h, HD]) / 2.0
                    expected[stat].append((mu_h, mu_a))
                    if noise == "poisson":
                        values[stat] = (int(rng.poisson(mu_h)), int(rng.poisson(mu_a)))
                    else:
                        values[stat] = (int(round(mu_h)), int(round(mu_a)))
                diffs = np.array([values[s][0] - values[s][1] for s in OUTCOME_STATS], dtype=float)
                p = ordinal_probabilities(beta @ diffs, *cuts)
                probs.append(p)
                outcome = int(simulate_outcomes(p[None, :], rng)[0])
                mu_goals = expected[Statistic.GOALS][-1]
                gh, ga = _draw_goals(outcome, *mu_goals, rng)
                exp_diffs = np.array(
                    [expected[s][-1][0] - expected[s][-1][1] for s in OUTCOME_STATS]
                )
                book_p = ordinal_probabilities(beta @ exp_diffs, *cuts)
                on_h, on_a = values[Statistic.SHOTS_ON_TARGET]
                off_h, off_a = values[Statistic.SHOTS_OFF_TARGET]
                records.append(
                    MatchRecord(
                        league_id=league_id,
                        season=season_label(year),
                        date=date,
                        home_team=names[hi],
                        away_team=names[ai],
                        full_time_home_goals=gh,
                        full_time_away_goals=ga,
                        home_shots=on_h + off_h,
                        away_shots=on_a + off_a,
                        home_shots_on_target=on_h,
                        away_shots_on_target=on_a,
                        home_corners=values[Statistic.CORNERS][0],
                        away_corners=values[Statistic.CORNERS][1],
                        odds=_bookmaker_odds(book_p, rng, n_books, margin, odds_noise),
                    )
                )
    return (
        records,
        {stat: np.asarray(v) for stat, v in expected.items()},
        np.asarray(probs),
    )


def synth_store(
    n_leagues: int = 3,
    n_teams: int = 12,
    n_seasons: int = 5,
    swaps: int = 2,
    seed: int = 0,
    first_year: int = 2000,
    noise: str = "poisson",
    **kwargs,
):
    """A pyramid of ``n_leagues`` tiers (``SYN1``, ``SYN2``, ...) with promotion.

    After each season the ``swaps`` lowest-ranked teams (by points) of every
    tier but the last swap places with the ``swaps`` best of the tier below.
    Returns ``(Dataset, SynthTruth)``; truth rates are indexed by global team
    number in ``truth.teams``.
    """
    from .store import Dataset

    rng = np.random.default_rng(seed)
    total = n_leagues * n_teams
    # Attack/defence strength per team, weaker on average in lower tiers.
    tier_of = np.repeat(np.arange(n_leagues), n_teams)
    strengths = rng.normal(0.0, 0.25, (total, 2)) + 0.1 * tier_of[:, None] * np.array([-1.0, 1.0])
    rates = {}
    for stat, mu in BASE_MEANS.items():
        table = np.empty((total, 4))
        table[:, HA] = mu * np.exp(0.14 + strengths[:, 0])
        table[:, AA] = mu * np.exp(-0.14 + strengths[:, 0])
        table[:, HD] = mu * np.exp(-0.14 + strengths[:, 1])
        table[:, AD] = mu * np.exp(0.14 + strengths[:, 1])
        rates[stat] = table
    names = [f"ST{i:03d}" for i in range(total)]
    tiers = [list(range(t * n_teams, (t + 1) * n_teams)) for t in range(n_leagues)]
    coefficients = kwargs.pop("coefficients", DEFAULT_COEFFICIENTS)
    cuts = kwargs.pop("cuts", DEFAULT_CUTS)
    n_books = kwargs.pop("n_books", 2)
    margin = kwargs.pop("margin", 0.05)
    odds_noise = kwargs.pop("odds_noise", 0.04)
    if kwargs:
        raise TypeError(f"unexpected arguments {sorted(kwargs)}")

    records = []
    expected = {s: [] for s in rates}
    probs = []
    for k in range(n_seasons):
        season_recs = []
        for t in range(n_leagues):
            members = tiers[t]
            recs, exp, pr = _play_seasons(
                rng, [(f"SYN{t + 1}", [names[i] for i in members], members)], rates,
                first_year + k, noise, coefficients, cuts, n_books, margin, odds_noise,
            )
            season_recs.extend(recs)
            for s in rates:
                expected[s].extend(exp[s])
            probs.extend(pr)
        records.extend(season_recs)
        points = {}
        for rec in season_recs:
            o = rec.outcome
            points[rec.home_team] = points.get(rec.home_team, 0) + {"H": 3, "D": 1, "A": 0}[o.value]
            points[rec.away_team] = points.get(rec.away_team, 0) + {"H": 0, "D": 1, "A": 3}[o.value]
        ranked = [sorted(m, key=lambda i: (-points[names[i]], i)) for m in tiers]
        for t in range(n_leagues - 1):
            down = ranked[t][-swaps:] if swaps else []
            up = ranked[t + 1][:swaps] if swaps else []
            tiers[t] = [i for i in tiers[t] if i not in down] + up
            tiers[t + 1] = [i for i in tiers[t + 1] if i not in up] + down
        tiers = [sorted(m) for m in tiers]
    order = sorted(range(len(records)), key=lambda i: (records[i].date, records[i].league_id))
    truth = SynthTruth(names, rates, tuple(coefficients), tuple(cuts))
    truth.expected = {s: np.asarray(v)[order] for s, v in expected.items()}
    truth.probabilities = np.asarray(probs)[order]
    return Dataset.from_records([records[i] for i in order]), truth
