"""Walk-forward betting backtest with Level Stakes and Kelly staking."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FitError, NotEnoughDataError, ParameterDomainError
from .evaluation import DEFAULT_REPLICATES, DEFAULT_SEED, BootstrapCI, bootstrap_mean_ci
from .ingest import OddsSummary
from .gap import build_tapes, walk_forward_predictions
from .ordinal import MIN_TRAINING, FeatureTable, Forecast, OrdinalModel, PredictorSpec, build_feature_table, fit
from .records import Statistic

logger = logging.getLogger(__name__)


class Side(str, enum.Enum):
    HOME = "home"
    AWAY = "away"


class Strategy(str, enum.Enum):
    LEVEL = "level"
    KELLY = "kelly"


def kelly_fraction(p: float, odds: float) -> float:
    """Kelly stake fraction for a single outcome at decimal ``odds``."""
    if not odds > 1.0:
        raise ParameterDomainError(f"decimal odds must exceed 1, got {odds}")
    if not 0.0 <= p <= 1.0:
        raise ParameterDomainError(f"probability must lie in [0, 1], got {p}")
    return max((odds * p - 1.0) / (odds - 1.0), 0.0)


@dataclass(frozen=True)
class BetCandidate:
    side: Side
    value: bool
    kelly_fraction: float


def select_bets(forecast: Forecast, odds) -> list[BetCandidate]:
    """Home and away sides whose model probability beats the implied one."""
    out = []
    for side, p, o in (
        (Side.HOME, forecast.p_home, odds.max_home),
        (Side.AWAY, forecast.p_away, odds.max_away),
    ):
        if p > 1.0 / o:
            out.append(BetCandidate(side, True, kelly_fraction(p, o)))
    return out


@dataclass(frozen=True)
class BetRecord:
    match_id: str
    league_id: str
    date: dt.date
    side: Side
    decimal_odds: float
    model_prob: float
    implied_prob: float
    raw_kelly_fraction: float
    stake: float
    profit: float
    won: bool
    overround_at_bet: float
    both_sides: bool = False


def settle(stake: float, odds: float, won: bool) -> float:
    return stake * (odds - 1.0) if won else -stake


@dataclass
class BacktestResult:
    strategy: Strategy
    spec: PredictorSpec
    bets: list[BetRecord]
    kelly_constant: float = 1.0
    days_fitted: int = 0
    days_skipped: int = 0
    per_league_cumulative: dict[str, list[tuple[dt.date, float]]] = field(default_factory=dict)

    @property
    def n_bets(self) -> int:
        return len(self.bets)

    @property
    def total_stake(self) -> float:
        return math.fsum(b.stake for b in self.bets)

    @property
    def total_profit(self) -> float:
        return math.fsum(b.profit for b in self.bets)

    @property
    def mean_profit_pct(self) -> float:
        stake = self.total_stake
        return 100.0 * self.total_profit / stake if stake > 0 else math.nan

    @property
    def mean_stake(self) -> float:
        return self.total_stake / self.n_bets if self.bets else math.nan

    def profits_pct(self) -> np.ndarray:
        return 100.0 * np.array([b.profit for b in self.bets])

    def profit_ci(self, replicates: int = DEFAULT_REPLICATES, seed: int | None = DEFAULT_SEED) -> BootstrapCI | None:
        if self.n_bets < 2:
            return None
        return bootstrap_mean_ci(self.profits_pct(), replicates, seed)


# ---------------------------------------------------------------------------
# Walk-forward forecasting
# ---------------------------------------------------------------------------


def gap_prediction_columns(
    dataset,
    schedule: Mapping[tuple[Statistic, str], object],
    statistics: Sequence[Statistic],
) -> dict[Statistic, np.ndarray]:
    return {s: walk_forward_predictions(dataset, schedule, s, build_tapes(dataset, s)) for s in statistics}


@dataclass
class WalkForward:
    """Daily-refit forecasts for the rows of a feature table (NaN where none)."""

    spec: PredictorSpec
    probabilities: np.ndarray
    usable: np.ndarray
    days_fitted: int
    days_skipped: int
    models: dict[dt.date, OrdinalModel] = field(default_factory=dict)


def walk_forward_forecasts(
    table: FeatureTable,
    spec: PredictorSpec,
    method: str = "least_squares",
    min_train: int = MIN_TRAINING,
    keep_models: bool = False,
) -> WalkForward:
    """Refit once per match day on every complete row dated strictly earlier.

    Each day's fit starts from the previous day's parameters, so the model
    sequence depends only on past data.
    """
    X = table.matrix(spec)
    usable = table.complete(spec)
    probs = np.full((len(table), 3), np.nan)
    days = np.unique(table.dates)
    model: OrdinalModel | None = None
    fitted = skipped = 0
    models = {}
    for day in days:
        today = np.flatnonzero((table.dates == day) & usable)
        if len(today) == 0:
            continue
        train = usable & (table.dates < day)
        if int(train.sum()) < min_train:
            skipped += 1
            continue
        try:
            model = fit(X[train], table.outcome[train], spec, method=method, start=model)
        except FitError as exc:
            logger.info("%s: no fit (%s)", day, exc)
            skipped += 1
            continue
        fitted += 1
        probs[today] = model.probabilities(X[today])
        if keep_models:
            models[day.astype(object)] = model
    if skipped:
        logger.info("%s: %d match days without a model", spec.name, skipped)
    return WalkForward(spec, probs, usable, fitted, skipped, models)


def run_backtest(
    dataset,
    spec: PredictorSpec,
    strategy: Strategy | str,
    param_schedule: Mapping | None = None,
    table: FeatureTable | None = None,
    forecasts: WalkForward | None = None,
    both_sides: bool = True,
    method: str = "least_squares",
) -> BacktestResult:
    """Bet every eligible match whose walk-forward forecast shows value.

    Pass ``table`` (and optionally ``forecasts``) to share work between
    strategies; otherwise GAP predictions are computed from ``param_schedule``.
    """
    strategy = Strategy(strategy)
    if spec.uses_observed:
        raise ValueError("observed statistics are not known before kick-off; use a predicted combination")
    if table is None:
        if param_schedule is None and spec.predicted_stats:
            raise ValueError("a parameter schedule is needed for predicted statistics")
        preds = gap_prediction_columns(dataset, param_schedule or {}, sorted(spec.predicted_stats, key=lambda s: s.value))
        table = build_feature_table(dataset, preds)
    if forecasts is None:
        forecasts = walk_forward_forecasts(table, spec, method=method)

    raw = []
    for r in np.flatnonzero(np.isfinite(forecasts.probabilities[:, 0])):
        odds_row = table.max_odds[r]
        if not np.all(np.isfinite(odds_row)):
            continue
        p = forecasts.probabilities[r]
        rec = dataset.records[table.record_index[r]]
        over = float(np.sum(1.0 / odds_row) - 1.0)
        picks = select_bets(Forecast(*map(float, p)), OddsSummary(*map(float, odds_row)))
        if len(picks) == 2 and not both_sides:
            picks = [max(picks, key=lambda c: c.kelly_fraction)]
        for c in picks:
            col = 0 if c.side is Side.HOME else 2
            raw.append((rec, c.side, col, float(odds_row[col]), float(p[col]), c.kelly_fraction, over, len(picks) == 2))

    if strategy is Strategy.KELLY and raw:
        total_f = math.fsum(t[5] for t in raw)
        k = len(raw) / total_f if total_f > 0 else 0.0
    else:
        k = 1.0
    bets = []
    for rec, side, col, o, p, f, over, both in raw:
        stake = 1.0 if strategy is Strategy.LEVEL else k * f
        won = rec.outcome.index == col
        bets.append(
            BetRecord(rec.match_id, rec.league_id, rec.date, side, o, p, 1.0 / o, f,
                      stake, settle(stake, o, won), won, over, both)
        )
    result = BacktestResult(strategy, spec, bets, k, forecasts.days_fitted, forecasts.days_skipped)
    result.per_league_cumulative = cumulative_profit(bets)
    return result


def cumulative_profit(bets: Sequence[BetRecord]) -> dict[str, list[tuple[dt.date, float]]]:
    """Running profit per league and overall ("ALL"), one point per bet."""
    series: dict[str, list[tuple[dt.date, float]]] = defaultdict(list)
    totals: dict[str, float] = defaultdict(float)
    for b in bets:
        for key in (b.league_id, "ALL"):
            totals[key] += b.profit
            series[key].append((b.date, totals[key]))
    return dict(series)


# ---------------------------------------------------------------------------
# Overround analysis
# ---------------------------------------------------------------------------

OVERROUND_EDGES = (0.0, 2.5, 5.0, 7.5)


@dataclass(frozen=True)
class OverroundBin:
    label: str
    lower: float
    upper: float
    count: int
    mean_overround: float | None
    mean_profit: float | None
    ci: BootstrapCI | None


def overround_bin_index(overround_pct: float, edges: Sequence[float] = OVERROUND_EDGES) -> int:
    return int(np.searchsorted(np.asarray(edges), overround_pct, side="right"))


def bin_by_overround(
    result: BacktestResult,
    edges: Sequence[float] = OVERROUND_EDGES,
    replicates: int = DEFAULT_REPLICATES,
    seed: int | None = DEFAULT_SEED,
) -> list[OverroundBin]:
    """Mean profit (percent of stake) per overround interval, in percent."""
    if not result.bets:
        raise NotEnoughDataError("no bets to bin")
    bounds = [-math.inf, *edges, math.inf]
    members: list[list[BetRecord]] = [[] for _ in range(len(bounds) - 1)]
    for b in result.bets:
        members[overround_bin_index(100.0 * b.overround_at_bet, edges)].append(b)
    out = []
    for k, group in enumerate(members):
        lo, hi = bounds[k], bounds[k + 1]
        label = f"<{hi:g}" if math.isinf(lo) else (f">={lo:g}" if math.isinf(hi) else f"[{lo:g},{hi:g})")
        if not group:
            out.append(OverroundBin(label, lo, hi, 0, None, None, None))
            continue
        profits = 100.0 * np.array([b.profit for b in group])
        ci = bootstrap_mean_ci(profits, replicates, seed) if len(group) >= 2 else None
        out.append(
            OverroundBin(
                label, lo, hi, len(group),
                float(np.mean([100.0 * b.overround_at_bet for b in group])),
                float(profits.mean()), ci,
            )
        )
    return out


def overround_distribution(table: FeatureTable, width_pct: float = 0.5) -> tuple[np.ndarray, np.ndarray, float]:
    """Histogram of best-odds overround (percent) over rows with odds.

    Returns (counts, bin_edges, share_negative).
    """
    ok = np.all(np.isfinite(table.max_odds), axis=1)
    if not ok.any():
        raise NotEnoughDataError("no matches with odds")
    over = 100.0 * (np.sum(1.0 / table.max_odds[ok], axis=1) - 1.0)
    lo = math.floor(over.min() / width_pct) * width_pct
    hi = (math.floor(over.max() / width_pct) + 1) * width_pct
    edges = np.arange(lo, hi + width_pct / 2, width_pct)
    counts, edges = np.histogram(over, bins=edges)
    return counts, edges, float(np.mean(over < 0.0))


def arbitrage_stakes(odds: Sequence[float]) -> tuple[np.ndarray, float]:
    """Stakes proportional to implied probabilities and the guaranteed return per unit staked."""
    implied = 1.0 / np.asarray(odds, dtype=float)
    stakes = implied / implied.sum()
    return stakes, float(1.0 / implied.sum() - 1.0)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

BET_COLUMNS = (
    "match_id", "league_id", "date", "side", "decimal_odds", "model_prob", "implied_prob",
    "raw_kelly_fraction", "stake", "profit", "won", "overround_at_bet", "both_sides",
)


def write_bets_csv(result: BacktestResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BET_COLUMNS)
        for b in result.bets:
            w.writerow([
                b.match_id, b.league_id, b.date.isoformat(), b.side.value, repr(b.decimal_odds),
                repr(b.model_prob), repr(b.implied_prob), repr(b.raw_kelly_fraction),
                repr(b.stake), repr(b.profit), int(b.won), repr(b.overround_at_bet), int(b.both_sides),
            ])


def write_cumulative_csv(result: BacktestResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("series", "bet_number", "date", "cumulative_profit"))
        for key in sorted(result.per_league_cumulative):
            for n, (date, value) in enumerate(result.per_league_cumulative[key], start=1):
                w.writerow([key, n, date.isoformat(), repr(value)])


def summary_dict(
    result: BacktestResult,
    replicates: int = DEFAULT_REPLICATES,
    seed: int | None = DEFAULT_SEED,
    bins: Sequence[OverroundBin] | None = None,
) -> dict:
    ci = result.profit_ci(replicates, seed)
    out = {
        "combo": result.spec.combo_label,
        "with_odds": result.spec.use_home_implied_prob,
        "predictors": result.spec.columns,
        "strategy": result.strategy.value,
        "n_bets": result.n_bets,
        "mean_profit_pct": None if math.isnan(result.mean_profit_pct) else result.mean_profit_pct,
        "ci_lower": None if ci is None else ci.lower,
        "ci_upper": None if ci is None else ci.upper,
        "replicates": replicates,
        "seed": seed,
        "mean_stake": None if not result.bets else result.mean_stake,
        "kelly_constant": result.kelly_constant,
        "days_fitted": result.days_fitted,
        "days_skipped": result.days_skipped,
        "both_sides_bets": sum(b.both_sides for b in result.bets),
    }
    if bins is not None:
        out["overround_bins"] = [
            {**{k: v for k, v in asdict(b).items() if k != "ci"},
             "ci_lower": None if b.ci is None else b.ci.lower,
             "ci_upper": None if b.ci is None else b.ci.upper}
            for b in bins
        ]
        for row in out["overround_bins"]:
            for key in ("lower", "upper"):
                if math.isinf(row[key]):
                    row[key] = None
    return out


def write_summary_json(summary: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n")
