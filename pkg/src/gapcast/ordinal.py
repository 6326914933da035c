"""Cumulative-logit (proportional odds) match outcome model.

Outcomes are ordered home win > draw > away win. With linear predictor
``eta = x @ coefficients``::

    P(home)          = logistic(cut_home + eta)
    P(home or draw)  = logistic(cut_homedraw + eta),   cut_homedraw >= cut_home

Fitting minimises the squared distance between forecast and one-hot outcome
vectors by default (``method="least_squares"``); ``method="ml"`` maximises
the multinomial likelihood instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import FeatureError, FitError
from .gap import StatPrediction
from .ingest import OddsSummary, try_best_odds
from .records import ALL_STATISTICS, MATCH_DATA_STATISTICS, MatchRecord, Statistic

logger = logging.getLogger(__name__)

ON, OFF, CORNERS, GOALS = (
    Statistic.SHOTS_ON_TARGET,
    Statistic.SHOTS_OFF_TARGET,
    Statistic.CORNERS,
    Statistic.GOALS,
)

OBSERVED_COMBOS: dict[str, tuple[Statistic, ...]] = {
    "A0": (),
    "A1": (ON, OFF, CORNERS),
    "A2": (ON, OFF),
    "A3": (ON, CORNERS),
    "A4": (ON,),
    "A5": (OFF, CORNERS),
    "A6": (CORNERS,),
    "A7": (OFF,),
}
_BASE_PREDICTED = {f"B{n}": OBSERVED_COMBOS[f"A{n}"] for n in range(8)}
PREDICTED_COMBOS: dict[str, tuple[Statistic, ...]] = {
    **_BASE_PREDICTED,
    **{f"B{n + 8}": (GOALS, *stats) for n, stats in ((int(k[1:]), v) for k, v in _BASE_PREDICTED.items())},
}
COMBO_ALIASES = {"B16": "B0"}
MAX_PREDICTORS = 5
MIN_TRAINING = 50


@dataclass(frozen=True)
class PredictorSpec:
    use_home_implied_prob: bool = False
    observed_stats: frozenset[Statistic] = frozenset()
    predicted_stats: frozenset[Statistic] = frozenset()
    combo_label: str = ""

    def __post_init__(self) -> None:
        if self.observed_stats and self.predicted_stats:
            raise ValueError("observed and predicted statistics cannot be mixed")
        if not set(self.observed_stats) <= MATCH_DATA_STATISTICS:
            raise ValueError("goals cannot be an observed predictor")
        if self.n_predictors > MAX_PREDICTORS:
            raise ValueError(f"at most {MAX_PREDICTORS} predictors")

    @property
    def n_predictors(self) -> int:
        return int(self.use_home_implied_prob) + len(self.observed_stats) + len(self.predicted_stats)

    @property
    def uses_observed(self) -> bool:
        return bool(self.observed_stats)

    @property
    def columns(self) -> list[str]:
        cols = ["odds_home"] if self.use_home_implied_prob else []
        cols += [f"obs_{s.short}" for s in ALL_STATISTICS if s in self.observed_stats]
        cols += [f"pred_{s.short}" for s in ALL_STATISTICS if s in self.predicted_stats]
        return cols

    @property
    def name(self) -> str:
        return f"{self.combo_label}{'+odds' if self.use_home_implied_prob else ''}"


def combo_spec(label: str, with_odds: bool = False) -> PredictorSpec:
    """Spec for a menu label ("A0".."A7" observed, "B0".."B15" predicted)."""
    label = COMBO_ALIASES.get(label.upper(), label.upper())
    if label in OBSERVED_COMBOS:
        return PredictorSpec(with_odds, frozenset(OBSERVED_COMBOS[label]), frozenset(), label)
    if label in PREDICTED_COMBOS:
        return PredictorSpec(with_odds, frozenset(), frozenset(PREDICTED_COMBOS[label]), label)
    raise ValueError(f"unknown combination label {label!r}")


FEATURE_COLUMNS = (
    "odds_home",
    *(f"obs_{s.short}" for s in ALL_STATISTICS if s in MATCH_DATA_STATISTICS),
    *(f"pred_{s.short}" for s in ALL_STATISTICS),
)


def build_predictors(
    record: MatchRecord,
    predictions: Mapping[Statistic, StatPrediction],
    odds: OddsSummary | None,
    spec: PredictorSpec,
) -> np.ndarray:
    """Predictor vector for one match, in ``spec.columns`` order."""
    values = []
    if spec.use_home_implied_prob:
        if odds is None:
            raise FeatureError(f"{record.match_id}: odds required")
        values.append(odds.implied_home)
    for stat in ALL_STATISTICS:
        if stat in spec.observed_stats:
            pair = record.stat(stat)
            if pair is None:
                raise FeatureError(f"{record.match_id}: {stat.value} not observed")
            values.append(float(pair[0] - pair[1]))
    for stat in ALL_STATISTICS:
        if stat in spec.predicted_stats:
            pred = predictions.get(stat)
            if pred is None:
                raise FeatureError(f"{record.match_id}: no {stat.value} prediction")
            values.append(pred.predicted_home - pred.predicted_away)
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class Forecast:
    p_home: float
    p_draw: float
    p_away: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_home, self.p_draw, self.p_away])


@dataclass(frozen=True)
class OrdinalModel:
    cut_home: float
    cut_homedraw: float
    coefficients: tuple[float, ...]
    spec: PredictorSpec = field(default_factory=PredictorSpec)
    method: str = "least_squares"
    n_train: int = 0
    loss: float = math.nan

    @property
    def n_params(self) -> int:
        return len(self.coefficients) + 2

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        """(n, 3) forecast matrix for the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        if not self.coefficients:
            return _probabilities(self.cut_home, self.cut_homedraw, np.zeros(len(X)))
        eta = X.reshape(-1, len(self.coefficients)) @ np.asarray(self.coefficients, dtype=float)
        return _probabilities(self.cut_home, self.cut_homedraw, eta)

    def theta(self) -> np.ndarray:
        gap = max(self.cut_homedraw - self.cut_home, 1e-12)
        return np.array([self.cut_home, math.log(gap), *self.coefficients])


def _probabilities(cut_home: float, cut_homedraw: float, eta: np.ndarray) -> np.ndarray:
    f1 = expit(cut_home + eta)
    f2 = expit(cut_homedraw + eta)
    p = np.empty((len(eta), 3))
    p[:, 0] = f1
    p[:, 1] = np.maximum(f2 - f1, 0.0)
    p[:, 2] = 1.0 - f2
    return p


def predict(model: OrdinalModel, x: Sequence[float]) -> Forecast:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.coefficients),):
        raise ValueError(f"expected {len(model.coefficients)} predictors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise FeatureError("non-finite predictor value")
    eta = float(x @ np.asarray(model.coefficients)) if len(x) else 0.0
    f1 = float(expit(model.cut_home + eta))
    f2 = float(expit(model.cut_homedraw + eta))
    return Forecast(f1, max(f2 - f1, 0.0), 1.0 - f2)


def _unpack(theta: np.ndarray) -> tuple[float, float, np.ndarray]:
    return theta[0], theta[0] + math.exp(theta[1]), theta[2:]


def _brier_and_grad(theta: np.ndarray, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    c1, c2, beta = _unpack(theta)
    eta = X @ beta
    f1 = expit(c1 + eta)
    f2 = expit(c2 + eta)
    eh = f1 - Y[:, 0]
    ed = (f2 - f1) - Y[:, 1]
    ea = (1.0 - f2) - Y[:, 2]
    n = len(X)
    loss = float(np.sum(eh * eh + ed * ed + ea * ea)) / n
    g1 = 2.0 * (eh - ed) * f1 * (1.0 - f1)
    g2 = 2.0 * (ed - ea) * f2 * (1.0 - f2)
    return loss, _chain(theta, X, g1, g2) / n


def _nll_and_grad(theta: np.ndarray, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    c1, c2, beta = _unpack(theta)
    eta = X @ beta
    f1 = expit(c1 + eta)
    f2 = expit(c2 + eta)
    tiny = 1e-300
    pd_ = np.maximum(f2 - f1, tiny)
    yh, yd, ya = Y[:, 0], Y[:, 1], Y[:, 2]
    n = len(X)
    loss = -float(
        np.sum(yh * np.log(np.maximum(f1, tiny)) + yd * np.log(pd_) + ya * np.log(np.maximum(1.0 - f2, tiny)))
    ) / n
    d1 = f1 * (1.0 - f1)
    d2 = f2 * (1.0 - f2)
    g1 = -yh * (1.0 - f1) + yd * d1 / pd_
    g2 = -yd * d2 / pd_ + ya * f2
    return loss, _chain(theta, X, g1, g2) / n


def _chain(theta: np.ndarray, X: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    grad = np.empty_like(theta)
    grad[0] = np.sum(g1) + np.sum(g2)
    grad[1] = np.sum(g2) * math.exp(theta[1])
    grad[2:] = X.T @ (g1 + g2)
    return grad


_LOSSES = {"least_squares": _brier_and_grad, "ml": _nll_and_grad}


def one_hot(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    Y = np.zeros((len(y), 3))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def null_start(y: np.ndarray, n_coef: int) -> np.ndarray:
    freq = np.bincount(np.asarray(y, dtype=int), minlength=3) / len(y)
    c1 = float(logit(freq[0]))
    c2 = float(logit(freq[0] + freq[1]))
    return np.array([c1, math.log(max(c2 - c1, 1e-12)), *([0.0] * n_coef)])


def fit(
    X: np.ndarray,
    y: Sequence[int],
    spec: PredictorSpec | None = None,
    method: str = "least_squares",
    start: OrdinalModel | np.ndarray | None = None,
) -> OrdinalModel:
    """Fit the model to predictors ``X`` (n, K) and outcome indices ``y``.

    ``y`` uses 0 = home win, 1 = draw, 2 = away win. The search starts from
    the null model (empirical frequencies, zero slopes) unless ``start`` is
    given.
    """
    if method not in _LOSSES:
        raise ValueError(f"unknown fit method {method!r}")
    y = np.asarray(y, dtype=int)
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(y), -1) if X.size else np.zeros((len(y), 0))
    k = X.shape[1]
    if spec is not None and len(spec.columns) != k:
        raise FitError(f"spec wants {len(spec.columns)} predictors, got {k}")
    if len(y) < MIN_TRAINING:
        raise FitError(f"need at least {MIN_TRAINING} training matches, got {len(y)}")
    counts = np.bincount(y, minlength=3)
    if np.any(counts == 0):
        raise FitError(f"every outcome must occur in training data, counts={counts.tolist()}")
    if not np.all(np.isfinite(X)):
        raise FitError("non-finite predictor values in training data")
    if start is None:
        theta0 = null_start(y, k)
    elif isinstance(start, OrdinalModel):
        theta0 = start.theta()
    else:
        theta0 = np.asarray(start, dtype=float)
    Y = one_hot(y)
    result = minimize(
        _LOSSES[method],
        theta0,
        args=(X, Y),
        jac=True,
        method="BFGS",
        options={"gtol": 1e-9, "maxiter": 2000},
    )
    if not np.all(np.isfinite(result.x)):
        raise FitError(f"optimizer diverged: {result.message}")
    c1, c2, beta = _unpack(result.x)
    return OrdinalModel(
        float(c1), float(c2), tuple(float(b) for b in beta),
        spec if spec is not None else PredictorSpec(), method, len(y), float(result.fun),
    )


def least_squares_loss(model: OrdinalModel, X: np.ndarray, y: Sequence[int]) -> float:
    """Sum over matches of squared forecast error against the one-hot outcome."""
    P = model.probabilities(X)
    return float(np.sum((P - one_hot(y)) ** 2))


def log_likelihood(model: OrdinalModel, X: np.ndarray, y: Sequence[int]) -> float:
    P = model.probabilities(X)
    y = np.asarray(y, dtype=int)
    return float(np.sum(np.log(np.maximum(P[np.arange(len(y)), y], 1e-300))))


def aic(model: OrdinalModel, X: np.ndarray, y: Sequence[int]) -> float:
    return 2.0 * model.n_params - 2.0 * log_likelihood(model, X, y)


# ---------------------------------------------------------------------------
# Feature tables over a dataset
# ---------------------------------------------------------------------------


@dataclass
class FeatureTable:
    """All candidate predictors for the eligible matches of a dataset.

    Rows follow dataset order; missing values are NaN.
    """

    record_index: np.ndarray
    dates: np.ndarray
    leagues: list[str]
    outcome: np.ndarray
    columns: dict[str, np.ndarray]
    max_odds: np.ndarray

    def __len__(self) -> int:
        return len(self.record_index)

    def matrix(self, spec: PredictorSpec) -> np.ndarray:
        cols = spec.columns
        if not cols:
            return np.zeros((len(self), 0))
        return np.column_stack([self.columns[c] for c in cols])

    def complete(self, spec: PredictorSpec) -> np.ndarray:
        """Mask of rows carrying every predictor ``spec`` needs."""
        X = self.matrix(spec)
        return np.all(np.isfinite(X), axis=1)


def build_feature_table(
    dataset,
    predictions: Mapping[Statistic, np.ndarray] | None = None,
    eligible_only: bool = True,
) -> FeatureTable:
    """Candidate predictors per match; ``predictions`` maps statistic to (n, 2)."""
    predictions = predictions or {}
    rows = [i for i, f in enumerate(dataset.flags) if f.eligible or not eligible_only]
    n = len(rows)
    cols = {name: np.full(n, np.nan) for name in FEATURE_COLUMNS}
    max_odds = np.full((n, 3), np.nan)
    outcome = np.empty(n, dtype=np.int64)
    dates = np.empty(n, dtype="datetime64[D]")
    leagues = []
    for r, i in enumerate(rows):
        rec = dataset.records[i]
        outcome[r] = rec.outcome.index
        dates[r] = np.datetime64(rec.date, "D")
        leagues.append(rec.league_id)
        odds = try_best_odds(rec)
        if odds is not None:
            cols["odds_home"][r] = odds.implied_home
            max_odds[r] = (odds.max_home, odds.max_draw, odds.max_away)
        for stat in MATCH_DATA_STATISTICS:
            pair = rec.stat(stat)
            if pair is not None:
                cols[f"obs_{stat.short}"][r] = pair[0] - pair[1]
        for stat, pred in predictions.items():
            cols[f"pred_{stat.short}"][r] = pred[i, 0] - pred[i, 1]
    return FeatureTable(np.asarray(rows, dtype=np.int64), dates, leagues, outcome, cols, max_odds)


@dataclass(frozen=True)
class AicRow:
    combo_label: str
    use_odds: bool
    aic: float
    aic_relative: float
    n: int
    error: str | None = None


def aic_table(
    specs: Sequence[PredictorSpec],
    table: FeatureTable,
    method: str = "least_squares",
) -> list[AicRow]:
    """AIC of one in-sample fit per spec, relative to the null model.

    All specs (and the null model) are fitted on the same rows: those that
    carry every predictor any spec in the list needs. Rows are sorted by
    relative AIC; failed fits are reported with their error and sort last.
    """
    needed = {c for spec in specs for c in spec.columns}
    mask = np.ones(len(table), dtype=bool)
    for c in needed:
        mask &= np.isfinite(table.columns[c])
    y = table.outcome[mask]
    try:
        null = fit(np.zeros((len(y), 0)), y, method=method)
    except FitError as exc:
        msg = f"null model: {exc}"
        return [AicRow(s.combo_label, s.use_home_implied_prob, math.nan, math.nan, len(y), msg) for s in specs]
    null_aic = aic(null, np.zeros((len(y), 0)), y)
    rows = []
    for spec in specs:
        X = table.matrix(spec)[mask]
        try:
            model = fit(X, y, spec, method=method)
        except FitError as exc:
            rows.append(AicRow(spec.combo_label, spec.use_home_implied_prob, math.nan, math.nan, len(y), str(exc)))
            continue
        value = aic(model, X, y)
        rows.append(AicRow(spec.combo_label, spec.use_home_implied_prob, value, value - null_aic, len(y)))
    rows.sort(key=lambda r: (r.error is not None, r.aic_relative if r.error is None else 0.0))
    return rows
