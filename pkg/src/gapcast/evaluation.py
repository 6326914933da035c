"""Accuracy of GAP statistic predictions, bootstrap intervals and reference numbers."""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NotEnoughDataError
from .records import ALL_STATISTICS, Statistic
from .synthetic import synth_league, synth_store  # noqa: F401  (oracle generators)

logger = logging.getLogger(__name__)

DEFAULT_REPLICATES = 10_000
DEFAULT_SEED = 20_190_601


class Side(str, enum.Enum):
    HOME = "home"
    AWAY = "away"


# ---------------------------------------------------------------------------
# Mean absolute error
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaeReport:
    statistic: Statistic
    side: Side
    mae_gap: float
    mae_baseline: float
    n: int


def observed_matrix(dataset, statistic: Statistic) -> np.ndarray:
    """(n, 2) observed home/away values; NaN where not recorded."""
    out = np.full((len(dataset.records), 2), np.nan)
    for i, rec in enumerate(dataset.records):
        pair = rec.stat(statistic)
        if pair is not None:
            out[i] = pair
    return out


def running_mean_baseline(dataset, observed: np.ndarray) -> np.ndarray:
    """Per league and side, mean of the statistic over matches on earlier dates.

    NaN until the league has at least one earlier observation.
    """
    out = np.full_like(observed, np.nan)
    totals: dict[str, np.ndarray] = defaultdict(lambda: np.zeros(2))
    counts: dict[str, np.ndarray] = defaultdict(lambda: np.zeros(2))
    pending: list[int] = []
    current = None

    def flush() -> None:
        for j in pending:
            row = observed[j]
            ok = np.isfinite(row)
            lg = dataset.records[j].league_id
            totals[lg][ok] += row[ok]
            counts[lg][ok] += 1
        pending.clear()

    for i, rec in enumerate(dataset.records):
        if rec.date != current:
            flush()
            current = rec.date
        c = counts[rec.league_id]
        with np.errstate(invalid="ignore", divide="ignore"):
            out[i] = np.where(c > 0, totals[rec.league_id] / np.maximum(c, 1), np.nan)
        pending.append(i)
    return out


def full_sample_baseline(dataset, observed: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Per league and side, mean over the evaluated rows themselves (uses hindsight)."""
    out = np.full_like(observed, np.nan)
    leagues = np.array([r.league_id for r in dataset.records])
    for lg in np.unique(leagues[rows]):
        sel = rows & (leagues == lg)
        out[sel] = np.nanmean(observed[sel], axis=0)
    return out


def mae_table(
    dataset,
    predictions: Mapping[Statistic, np.ndarray],
    baseline: str = "running",
    mask: np.ndarray | None = None,
) -> list[MaeReport]:
    """MAE of GAP predictions and of a mean forecast, per statistic and side.

    ``predictions`` maps each statistic to the (n, 2) walk-forward prediction
    matrix. Evaluated rows are eligible matches (or ``mask``) where the
    observation, the GAP prediction and the baseline are all available.
    """
    if baseline not in ("running", "full"):
        raise ValueError(f"unknown baseline {baseline!r}")
    base_rows = np.array([f.eligible for f in dataset.flags], dtype=bool) if mask is None else np.asarray(mask)
    reports = []
    for stat in ALL_STATISTICS:
        if stat not in predictions:
            continue
        obs = observed_matrix(dataset, stat)
        pred = predictions[stat]
        if baseline == "running":
            base = running_mean_baseline(dataset, obs)
        for col, side in enumerate(Side):
            rows = base_rows & np.isfinite(obs[:, col]) & np.isfinite(pred[:, col])
            if baseline == "full":
                base = full_sample_baseline(dataset, obs, rows)
            rows &= np.isfinite(base[:, col])
            n = int(rows.sum())
            if n == 0:
                logger.warning("no rows to evaluate for %s %s", stat.value, side.value)
                continue
            reports.append(
                MaeReport(
                    stat, side,
                    float(np.mean(np.abs(pred[rows, col] - obs[rows, col]))),
                    float(np.mean(np.abs(base[rows, col] - obs[rows, col]))),
                    n,
                )
            )
    reports.sort(key=lambda r: (r.side is Side.AWAY, ALL_STATISTICS.index(r.statistic)))
    return reports


MAE_COLUMNS = ("side", "statistic", "mae_gap", "mae_baseline", "n")


def write_mae_csv(reports: Iterable[MaeReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MAE_COLUMNS)
        for r in reports:
            w.writerow([r.side.value, r.statistic.value, f"{r.mae_gap:.4f}", f"{r.mae_baseline:.4f}", r.n])


SCATTER_COLUMNS = ("match_id", "statistic", "side", "predicted", "observed")


def write_scatter_csv(
    dataset,
    predictions: Mapping[Statistic, np.ndarray],
    path: str | Path,
    eligible_only: bool = True,
) -> int:
    """(predicted, observed) pairs per statistic and side; returns the row count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCATTER_COLUMNS)
        for stat in ALL_STATISTICS:
            if stat not in predictions:
                continue
            pred = predictions[stat]
            for i, (rec, flag) in enumerate(zip(dataset.records, dataset.flags)):
                if eligible_only and not flag.eligible:
                    continue
                pair = rec.stat(stat)
                if pair is None:
                    continue
                for col, side in enumerate(Side):
                    if math.isfinite(pred[i, col]):
                        w.writerow([rec.match_id, stat.value, side.value, f"{pred[i, col]:.6f}", pair[col]])
                        n += 1
    return n


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapCI:
    point: float
    lower: float
    upper: float
    replicates: int
    level: float = 0.95


def bootstrap_mean_ci(
    values: Sequence[float],
    replicates: int = DEFAULT_REPLICATES,
    seed: int | None = DEFAULT_SEED,
    level: float = 0.95,
    chunk_elements: int = 4_000_000,
) -> BootstrapCI:
    """Percentile bootstrap interval for the mean of ``values``."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise NotEnoughDataError("bootstrap needs at least two values")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    rng = np.random.default_rng(seed)
    n = len(x)
    means = np.empty(replicates)
    step = max(1, chunk_elements // n)
    for start in range(0, replicates, step):
        stop = min(start + step, replicates)
        idx = rng.integers(0, n, size=(stop - start, n))
        means[start:stop] = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(means, [alpha, 1.0 - alpha])
    point = float(x.mean())
    # Keep the interval ordered around the point when every value is equal.
    return BootstrapCI(point, float(min(lower, point)), float(max(upper, point)), replicates, level)


# ---------------------------------------------------------------------------
# Published reference numbers and comparison
# ---------------------------------------------------------------------------

REFERENCE_MAE: dict[tuple[Side, Statistic], tuple[float, float]] = {
    (Side.HOME, Statistic.GOALS): (1.01, 1.02),
    (Side.HOME, Statistic.SHOTS_ON_TARGET): (4.77, 5.22),
    (Side.HOME, Statistic.SHOTS_OFF_TARGET): (1.86, 3.77),
    (Side.HOME, Statistic.CORNERS): (2.31, 2.34),
    (Side.AWAY, Statistic.GOALS): (0.87, 0.85),
    (Side.AWAY, Statistic.SHOTS_ON_TARGET): (3.09, 3.24),
    (Side.AWAY, Statistic.SHOTS_OFF_TARGET): (1.63, 3.09),
    (Side.AWAY, Statistic.CORNERS): (2.05, 2.08),
}
MAE_TOLERANCE = 0.15

REFERENCE_AIC_NO_ODDS = {
    "A1": -11646.1, "A3": -11404.1, "A2": -10358.1, "A4": -9366.6,
    "A5": -18.6, "A6": -19.5, "A7": -7.0, "A0": 0.0,
}
# Ordered groups; labels within a group may appear in any order.
REFERENCE_AIC_ORDER = (("A1",), ("A3",), ("A2",), ("A4",), ("A5", "A6", "A7"), ("A0",))

REFERENCE_B1_KELLY_ODDS = (5.01, 3.38, 6.76)
REFERENCE_NEGATIVE_OVERROUND_SHARE = 0.18
NEGATIVE_OVERROUND_TOLERANCE = 0.03


def ordering_matches(labels_in_order: Sequence[str], groups=REFERENCE_AIC_ORDER) -> bool:
    """True when ``labels_in_order`` respects the grouped reference ordering."""
    wanted = [label for g in groups for label in g]
    seen = [label for label in labels_in_order if label in wanted]
    if sorted(seen) != sorted(wanted):
        return False
    rank = {label: k for k, g in enumerate(groups) for label in g}
    ranks = [rank[label] for label in seen]
    return all(a <= b for a, b in zip(ranks, ranks[1:]))


@dataclass(frozen=True)
class ComparisonRow:
    item: str
    reference: str
    measured: str
    within_tolerance: bool | None


def comparison_table(
    mae: Sequence[MaeReport] = (),
    aic_order: Sequence[str] | None = None,
    b1_kelly_profit: float | None = None,
    negative_overround_share: float | None = None,
) -> list[ComparisonRow]:
    """Side-by-side reference versus measured values for manual review."""
    rows = []
    by_key = {(r.side, r.statistic): r for r in mae}
    for key, (gap_ref, base_ref) in REFERENCE_MAE.items():
        side, stat = key
        r = by_key.get(key)
        label = f"MAE {side.value} {stat.value}"
        if r is None:
            rows.append(ComparisonRow(label, f"{gap_ref:.2f} / {base_ref:.2f}", "n/a", None))
            continue
        ok = abs(r.mae_gap - gap_ref) <= MAE_TOLERANCE and abs(r.mae_baseline - base_ref) <= MAE_TOLERANCE
        rows.append(ComparisonRow(label, f"{gap_ref:.2f} / {base_ref:.2f}", f"{r.mae_gap:.2f} / {r.mae_baseline:.2f}", ok))
    ref_order = " < ".join(",".join(g) for g in REFERENCE_AIC_ORDER)
    if aic_order is None:
        rows.append(ComparisonRow("AIC ordering without odds", ref_order, "n/a", None))
    else:
        rows.append(ComparisonRow("AIC ordering without odds", ref_order, " < ".join(aic_order), ordering_matches(aic_order)))
    point, lo, hi = REFERENCE_B1_KELLY_ODDS
    rows.append(
        ComparisonRow(
            "B1+odds Kelly mean profit %",
            f"{point:+.2f} ({lo:+.2f}, {hi:+.2f})",
            "n/a" if b1_kelly_profit is None else f"{b1_kelly_profit:+.2f}",
            None if b1_kelly_profit is None else lo < b1_kelly_profit < hi,
        )
    )
    share = REFERENCE_NEGATIVE_OVERROUND_SHARE
    rows.append(
        ComparisonRow(
            "negative overround share",
            f"{share:.0%} +/- {NEGATIVE_OVERROUND_TOLERANCE:.0%}",
            "n/a" if negative_overround_share is None else f"{negative_overround_share:.1%}",
            None
            if negative_overround_share is None
            else abs(negative_overround_share - share) <= NEGATIVE_OVERROUND_TOLERANCE + 1e-12,
        )
    )
    return rows


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    width = max([len(r.item) for r in rows] + [4])
    lines = [f"{'item':<{width}}  {'reference':<24}  {'measured':<40}  status"]
    for r in rows:
        status = {True: "ok", False: "OUTSIDE", None: "not run"}[r.within_tolerance]
        lines.append(f"{r.item:<{width}}  {r.reference:<24}  {r.measured:<40}  {status}")
    return "\n".join(lines)


def write_comparison_csv(rows: Sequence[ComparisonRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("item", "reference", "measured", "within_tolerance"))
        for r in rows:
            w.writerow([r.item, r.reference, r.measured, "" if r.within_tolerance is None else r.within_tolerance])
