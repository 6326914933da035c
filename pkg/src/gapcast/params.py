"""Least-squares selection of GAP rating parameters and the per-season schedule."""

from __future__ import annotations

import csv
import itertools
import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DataFormatError, InputError, NotEnoughDataError
from .gap import DEFAULT_SEED_PARAMS, LeagueTape, RatingParams, build_tapes, replay_tape
from .records import Statistic, parse_statistic

logger = logging.getLogger(__name__)

LAMBDA_BOUNDS = (1e-6, 2.0)
PHI_BOUNDS = (1e-6, 1.0 - 1e-6)
GRID_LAMBDA = tuple(round(0.05 + 0.1 * i, 10) for i in range(10))
GRID_PHI = (0.1, 0.3, 0.5, 0.7, 0.9)
MAX_ITER = 200
REL_TOL = 1e-6


@dataclass(frozen=True)
class ObjectiveReport:
    params: RatingParams
    sse: float
    n_matches: int
    per_league_sse: dict[str, float]


def _as_params(params) -> RatingParams:
    return params if isinstance(params, RatingParams) else RatingParams(*params)


def objective(
    params: RatingParams | Sequence[float],
    history: Mapping[str, LeagueTape],
    cutoff: str | None = None,
) -> ObjectiveReport:
    """Sum of squared prediction errors over every league, seasons before ``cutoff``.

    Each league is replayed from zero ratings; every match recording the
    statistic contributes, eligible for betting or not.
    """
    params = _as_params(params)
    per_league = {}
    n = 0
    total = 0.0
    for league in sorted(history):
        tape = history[league]
        k = tape.seasons_before(cutoff)
        if k == 0:
            continue
        rep = replay_tape(tape, params, k)
        per_league[league] = rep.sse
        total += rep.sse
        n += int(tape.has_stat[: tape.season_start[k]].sum())
    return ObjectiveReport(params, total, n, per_league)


def project(x: Sequence[float]) -> np.ndarray:
    lo = np.array([LAMBDA_BOUNDS[0], PHI_BOUNDS[0], PHI_BOUNDS[0]])
    hi = np.array([LAMBDA_BOUNDS[1], PHI_BOUNDS[1], PHI_BOUNDS[1]])
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def nelder_mead_box(
    func: Callable[[np.ndarray], float],
    x0: Sequence[float],
    steps: Sequence[float] = (0.05, 0.1, 0.1),
    max_iter: int = MAX_ITER,
    rel_tol: float = REL_TOL,
) -> tuple[np.ndarray, float]:
    """Nelder-Mead simplex search with every trial point projected into the box.

    Stops when the spread of simplex values drops below
    ``rel_tol * (1 + |f_best|)`` or after ``max_iter`` iterations.
    """
    x0 = project(x0)
    simplex = [x0]
    hi = np.array([LAMBDA_BOUNDS[1], PHI_BOUNDS[1], PHI_BOUNDS[1]])
    for i, step in enumerate(steps):
        x = x0.copy()
        x[i] = x[i] + step if x[i] + step <= hi[i] else x[i] - step
        simplex.append(project(x))
    values = [func(x) for x in simplex]

    for _ in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if values[-1] - values[0] < rel_tol * (1.0 + abs(values[0])):
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = project(centroid + (centroid - worst))
        fr = func(xr)
        if fr < values[0]:
            xe = project(centroid + 2.0 * (centroid - worst))
            fe = func(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = project(centroid + 0.5 * (xr - centroid))
            else:
                xc = project(centroid + 0.5 * (worst - centroid))
            fc = func(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                best = simplex[0]
                simplex = [best] + [project(best + 0.5 * (x - best)) for x in simplex[1:]]
                values = [values[0]] + [func(x) for x in simplex[1:]]
    i = int(np.argmin(values))
    return simplex[i], values[i]


def grid_points() -> list[tuple[float, float, float]]:
    return list(itertools.product(GRID_LAMBDA, GRID_PHI, GRID_PHI))


def optimize(
    history: Mapping[str, LeagueTape],
    seed_params: RatingParams = DEFAULT_SEED_PARAMS,
    cutoff: str | None = None,
    jobs: int = 1,
) -> ObjectiveReport:
    """Best parameters found by grid seeding followed by simplex refinement.

    The returned objective never exceeds the seed's or any grid point's; ties
    keep the earlier candidate, so a flat objective returns the seed.
    """
    n = sum(int(t.has_stat[: t.season_start[t.seasons_before(cutoff)]].sum()) for t in history.values())
    if n == 0:
        raise NotEnoughDataError("no matches with the statistic before the cutoff")

    cache: dict[tuple[float, float, float], float] = {}

    def f(x) -> float:
        key = tuple(float(v) for v in x)
        if key not in cache:
            cache[key] = objective(key, history, cutoff).sse
        return cache[key]

    seed = seed_params.as_tuple()
    grid = grid_points()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for key, value in zip(grid, pool.map(lambda p: objective(p, history, cutoff).sse, grid)):
                cache[key] = value
    best_x, best_f = seed, f(seed)
    for point in grid:
        value = f(point)
        if value < best_f:
            best_x, best_f = point, value
    x, fx = nelder_mead_box(f, best_x)
    if fx < best_f:
        best_x, best_f = tuple(float(v) for v in x), fx
    return objective(best_x, history, cutoff)


@dataclass(frozen=True)
class ScheduleEntry:
    statistic: Statistic
    season: str
    params: RatingParams
    sse: float
    n_matches: int


class ParamSchedule(Mapping):
    """Mapping ``(statistic, season) -> RatingParams`` with fit diagnostics."""

    def __init__(self, entries: Iterable[ScheduleEntry] = ()) -> None:
        self.entries = sorted(entries, key=lambda e: (e.statistic.value, e.season))
        self._map = {(e.statistic, e.season): e.params for e in self.entries}

    def __getitem__(self, key):
        return self._map[key]

    def __iter__(self):
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def statistics(self) -> list[Statistic]:
        return sorted({e.statistic for e in self.entries}, key=lambda s: s.value)


def schedule_params(
    dataset,
    statistics: Iterable[Statistic],
    seed_params: RatingParams = DEFAULT_SEED_PARAMS,
    jobs: int = 1,
    tapes: Mapping[Statistic, Mapping[str, LeagueTape]] | None = None,
) -> ParamSchedule:
    """Fit parameters for every season after the first one with data.

    Season ``s`` is fitted on all seasons strictly before ``s`` (all leagues
    pooled); each fit is seeded with the previous season's optimum.
    """
    entries = []
    for stat in statistics:
        history = tapes[stat] if tapes is not None else build_tapes(dataset, stat)
        seasons = sorted({s for tape in history.values() for s in tape.seasons})
        seed = seed_params
        for season in seasons[1:]:
            report = optimize(history, seed, cutoff=season, jobs=jobs)
            logger.info(
                "%s %s: lambda=%.4f phi1=%.4f phi2=%.4f sse=%.1f",
                stat.value, season, *report.params.as_tuple(), report.sse,
            )
            entries.append(ScheduleEntry(stat, season, report.params, report.sse, report.n_matches))
            seed = report.params
    return ParamSchedule(entries)


SCHEDULE_COLUMNS = ("statistic", "season", "lambda", "phi1", "phi2", "sse", "n_matches")


def write_schedule(schedule: ParamSchedule, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHEDULE_COLUMNS)
        for e in schedule.entries:
            writer.writerow(
                [e.statistic.value, e.season, repr(e.params.lam), repr(e.params.phi1),
                 repr(e.params.phi2), repr(e.sse), e.n_matches]
            )


def read_schedule(path: str | Path) -> ParamSchedule:
    path = Path(path)
    if not path.exists():
        raise InputError(f"parameter schedule not found: {path}")
    entries = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SCHEDULE_COLUMNS:
            raise DataFormatError(f"{path}: unexpected schedule header {reader.fieldnames}")
        for row in reader:
            entries.append(
                ScheduleEntry(
                    parse_statistic(row["statistic"]),
                    row["season"],
                    RatingParams(float(row["lambda"]), float(row["phi1"]), float(row["phi2"])),
                    float(row["sse"]),
                    int(row["n_matches"]),
                )
            )
    return ParamSchedule(entries)
