"""Command-line interface.

Stages talk through files in the ``--out`` directory::

    matches.jsonl    canonical match store          (ingest, synth)
    schedule.csv     GAP parameters per season      (optimize)
    aic_*.csv        AIC tables                     (aic)
    backtest/        bets, summaries, cumulative    (backtest)
    mae.csv          statistic prediction accuracy  (mae)

Exit codes: 0 success, 2 usage error, 3 missing or unusable input,
4 malformed data, 5 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .betting import (
    Strategy,
    bin_by_overround,
    gap_prediction_columns,
    overround_distribution,
    run_backtest,
    summary_dict,
    walk_forward_forecasts,
    write_bets_csv,
    write_cumulative_csv,
    write_summary_json,
)
from .errors import DataFormatError, GapcastError, InputError
from .evaluation import (
    DEFAULT_REPLICATES,
    DEFAULT_SEED,
    comparison_table,
    format_comparison,
    mae_table,
    write_comparison_csv,
    write_mae_csv,
    write_scatter_csv,
)
from .gap import DEFAULT_SEED_PARAMS, RatingParams
from .ingest import IngestConfig, default_config
from .ordinal import (
    OBSERVED_COMBOS,
    PREDICTED_COMBOS,
    AicRow,
    aic_table,
    build_feature_table,
    combo_spec,
)
from .params import ParamSchedule, read_schedule, schedule_params, write_schedule
from .records import ALL_STATISTICS, Statistic, parse_statistic
from .store import Dataset, ingest_directory, read_store, summarize, write_store

logger = logging.getLogger("gapcast")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_FORMAT = 4
EXIT_COMPUTE = 5

STORE_NAME = "matches.jsonl"
SCHEDULE_NAME = "schedule.csv"

EXPECTED_LAYOUT = """expected layout: one football-data.co.uk style CSV per league and season, e.g.
    DATA_DIR/E0/0001.csv   DATA_DIR/E0/0102.csv   DATA_DIR/SP1_2005-06.csv
The league code comes from the file name (or its first token), the season
from a token such as 0001, 2000-01 or 2000_2001 in the file or folder name."""


@dataclass
class RunConfig:
    out: Path
    data_dir: Path | None = None
    leagues: list[str] | None = None
    statistics: list[Statistic] = field(default_factory=lambda: list(ALL_STATISTICS))
    combos: list[str] | None = None
    strategies: list[Strategy] = field(default_factory=lambda: [Strategy.LEVEL, Strategy.KELLY])
    odds_flags: list[bool] = field(default_factory=lambda: [True])
    seed: int = DEFAULT_SEED
    replicates: int = DEFAULT_REPLICATES
    jobs: int = 1
    method: str = "least_squares"

    @property
    def store_path(self) -> Path:
        return self.out / STORE_NAME

    @property
    def schedule_path(self) -> Path:
        return self.out / SCHEDULE_NAME


def _split(text: str | None) -> list[str] | None:
    if text is None or text.strip().lower() == "all":
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _validate_combos(labels: Sequence[str] | None, allowed: Sequence[str]) -> list[str] | None:
    if labels is None:
        return None
    out = []
    for label in labels:
        norm = "B0" if label.upper() == "B16" else label.upper()
        if norm not in allowed:
            raise argparse.ArgumentTypeError(f"unknown combination {label!r}; choose from {', '.join(allowed)}")
        out.append(norm)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(out=Path(args.out))
    cfg.data_dir = Path(args.data_dir) if getattr(args, "data_dir", None) else None
    cfg.leagues = _split(getattr(args, "leagues", None))
    stats = _split(getattr(args, "stats", None))
    if stats is not None:
        try:
            cfg.statistics = [parse_statistic(s) for s in stats]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    cfg.combos = _split(getattr(args, "combos", None))
    strategy = getattr(args, "strategy", None)
    if strategy and strategy != "both":
        cfg.strategies = [Strategy(strategy)]
    odds = getattr(args, "with_odds", None)
    if odds is not None:
        cfg.odds_flags = [odds]
    elif getattr(args, "command", None) == "aic":
        cfg.odds_flags = [False, True]
    cfg.seed = getattr(args, "seed", DEFAULT_SEED)
    cfg.replicates = getattr(args, "replicates", DEFAULT_REPLICATES)
    cfg.jobs = getattr(args, "jobs", 1)
    cfg.method = getattr(args, "method", "least_squares")
    return cfg


def _load_store(cfg: RunConfig) -> Dataset:
    dataset = read_store(cfg.store_path)
    if cfg.leagues:
        dataset = dataset.subset(cfg.leagues)
    if not dataset.records:
        raise InputError(f"{cfg.store_path}: no matches for the selected leagues")
    return dataset


def _load_schedule(cfg: RunConfig) -> ParamSchedule:
    return read_schedule(cfg.schedule_path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.data_dir is None:
        raise InputError("--data-dir is required")
    if not cfg.data_dir.is_dir() or not any(cfg.data_dir.rglob("*.csv")):
        raise InputError(f"no CSV files found under {cfg.data_dir}\n{EXPECTED_LAYOUT}")
    config = IngestConfig.load(args.config, include_closing=args.closing_odds) if args.config or args.closing_odds else default_config()
    dataset, report = ingest_directory(cfg.data_dir, cfg.leagues, config, min_season=args.min_season)
    for failure in report.failures:
        print(f"failed: {failure}", file=sys.stderr)
    if not dataset.records:
        raise InputError(f"no league parsed successfully under {cfg.data_dir}\n{EXPECTED_LAYOUT}")
    write_store(dataset, cfg.store_path)
    rows = summarize(dataset, config)
    width = max(len(r.name) for r in rows)
    print(f"{'league':<{width}}  {'matches':>8}  {'with data':>9}  {'eligible':>8}")
    for r in rows:
        print(f"{r.name:<{width}}  {r.matches:>8}  {r.with_match_data:>9}  {r.eligible:>8}")
    print(
        f"{'total':<{width}}  {sum(r.matches for r in rows):>8}  "
        f"{sum(r.with_match_data for r in rows):>9}  {sum(r.eligible for r in rows):>8}"
    )
    print(f"{report.files} files, {report.duplicates} duplicate rows dropped; store: {cfg.store_path}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args: argparse.Namespace) -> int:
    from .synthetic import synth_store

    dataset, _ = synth_store(
        n_leagues=args.n_leagues, n_teams=args.n_teams, n_seasons=args.n_seasons, seed=cfg.seed
    )
    write_store(dataset, cfg.store_path)
    print(f"{len(dataset)} synthetic matches written to {cfg.store_path}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args: argparse.Namespace) -> int:
    dataset = _load_store(cfg)
    seed = RatingParams(*args.seed_params) if args.seed_params else DEFAULT_SEED_PARAMS
    schedule = schedule_params(dataset, cfg.statistics, seed, jobs=cfg.jobs)
    write_schedule(schedule, cfg.schedule_path)
    for e in schedule.entries:
        print(
            f"{e.statistic.value:<17} {e.season}  lambda={e.params.lam:.4f}  "
            f"phi1={e.params.phi1:.4f}  phi2={e.params.phi2:.4f}  n={e.n_matches}"
        )
    if not schedule.entries:
        print("store covers a single season: schedule is empty")
    print(f"schedule: {cfg.schedule_path}")
    return EXIT_OK


def _stars(spec) -> list[str]:
    stats = spec.observed_stats or spec.predicted_stats
    return ["*" if s in stats else "" for s in ALL_STATISTICS]


def write_aic_csv(rows_by_flag: dict[bool, list[AicRow]], labels: Sequence[str], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lookup = {(flag, r.combo_label): r for flag, rows in rows_by_flag.items() for r in rows}
    header = ["combo", *(s.short for s in ALL_STATISTICS), "aic_without_odds", "aic_with_odds", "n", "error"]

    def cell(flag: bool, label: str) -> str:
        r = lookup.get((flag, label))
        return "" if r is None or r.error else f"{r.aic_relative:.1f}"

    # Order rows like the published tables: by AIC without odds when available.
    key_flag = False if False in rows_by_flag else True
    order = [r.combo_label for r in rows_by_flag[key_flag]]
    order += [label for label in labels if label not in order]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for label in order:
            spec = combo_spec(label)
            errors = [lookup[(f, label)].error for f in rows_by_flag if lookup.get((f, label)) and lookup[(f, label)].error]
            n = next((lookup[(f, label)].n for f in rows_by_flag if (f, label) in lookup), "")
            w.writerow([label, *_stars(spec), cell(False, label), cell(True, label), n, "; ".join(errors)])


def cmd_aic(cfg: RunConfig, args: argparse.Namespace) -> int:
    dataset = _load_store(cfg)
    combos = cfg.combos
    observed = [c for c in (combos or OBSERVED_COMBOS) if c.upper() in OBSERVED_COMBOS]
    predicted = [c for c in (combos or PREDICTED_COMBOS) if c.upper() in PREDICTED_COMBOS or c.upper() == "B16"]
    preds = {}
    if predicted:
        schedule = _load_schedule(cfg)
        needed = sorted({s for c in predicted for s in combo_spec(c).predicted_stats}, key=ALL_STATISTICS.index)
        preds = gap_prediction_columns(dataset, schedule, needed)
    table = build_feature_table(dataset, preds)
    for name, labels in (("observed", observed), ("predicted", predicted)):
        if not labels:
            continue
        labels = [combo_spec(c).combo_label for c in labels]
        rows_by_flag = {}
        for flag in cfg.odds_flags:
            rows_by_flag[flag] = aic_table([combo_spec(c, flag) for c in labels], table, method=cfg.method)
        path = cfg.out / f"aic_{name}.csv"
        write_aic_csv(rows_by_flag, labels, path)
        for flag, rows in rows_by_flag.items():
            print(f"{name} statistics, {'with' if flag else 'without'} odds (n={rows[0].n if rows else 0}):")
            for r in rows:
                value = f"{r.aic_relative:10.1f}" if r.error is None else f"  failed: {r.error}"
                print(f"  {r.combo_label:<4} {value}")
        print(f"table: {path}")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, args: argparse.Namespace) -> int:
    dataset = _load_store(cfg)
    labels = cfg.combos or ["B1"]
    specs = []
    for label in labels:
        for flag in cfg.odds_flags:
            spec = combo_spec(label, flag)
            if spec.uses_observed:
                raise InputError(f"{label}: observed statistics cannot be used for betting")
            specs.append(spec)
    needed = sorted({s for spec in specs for s in spec.predicted_stats}, key=ALL_STATISTICS.index)
    schedule = _load_schedule(cfg) if needed else {}
    preds = gap_prediction_columns(dataset, schedule, needed)
    table = build_feature_table(dataset, preds)
    outdir = cfg.out / "backtest"
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        counts, edges, share = overround_distribution(table)
        with (outdir / "overround_histogram.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("lower_pct", "upper_pct", "count"))
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([f"{lo:.2f}", f"{hi:.2f}", int(c)])
        print(f"negative best-odds overround in {share:.1%} of eligible matches with odds")
    except GapcastError as exc:
        logger.warning("overround histogram skipped: %s", exc)

    print(f"{'combo':<10} {'strategy':<8} {'bets':>6} {'mean %':>8}  95% interval")
    for spec in specs:
        forecasts = walk_forward_forecasts(table, spec, method=cfg.method)
        for strategy in cfg.strategies:
            result = run_backtest(dataset, spec, strategy, table=table, forecasts=forecasts, both_sides=not args.single_side)
            check_stakes(result)
            bins = bin_by_overround(result, replicates=cfg.replicates, seed=cfg.seed) if result.bets else None
            summary = summary_dict(result, cfg.replicates, cfg.seed, bins)
            stem = f"{spec.name.replace('+', '_')}_{strategy.value}"
            write_bets_csv(result, outdir / f"bets_{stem}.csv")
            write_cumulative_csv(result, outdir / f"cumulative_{stem}.csv")
            write_summary_json(summary, outdir / f"summary_{stem}.json")
            if result.bets:
                ci = f"({summary['ci_lower']:+.2f}, {summary['ci_upper']:+.2f})" if summary["ci_lower"] is not None else ""
                print(f"{spec.name:<10} {strategy.value:<8} {result.n_bets:>6} {result.mean_profit_pct:>+8.2f}  {ci}")
            else:
                print(f"{spec.name:<10} {strategy.value:<8} {0:>6} {'-':>8}")
    print(f"artifacts: {outdir}")
    return EXIT_OK


def check_stakes(result) -> None:
    """Stake normalisation must hold on every run."""
    if not result.bets:
        return
    if result.strategy is Strategy.LEVEL:
        if any(b.stake != 1.0 for b in result.bets):
            raise GapcastError("level stakes must all be 1")
    elif abs(result.mean_stake - 1.0) > 1e-9:
        raise GapcastError(f"mean Kelly stake {result.mean_stake!r} differs from 1")


def cmd_mae(cfg: RunConfig, args: argparse.Namespace) -> int:
    dataset = _load_store(cfg)
    schedule = _load_schedule(cfg)
    preds = gap_prediction_columns(dataset, schedule, cfg.statistics)
    reports = mae_table(dataset, preds, baseline=args.baseline)
    write_mae_csv(reports, cfg.out / "mae.csv")
    n = write_scatter_csv(dataset, preds, cfg.out / "scatter.csv")
    print(f"{'measure':<24} {'GAP':>6} {'mean':>6} {'n':>7}")
    for r in reports:
        print(f"{r.side.value + ' ' + r.statistic.value:<24} {r.mae_gap:6.2f} {r.mae_baseline:6.2f} {r.n:7d}")
    print(f"{n} scatter points; tables in {cfg.out}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Compare measured headline numbers with the published ones."""
    dataset = _load_store(cfg)
    schedule = _load_schedule(cfg)
    preds = gap_prediction_columns(dataset, schedule, list(ALL_STATISTICS))
    mae = mae_table(dataset, preds)
    table = build_feature_table(dataset, preds)
    aic_rows = aic_table([combo_spec(f"A{i}") for i in range(8)], table, method=cfg.method)
    order = [r.combo_label for r in aic_rows if r.error is None]
    _, _, share = overround_distribution(table)
    spec = combo_spec("B1", True)
    result = run_backtest(dataset, spec, Strategy.KELLY, table=table)
    check_stakes(result)
    rows = comparison_table(mae, order, result.mean_profit_pct if result.bets else None, share)
    write_comparison_csv(rows, cfg.out / "comparison.csv")
    print(format_comparison(rows))
    print(
        "Exact profit figures are not guaranteed to be reproducible: they are point estimates "
        "on one historical snapshot of bookmaker odds, which the data source revises over time."
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapcast", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="gapcast-out", help="working directory for stage files")
    common.add_argument("--leagues", help="comma-separated league codes or 'all'")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--jobs", type=int, default=1)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse raw CSVs into the match store")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--min-season", default="2000-01")
    p.add_argument("--config", help="JSON ingest configuration overriding the bundled one")
    p.add_argument("--closing-odds", action="store_true", help="also read closing-odds columns")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic match store")
    p.add_argument("--n-leagues", type=int, default=3)
    p.add_argument("--n-teams", type=int, default=12)
    p.add_argument("--n-seasons", type=int, default=5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("optimize", parents=[common], help="fit the GAP parameter schedule")
    p.add_argument("--stats", help="comma-separated statistics (goals,on,off,corners) or 'all'")
    p.add_argument("--seed-params", type=float, nargs=3, metavar=("LAMBDA", "PHI1", "PHI2"))
    p.set_defaults(func=cmd_optimize)

    fit_opts = argparse.ArgumentParser(add_help=False)
    fit_opts.add_argument("--combos", help="comma-separated combination labels (A0-A7, B0-B15)")
    odds = fit_opts.add_mutually_exclusive_group()
    odds.add_argument("--with-odds", dest="with_odds", action="store_const", const=True, default=None,
                      help="include the home odds-implied probability (backtest default)")
    odds.add_argument("--no-odds", dest="with_odds", action="store_const", const=False,
                      help="leave the odds feature out (aic runs both when neither flag is given)")
    fit_opts.add_argument("--method", choices=("least_squares", "ml"), default="least_squares")

    p = sub.add_parser("aic", parents=[common, fit_opts], help="AIC variable-selection tables")
    p.set_defaults(func=cmd_aic)

    p = sub.add_parser("backtest", parents=[common, fit_opts], help="walk-forward betting backtest")
    p.add_argument("--strategy", choices=("level", "kelly", "both"), default="both")
    p.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    p.add_argument("--single-side", action="store_true", help="when both sides show value, bet only the larger edge")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("mae", parents=[common], help="accuracy of GAP statistic predictions")
    p.add_argument("--stats", help="comma-separated statistics or 'all'")
    p.add_argument("--baseline", choices=("running", "full"), default="running")
    p.set_defaults(func=cmd_mae)

    p = sub.add_parser("report", parents=[common], help="compare headline numbers with published values")
    p.add_argument("--method", choices=("least_squares", "ml"), default="least_squares")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = build_config(args)
        if args.command in ("aic", "backtest") and cfg.combos:
            allowed = list(OBSERVED_COMBOS) + list(PREDICTED_COMBOS)
            cfg.combos = _validate_combos(cfg.combos, allowed)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    try:
        return args.func(cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except GapcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
