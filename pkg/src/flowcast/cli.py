"""Batch command line: ingest, clean, anova, group, fit, predict, validate, report."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .anova import AnovaTable, two_way_anova
from .errors import FlowcastError, InputDataError, NumericalError
from .forecast import (
    DayGrouping,
    MergeDecision,
    counts_to_factorial_sample,
    discover_groups,
    fit_models,
    load_model,
    model_to_json_dict,
    predict,
    save_model,
    validate,
)
from .ingest import filter_normal, fuse_sources, load_counts, load_labels, load_taps, write_counts
from .quality import ExpectedGrid, clean_pipeline
from .schedule import DIRECTIONS, WEEKDAYS, load_schedule

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

ANOVA_HEADER = ("Source of Difference", "SS", "df", "MS", "F", "P-value")


def fmt2(value) -> str:
    """Render a number rounded half-up to 2 decimals (display only)."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt_p(value) -> str:
    return f"{float(value):.4g}"


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return fmt_p(value) if 0.0 < abs(value) < 0.01 else fmt2(value)
    return str(value)


def _read_text_rows(path, loader, *loader_args):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return loader(fh, *loader_args)
    except FileNotFoundError:
        raise InputDataError(f"input file not found: {path}") from None


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(path, fmt: str, title: str, header: list[str], rows: list[list]) -> None:
    """Emit one table as json/csv/md; csv and md share the same rendering."""
    if fmt == "json":
        _write_json(
            path, {"title": title, "columns": header, "rows": [list(r) for r in rows]}
        )
        return
    rendered = [[_fmt_cell(v) for v in row] for row in rows]
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "csv":
            fh.write(",".join(header) + "\n")
            for row in rendered:
                fh.write(",".join(row) + "\n")
        else:
            fh.write(f"## {title}\n\n")
            fh.write("| " + " | ".join(header) + " |\n")
            fh.write("|" + "|".join(" --- " for _ in header) + "|\n")
            for row in rendered:
                fh.write("| " + " | ".join(row) + " |\n")


def _print_columns(header: tuple, rows: list[tuple]) -> None:
    table = [tuple(str(c) for c in row) for row in [header] + rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    for r, row in enumerate(table):
        line = row[0].ljust(widths[0])
        for cell, width in zip(row[1:], widths[1:]):
            line += "  " + cell.rjust(width)
        print(line.rstrip())


def group_label(group: tuple[str, ...]) -> str:
    if len(group) == 1:
        return group[0].lower()
    return f"{group[0].lower()}-{group[-1].lower()}"


def _parse_date_arg(text: str, flag: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise InputDataError(f"{flag} must be an ISO date, got {text!r}") from None


def _filter_series(counts, station, direction, include_flagged=False):
    rows = [
        c
        for c in counts
        if (station is None or c.station_id == station)
        and (direction is None or c.direction == direction)
        and (include_flagged or c.quality != "flagged_event")
    ]
    if not rows:
        raise InputDataError("no rows left after station/direction filtering")
    return rows


def _load_grouping(path) -> DayGrouping:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return DayGrouping(
            tuple(tuple(g) for g in data["groups"]),
            float(data["alpha"]),
            tuple(
                MergeDecision(tuple(e["days"]), float(e["p_value"]), bool(e["merged"]))
                for e in data.get("evidence", [])
            ),
        )
    except FileNotFoundError:
        raise InputDataError(f"grouping file not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputDataError(f"grouping file {path} is malformed: {exc!r}") from exc


def cmd_ingest(args) -> int:
    schedule = load_schedule(args.schedule)
    out_of_window = 0
    if args.taps:
        counts, out_of_window = _read_text_rows(args.taps, load_taps, schedule)
        raw = len(counts)
        print(f"bucketed taps into {raw} period counts ({out_of_window} out-of-window taps)")
    else:
        counts = _read_text_rows(args.counts, load_counts, schedule)
        print(f"read {len(counts)} period counts")
    weights = {}
    if args.weights:
        try:
            with open(args.weights, "r", encoding="utf-8") as fh:
                weights = {str(k): float(v) for k, v in json.load(fh).items()}
        except FileNotFoundError:
            raise InputDataError(f"weights file not found: {args.weights}") from None
        except (json.JSONDecodeError, ValueError, AttributeError) as exc:
            raise InputDataError(f"weights file {args.weights} is malformed: {exc}") from exc
    before = len(counts)
    counts = fuse_sources(counts, weights)
    if len(counts) != before:
        print(f"fused multi-source slots: {before} rows -> {len(counts)}")
    if args.labels:
        labels = _read_text_rows(args.labels, load_labels)
        before = len(counts)
        counts = filter_normal(counts, labels)
        print(f"calendar filter kept {len(counts)} of {before} rows")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_counts(counts, fh)
    print(f"wrote {len(counts)} rows to {args.out}")
    return EXIT_OK


def cmd_clean(args) -> int:
    schedule = load_schedule(args.schedule)
    counts = _read_text_rows(args.counts, load_counts, schedule)
    if not counts:
        raise InputDataError(f"no rows in {args.counts}")
    labels = _read_text_rows(args.labels, load_labels) if args.labels else []
    rows = _filter_series(counts, args.station, args.direction, include_flagged=True)
    station = args.station or rows[0].station_id
    directions = (args.direction,) if args.direction else tuple(sorted({c.direction for c in rows}))
    start = _parse_date_arg(args.start, "--start") if args.start else min(c.date for c in rows)
    end = _parse_date_arg(args.end, "--end") if args.end else max(c.date for c in rows)
    grid = ExpectedGrid(start, end, schedule, directions, station)
    cleaned, report = clean_pipeline(rows, grid, labels, args.k_fail, args.k_corroborate)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_counts(cleaned, fh)
    _write_json(args.report, report.to_json_dict())
    failures = sum(1 for a in report.anomalies if a.classification == "equipment_failure")
    events = len(report.anomalies) - failures
    print(
        f"cleaned {len(cleaned)} rows: {len(report.missing)} missing, "
        f"{failures} equipment failures, {events} traffic events, "
        f"{len(report.imputations)} imputations"
    )
    print(f"wrote {args.out} and {args.report}")
    return EXIT_OK


def _anova_rows(table: AnovaTable) -> list[tuple]:
    rows = []
    for row in table.rows():
        rows.append(
            (
                row.source,
                fmt2(row.ss),
                row.df,
                fmt2(row.ms) if row.ms is not None else "",
                fmt2(row.f) if row.f is not None else "",
                fmt_p(row.p) if row.p is not None else "",
            )
        )
    return rows


def cmd_anova(args) -> int:
    schedule = load_schedule(args.schedule)
    counts = _read_text_rows(args.counts, load_counts, schedule)
    rows = _filter_series(counts, args.station, args.direction)
    days = [d for d in WEEKDAYS if d in {c.day_of_week for c in rows}]
    sample = counts_to_factorial_sample(rows, days)
    table = two_way_anova(sample, "day", "period")
    _print_columns(ANOVA_HEADER, _anova_rows(table))
    if table.degenerate:
        print("warning: zero within-cell variance; F ratios are degenerate", file=sys.stderr)
    if args.out:
        if args.format == "json":
            _write_json(args.out, table.to_json_dict())
        else:
            _write_table(
                args.out,
                args.format,
                "Two-factor variance analysis",
                list(ANOVA_HEADER),
                [list(r) for r in _anova_rows(table)],
            )
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_group(args) -> int:
    schedule = load_schedule(args.schedule)
    counts = _read_text_rows(args.counts, load_counts, schedule)
    rows = _filter_series(counts, args.station, args.direction, args.include_flagged)
    grouping = discover_groups(rows, args.alpha)
    _write_json(args.out, grouping.to_json_dict())
    labels = ", ".join("{" + "+".join(g) + "}" for g in grouping.groups)
    print(f"found {len(grouping.groups)} day groups at alpha={args.alpha}: {labels}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _print_fit_summary(model) -> None:
    fit = model.fit
    n = fit.df_residual + fit.period_count
    print(f"\ngroup {group_label(model.group)} ({model.direction}), "
          f"{n} observations, fitted {model.fitted_at[0]}..{model.fitted_at[1]}")
    print("  Regression statistics")
    print(f"    R Square           {fmt2(fit.r2 * 100)}%")
    print(f"    Adjusted R Square  {fmt2(fit.adj_r2 * 100)}%")
    print(f"    Standard Error     {fmt2(fit.residual_se)}")
    print(f"    Observations       {n}")
    print("  Variance analysis")
    _print_columns(
        ("    source", "df", "SS", "MS", "F", "Significance F"),
        [
            (
                "    regression",
                fit.df_regression,
                fmt2(fit.ss_regression),
                fmt2(fit.ss_regression / fit.df_regression),
                fmt2(fit.f_stat),
                fmt_p(fit.f_significance),
            ),
            (
                "    residual",
                fit.df_residual,
                fmt2(fit.ss_residual),
                fmt2(fit.ss_residual / fit.df_residual),
                "",
                "",
            ),
            ("    total", fit.df_regression + fit.df_residual, fmt2(fit.ss_total), "", "", ""),
        ],
    )
    print("  Coefficients")
    terms = model_to_json_dict(model)["diagnostics"]["coef_stats"]
    _print_columns(
        ("    term", "Coefficients", "Standard Error", "t Stat", "P-value"),
        [
            (
                "    " + t["term"],
                fmt2(t["estimate"]),
                fmt2(t["standard_error"]),
                fmt2(t["t_stat"]),
                fmt_p(t["p_value"]),
            )
            for t in terms
        ],
    )


def cmd_fit(args) -> int:
    schedule = load_schedule(args.schedule)
    counts = _read_text_rows(args.counts, load_counts, schedule)
    rows = _filter_series(counts, args.station, args.direction, args.include_flagged)
    direction = args.direction or rows[0].direction
    grouping = _load_grouping(args.groups)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = fit_models(rows, grouping, direction, schedule, args.include_flagged)
    for model in models:
        path = out_dir / f"model_{group_label(model.group)}.json"
        save_model(model, path)
        _print_fit_summary(model)
        print(f"  wrote {path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    schedule = load_schedule(args.schedule) if args.schedule else None
    model = load_model(args.model, schedule)
    print(fmt2(predict(model, args.period)))
    return EXIT_OK


def _load_models_dir(path, schedule=None):
    model_dir = Path(path)
    if not model_dir.is_dir():
        raise InputDataError(f"model directory not found: {path}")
    files = sorted(model_dir.glob("*.json"))
    if not files:
        raise InputDataError(f"no model files in {path}")
    return [load_model(f, schedule) for f in files]


def _grouping_from_models(models, alpha: float) -> DayGrouping:
    groups = tuple(sorted((m.group for m in models), key=lambda g: WEEKDAYS.index(g[0])))
    return DayGrouping(groups, alpha)


def cmd_validate(args) -> int:
    schedule = load_schedule(args.schedule)
    models = _load_models_dir(args.models, schedule)
    holdout = _read_text_rows(args.holdout, load_counts, schedule)
    holdout = _filter_series(holdout, args.station, args.direction)
    grouping = _grouping_from_models(models, args.alpha)
    overlap = sorted(
        {
            c.date
            for c in holdout
            for m in models
            if m.group == grouping.group_for(c.day_of_week)
            and m.fitted_at[0] <= c.date <= m.fitted_at[1]
        }
    )
    if overlap:
        print(
            f"warning: holdout dates {', '.join(d.isoformat() for d in overlap)} "
            "overlap the training range",
            file=sys.stderr,
        )
    report = validate(models, grouping, holdout)
    if args.out:
        _write_json(args.out, report.to_json_dict())
        print(f"wrote {args.out}")
    print(
        f"mean APE: {fmt2(report.mean_ape_percent)}% over {len(report.entries)} entries "
        f"({report.skipped_zero_actual} skipped zero-actual)"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    schedule = load_schedule(args.schedule)
    counts = _read_text_rows(args.counts, load_counts, schedule)
    rows = _filter_series(counts, args.station, args.direction)
    models = _load_models_dir(args.models, schedule)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = args.format
    suffix = {"json": "json", "csv": "csv", "md": "md"}[fmt]

    daily: dict[dt.date, float] = {}
    for c in rows:
        daily[c.date] = daily.get(c.date, 0.0) + c.count
    daily_rows = [[d.isoformat(), total] for d, total in sorted(daily.items())]
    daily_path = out_dir / f"daily_totals.{suffix}"
    _write_table(daily_path, fmt, "Daily flow totals", ["date", "total"], daily_rows)

    by_group = {m.group: m for m in models}
    cell_rows = []
    for group, model in sorted(by_group.items(), key=lambda kv: WEEKDAYS.index(kv[0][0])):
        members = [c for c in rows if c.day_of_week in group]
        for period in range(1, model.period_count + 1):
            values = [c.count for c in members if c.period_index == period]
            observed = sum(values) / len(values) if values else None
            cell_rows.append(
                [group_label(group), period, observed, predict(model, period)]
            )
        plot_path = out_dir / f"plot_{group_label(group)}.dat"
        with open(plot_path, "w", encoding="utf-8") as fh:
            for period in range(1, model.period_count + 1):
                fh.write(f"{period} {fmt2(predict(model, period))}\n")
    summary_path = out_dir / f"group_period_means.{suffix}"
    _write_table(
        summary_path,
        fmt,
        "Observed vs predicted period means",
        ["group", "period", "observed_mean", "predicted"],
        cell_rows,
    )
    print(f"wrote {daily_path}, {summary_path}, and {len(by_group)} plot files to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcast",
        description="Station passenger-flow cleaning, screening, and forecasting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, schedule_required=True):
        p.add_argument("--schedule", required=schedule_required,
                       help="schedule config JSON (period boundaries, service days)")
        p.add_argument("--direction", choices=DIRECTIONS, help="restrict to one direction")
        p.add_argument("--station", help="restrict to one station id")
        p.add_argument("--alpha", type=float, default=0.05, help="significance level")
        p.add_argument("--k-fail", dest="k_fail", type=float, default=4.0,
                       help="robust-z threshold flagging an abnormal reading")
        p.add_argument("--k-corroborate", dest="k_corroborate", type=float, default=2.0,
                       help="robust-z threshold for adjacent-period corroboration")
        p.add_argument("--format", choices=("json", "csv", "md"), default="json",
                       help="artifact format for tabular reports")

    p = sub.add_parser("ingest", help="bucket taps or validate counts, fuse, filter")
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--taps", help="raw tap CSV")
    src.add_argument("--counts", help="pre-aggregated counts CSV")
    p.add_argument("--labels", help="calendar labels CSV")
    p.add_argument("--weights", help="source fusion weights JSON")
    p.add_argument("--out", required=True, help="output counts CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("clean", help="detect missing slots, triage anomalies, repair")
    common(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--labels")
    p.add_argument("--start", help="grid start date (default: first date present)")
    p.add_argument("--end", help="grid end date (default: last date present)")
    p.add_argument("--out", required=True, help="cleaned counts CSV")
    p.add_argument("--report", required=True, help="quality report JSON")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("anova", help="two-factor variance analysis of day x period")
    common(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--out", help="artifact path")
    p.set_defaults(func=cmd_anova)

    p = sub.add_parser("group", help="discover day groups by repeated variance analysis")
    common(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--include-flagged", action="store_true",
                   help="keep traffic-event rows in the analysis")
    p.add_argument("--out", required=True, help="grouping JSON")
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("fit", help="fit one period regression per day group")
    common(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--groups", required=True, help="grouping JSON from 'group'")
    p.add_argument("--include-flagged", action="store_true",
                   help="keep traffic-event rows in the training set")
    p.add_argument("--out", required=True, help="output directory for model JSON files")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predicted flow for one period")
    common(p, schedule_required=False)
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--period", required=True, type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="score holdout observations with APE")
    common(p)
    p.add_argument("--models", required=True, help="directory of model JSON files")
    p.add_argument("--holdout", required=True, help="holdout counts CSV")
    p.add_argument("--out", help="validation report JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="planning aggregates and plot-ready data")
    common(p)
    p.add_argument("--counts", required=True, help="cleaned counts CSV")
    p.add_argument("--models", required=True, help="directory of model JSON files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FlowcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
