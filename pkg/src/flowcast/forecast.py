"""Day-group discovery, per-group dummy regressions, prediction, validation."""

from __future__ import annotations

import datetime as dt
import json
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .anova import FactorialSample, two_way_anova
from .errors import InputDataError, NumericalError
from .ingest import PeriodCount
from .regression import CoefStats, DummyDesign, OlsFit, ols_dummy_fit
from .schedule import PeriodSchedule, WEEKDAYS


class ScheduleMismatchWarning(UserWarning):
    """A model is being used with a schedule other than the one it was fit under."""


@dataclass(frozen=True)
class MergeDecision:
    days: tuple[str, ...]
    p_value: float
    merged: bool


@dataclass(frozen=True)
class DayGrouping:
    """Partition of Mon..Sun into runs of consecutive, statistically alike days."""

    groups: tuple[tuple[str, ...], ...]
    alpha: float
    evidence: tuple[MergeDecision, ...] = ()

    def __post_init__(self):
        flat = [day for group in self.groups for day in group]
        if flat != list(WEEKDAYS):
            raise InputDataError(
                f"groups must be consecutive runs covering Mon..Sun exactly, got {self.groups}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise InputDataError(f"alpha must be in (0, 1), got {self.alpha}")

    def group_for(self, day: str) -> tuple[str, ...]:
        for group in self.groups:
            if day in group:
                return group
        raise InputDataError(f"unknown weekday {day!r}")

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "groups": [list(g) for g in self.groups],
            "evidence": [
                {"days": list(e.days), "p_value": e.p_value, "merged": e.merged}
                for e in self.evidence
            ],
        }


@dataclass(frozen=True)
class RegressionModel:
    group: tuple[str, ...]
    direction: str
    schedule_fingerprint: str
    fit: OlsFit
    fitted_at: tuple[dt.date, dt.date]

    @property
    def period_count(self) -> int:
        return self.fit.period_count


@dataclass(frozen=True)
class ValidationEntry:
    date: dt.date
    period_index: int
    actual: float
    predicted: float
    ape_percent: float


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[ValidationEntry, ...]
    mean_ape_percent: float
    skipped_zero_actual: int

    def to_json_dict(self) -> dict:
        return {
            "entries": [
                {
                    "date": e.date.isoformat(),
                    "period_index": e.period_index,
                    "actual": e.actual,
                    "predicted": e.predicted,
                    "ape_percent": e.ape_percent,
                }
                for e in self.entries
            ],
            "mean_ape_percent": self.mean_ape_percent,
            "skipped_zero_actual": self.skipped_zero_actual,
        }


def _single_series(counts: Sequence[PeriodCount], what: str) -> None:
    stations = {c.station_id for c in counts}
    directions = {c.direction for c in counts}
    if len(stations) > 1 or len(directions) > 1:
        raise InputDataError(
            f"{what} needs a single station and direction, got stations={sorted(stations)} "
            f"directions={sorted(directions)}"
        )


def counts_to_factorial_sample(
    counts: Sequence[PeriodCount], days: Sequence[str]
) -> FactorialSample:
    """Arrange counts as a (day, period, replicate) array for variance analysis.

    Replicates within a cell are ordered by date.  Every (day, period) cell
    must hold the same number of observations; repair and whole-week date
    ranges (see the quality module) keep real data balanced.
    """
    wanted = [c for c in counts if c.day_of_week in set(days)]
    if not wanted:
        raise NumericalError(f"no observations for days {list(days)}")
    periods = sorted({c.period_index for c in wanted})
    cells: dict[tuple, list[PeriodCount]] = {}
    for c in wanted:
        cells.setdefault((c.day_of_week, c.period_index), []).append(c)

    sizes = {key: len(members) for key, members in cells.items()}
    expected_cells = [(day, p) for day in days for p in periods]
    absent = [key for key in expected_cells if key not in cells]
    if absent:
        raise NumericalError(f"no observations for cells {absent}")
    replicates = min(sizes.values())
    if replicates < 2:
        raise NumericalError(
            f"need >= 2 replicates per (day, period) cell, got {min(sizes.values())}"
        )
    if len(set(sizes.values())) != 1:
        uneven = {key: n for key, n in sorted(sizes.items()) if n != replicates}
        raise NumericalError(
            f"unbalanced cells (expected {replicates} replicates everywhere): {uneven}"
        )

    values = np.empty((len(days), len(periods), replicates))
    for i, day in enumerate(days):
        for j, period in enumerate(periods):
            members = sorted(cells[(day, period)], key=lambda c: c.date)
            values[i, j, :] = [m.count for m in members]
    return FactorialSample(values)


def discover_groups(counts: Sequence[PeriodCount], alpha: float = 0.05) -> DayGrouping:
    """Greedy left-to-right merge of consecutive weekdays.

    Each candidate extension is screened by a two-factor variance analysis
    (day within the candidate set x period); the merge is accepted when the
    day main effect has p >= alpha.  Every tested p value is recorded.
    """
    _single_series(counts, "group discovery")
    present = {c.day_of_week for c in counts}
    absent = [d for d in WEEKDAYS if d not in present]
    if absent:
        raise InputDataError(f"grouping needs observations for all weekdays; missing {absent}")

    groups: list[tuple[str, ...]] = []
    current = [WEEKDAYS[0]]
    evidence = []
    for day in WEEKDAYS[1:]:
        candidate = current + [day]
        table = two_way_anova(counts_to_factorial_sample(counts, candidate), "day", "period")
        p = table.factor_a.p
        merged = p >= alpha
        evidence.append(MergeDecision(tuple(candidate), float(p), merged))
        if merged:
            current = candidate
        else:
            groups.append(tuple(current))
            current = [day]
    groups.append(tuple(current))
    return DayGrouping(tuple(groups), alpha, tuple(evidence))


def fit_models(
    counts: Sequence[PeriodCount],
    grouping: DayGrouping,
    direction: str,
    schedule: PeriodSchedule,
    include_flagged: bool = False,
) -> list[RegressionModel]:
    """Fit one dummy regression per day group on that group's observations.

    Rows flagged as traffic events are excluded unless ``include_flagged``.
    """
    rows = [
        c
        for c in counts
        if c.direction == direction and (include_flagged or c.quality != "flagged_event")
    ]
    _single_series(rows, "model fitting")
    models = []
    for group in grouping.groups:
        training = sorted(
            (c for c in rows if c.day_of_week in group),
            key=lambda c: (c.date, c.period_index),
        )
        if not training:
            raise NumericalError(f"no training rows for group {group}")
        try:
            design = DummyDesign(
                tuple(c.period_index for c in training), schedule.period_count
            )
        except NumericalError as exc:
            raise NumericalError(f"group {group}: {exc}") from None
        fit = ols_dummy_fit([c.count for c in training], design)
        models.append(
            RegressionModel(
                group=tuple(group),
                direction=direction,
                schedule_fingerprint=schedule.fingerprint(),
                fit=fit,
                fitted_at=(training[0].date, training[-1].date),
            )
        )
    return models


def predict(model: RegressionModel, period_index: int) -> float:
    """Expected flow for a period: intercept plus that period's offset."""
    p = model.period_count
    if not 1 <= period_index <= p:
        raise InputDataError(f"period_index {period_index} outside 1..{p}")
    fit = model.fit
    if period_index == fit.reference_period:
        return fit.intercept
    offset = [q for q in range(1, p + 1) if q != fit.reference_period].index(period_index)
    return fit.intercept + fit.coefficients[offset]


def validate(
    models: Sequence[RegressionModel],
    grouping: DayGrouping,
    holdout: Sequence[PeriodCount],
) -> ValidationReport:
    """Score holdout observations with absolute percentage error.

    APE = 100 * |predicted - actual| / actual.  Zero-actual entries are
    skipped (and counted) rather than divided by.
    """
    by_group = {m.group: m for m in models}
    entries = []
    skipped = 0
    total = 0.0
    for c in holdout:
        group = grouping.group_for(c.day_of_week)
        model = by_group.get(group)
        if model is None:
            raise InputDataError(f"no model for group {group} (weekday {c.day_of_week})")
        if model.direction != c.direction:
            raise InputDataError(
                f"holdout row {c.date} period {c.period_index} is {c.direction}, "
                f"model for {group} is {model.direction}"
            )
        predicted = predict(model, c.period_index)
        if c.count == 0:
            skipped += 1
            continue
        ape = 100.0 * abs(predicted - c.count) / c.count
        total += ape
        entries.append(ValidationEntry(c.date, c.period_index, c.count, predicted, ape))
    mean = total / len(entries) if entries else 0.0
    return ValidationReport(tuple(entries), mean, skipped)


def model_to_json_dict(model: RegressionModel) -> dict:
    fit = model.fit
    terms = [
        {
            "term": "intercept",
            "estimate": fit.intercept,
            "standard_error": fit.intercept_stats.standard_error,
            "t_stat": fit.intercept_stats.t_stat,
            "p_value": fit.intercept_stats.p_value,
        }
    ]
    for period, coef, stats in zip(
        (q for q in range(1, fit.period_count + 1) if q != fit.reference_period),
        fit.coefficients,
        fit.coef_stats,
    ):
        terms.append(
            {
                "term": f"period_{period}",
                "estimate": coef,
                "standard_error": stats.standard_error,
                "t_stat": stats.t_stat,
                "p_value": stats.p_value,
            }
        )
    return {
        "group": list(model.group),
        "direction": model.direction,
        "schedule_fingerprint": model.schedule_fingerprint,
        "reference_period": fit.reference_period,
        "intercept": fit.intercept,
        "coefficients": list(fit.coefficients),
        "diagnostics": {
            "r2": fit.r2,
            "adj_r2": fit.adj_r2,
            "residual_se": fit.residual_se,
            "f_stat": fit.f_stat,
            "f_significance": fit.f_significance,
            "ss_regression": fit.ss_regression,
            "ss_residual": fit.ss_residual,
            "ss_total": fit.ss_total,
            "df_regression": fit.df_regression,
            "df_residual": fit.df_residual,
            "degenerate": fit.degenerate,
            "coef_stats": terms,
        },
        "fitted_at": {
            "start": model.fitted_at[0].isoformat(),
            "end": model.fitted_at[1].isoformat(),
        },
    }


def save_model(model: RegressionModel, path) -> None:
    """Serialize a model as JSON, atomically (write temp file, then rename)."""
    payload = json.dumps(model_to_json_dict(model), indent=2, sort_keys=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(payload + "\n")
    os.replace(tmp, path)


def model_from_json_dict(data: dict) -> RegressionModel:
    try:
        group = tuple(str(d) for d in data["group"])
        direction = str(data["direction"])
        fingerprint = str(data["schedule_fingerprint"])
        reference = int(data["reference_period"])
        intercept = float(data["intercept"])
        coefficients = tuple(float(v) for v in data["coefficients"])
        diag = data["diagnostics"]
        terms = diag["coef_stats"]
        fitted_at = (
            dt.date.fromisoformat(data["fitted_at"]["start"]),
            dt.date.fromisoformat(data["fitted_at"]["end"]),
        )
        stats = [
            CoefStats(float(t["standard_error"]), float(t["t_stat"]), float(t["p_value"]))
            for t in terms
        ]
        fit = OlsFit(
            intercept=intercept,
            coefficients=coefficients,
            intercept_stats=stats[0],
            coef_stats=tuple(stats[1:]),
            r2=float(diag["r2"]),
            adj_r2=float(diag["adj_r2"]),
            residual_se=float(diag["residual_se"]),
            ss_regression=float(diag["ss_regression"]),
            ss_residual=float(diag["ss_residual"]),
            ss_total=float(diag["ss_total"]),
            df_regression=int(diag["df_regression"]),
            df_residual=int(diag["df_residual"]),
            f_stat=float(diag["f_stat"]),
            f_significance=float(diag["f_significance"]),
            reference_period=reference,
            degenerate=bool(diag["degenerate"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputDataError(f"model JSON does not match the expected schema: {exc!r}") from exc
    if len(fit.coef_stats) != len(coefficients):
        raise InputDataError("model JSON: coef_stats and coefficients lengths differ")
    if not 1 <= reference <= len(coefficients) + 1:
        raise InputDataError(f"model JSON: reference period {reference} out of range")
    bad_days = [d for d in group if d not in WEEKDAYS]
    if bad_days or not group:
        raise InputDataError(f"model JSON: invalid group {group}")
    return RegressionModel(group, direction, fingerprint, fit, fitted_at)


def load_model(path, schedule: PeriodSchedule | None = None) -> RegressionModel:
    """Load a model JSON file; warn if it was fit under a different schedule."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputDataError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputDataError(f"model file {path} is not valid JSON: {exc}") from exc
    model = model_from_json_dict(data)
    if schedule is not None and schedule.fingerprint() != model.schedule_fingerprint:
        warnings.warn(
            f"model {path} was fitted under schedule {model.schedule_fingerprint}, "
            f"not the current schedule {schedule.fingerprint()}",
            ScheduleMismatchWarning,
            stacklevel=2,
        )
    return model
