"""Fault-tolerance processing: missing-slot detection, anomaly triage, repair.

Abnormal readings are screened with a robust z score against the history of
their (weekday, period, direction) cell; a flagged reading counts as a real
traffic event only when an adjacent period on the same date moves the same
way, otherwise it is treated as an equipment failure and replaced.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InputDataError, NumericalError
from .ingest import IMPUTED_SOURCE, CalendarLabel, PeriodCount, filter_normal
from .schedule import PeriodSchedule, weekday_name

MAD_SCALE = 1.4826
MAD_EPSILON = 1e-9
MIN_CELL_HISTORY = 4

EQUIPMENT_FAILURE = "equipment_failure"
TRAFFIC_EVENT = "traffic_event"

# (date, period_index, direction)
SlotKey = tuple


@dataclass(frozen=True)
class ExpectedGrid:
    """The slots a station is expected to report for a date interval."""

    start: dt.date
    end: dt.date
    schedule: PeriodSchedule
    directions: tuple[str, ...]
    station_id: str

    def __post_init__(self):
        if self.start > self.end:
            raise InputDataError(f"empty date range {self.start}..{self.end}")
        object.__setattr__(self, "directions", tuple(sorted(set(self.directions))))
        if not self.directions:
            raise InputDataError("grid needs at least one direction")

    def dates(self) -> list[dt.date]:
        out = []
        day = self.start
        while day <= self.end:
            if weekday_name(day) in self.schedule.service_days:
                out.append(day)
            day += dt.timedelta(days=1)
        return out

    def keys(self, skip_dates: Iterable[dt.date] = ()) -> list[SlotKey]:
        skip = set(skip_dates)
        return [
            (date, period, direction)
            for date in self.dates()
            if date not in skip
            for direction in self.directions
            for period in range(1, self.schedule.period_count + 1)
        ]


@dataclass(frozen=True)
class Anomaly:
    date: dt.date
    period_index: int
    direction: str
    observed: float
    z_score: float
    classification: str

    def slot(self) -> SlotKey:
        return (self.date, self.period_index, self.direction)


@dataclass(frozen=True)
class SkippedCell:
    day_of_week: str
    period_index: int
    direction: str
    observations: int


@dataclass(frozen=True)
class Imputation:
    date: dt.date
    period_index: int
    direction: str
    value: float
    method: str

    def slot(self) -> SlotKey:
        return (self.date, self.period_index, self.direction)


@dataclass(frozen=True)
class QualityReport:
    missing: tuple[SlotKey, ...]
    anomalies: tuple[Anomaly, ...]
    imputations: tuple[Imputation, ...]
    skipped_cells: tuple[SkippedCell, ...] = ()

    def __post_init__(self):
        imputed = [imp.slot() for imp in self.imputations]
        expected = list(self.missing) + [
            a.slot() for a in self.anomalies if a.classification == EQUIPMENT_FAILURE
        ]
        if sorted(imputed) != sorted(expected):
            raise NumericalError(
                "imputations must cover missing and equipment-failure slots exactly once"
            )
        events = {a.slot() for a in self.anomalies if a.classification == TRAFFIC_EVENT}
        if events & set(imputed):
            raise NumericalError("traffic-event slots must never be imputed")

    def to_json_dict(self) -> dict:
        return {
            "missing": [
                {"date": d.isoformat(), "period_index": p, "direction": direc}
                for d, p, direc in self.missing
            ],
            "anomalies": [
                {
                    "date": a.date.isoformat(),
                    "period_index": a.period_index,
                    "direction": a.direction,
                    "observed": a.observed,
                    "z_score": a.z_score,
                    "classification": a.classification,
                }
                for a in self.anomalies
            ],
            "imputations": [
                {
                    "date": imp.date.isoformat(),
                    "period_index": imp.period_index,
                    "direction": imp.direction,
                    "value": imp.value,
                    "method": imp.method,
                }
                for imp in self.imputations
            ],
            "skipped_cells": [
                {
                    "day_of_week": s.day_of_week,
                    "period_index": s.period_index,
                    "direction": s.direction,
                    "observations": s.observations,
                }
                for s in self.skipped_cells
            ],
        }


def _slot_sort_key(slot: SlotKey) -> tuple:
    date, period, direction = slot
    return (date, direction, period)


def detect_missing(counts: Sequence[PeriodCount], grid: ExpectedGrid,
                   skip_dates: Iterable[dt.date] = ()) -> list[SlotKey]:
    """Grid slots with no observation, sorted by (date, direction, period)."""
    observed = {(c.date, c.period_index, c.direction) for c in counts}
    missing = [key for key in grid.keys(skip_dates) if key not in observed]
    return sorted(missing, key=_slot_sort_key)


def _cell_key(count: PeriodCount) -> tuple:
    return (count.day_of_week, count.period_index, count.direction)


def classify_anomalies(
    counts: Sequence[PeriodCount],
    k_fail: float = 4.0,
    k_corroborate: float = 2.0,
) -> tuple[list[Anomaly], list[SkippedCell]]:
    """Robust-z screening of every observation against its cell history.

    z = (x - median) / (1.4826 * MAD + eps) over the (weekday, period,
    direction) cell.  |z| > k_fail makes a candidate; a candidate becomes a
    traffic event if an adjacent period on the same date and direction has
    |z| > k_corroborate with the same sign, otherwise an equipment failure.
    Cells with fewer than 4 observations are skipped and reported.
    """
    if k_fail <= 0 or k_corroborate <= 0:
        raise InputDataError("thresholds must be positive")
    cells: dict[tuple, list[PeriodCount]] = {}
    seen_slots: dict[SlotKey, PeriodCount] = {}
    for c in counts:
        slot = (c.date, c.period_index, c.direction)
        if slot in seen_slots:
            raise InputDataError(f"duplicate observation for slot {slot}; fuse sources first")
        seen_slots[slot] = c
        cells.setdefault(_cell_key(c), []).append(c)

    skipped = []
    z_by_slot: dict[SlotKey, float] = {}
    for (day, period, direction), members in cells.items():
        if len(members) < MIN_CELL_HISTORY:
            skipped.append(SkippedCell(day, period, direction, len(members)))
            continue
        values = np.array([m.count for m in members])
        med = float(np.median(values))
        mad = float(np.median(np.abs(values - med)))
        denom = MAD_SCALE * mad + MAD_EPSILON
        for m in members:
            z_by_slot[(m.date, m.period_index, m.direction)] = (m.count - med) / denom

    anomalies = []
    for slot, z in z_by_slot.items():
        if abs(z) <= k_fail:
            continue
        date, period, direction = slot
        corroborated = False
        for neighbor_period in (period - 1, period + 1):
            z_n = z_by_slot.get((date, neighbor_period, direction))
            if z_n is not None and abs(z_n) > k_corroborate and (z_n > 0) == (z > 0):
                corroborated = True
                break
        anomalies.append(
            Anomaly(
                date,
                period,
                direction,
                seen_slots[slot].count,
                z,
                TRAFFIC_EVENT if corroborated else EQUIPMENT_FAILURE,
            )
        )
    anomalies.sort(key=lambda a: _slot_sort_key(a.slot()))
    skipped.sort(key=lambda s: (s.direction, s.day_of_week, s.period_index))
    return anomalies, skipped


def impute(counts: Sequence[PeriodCount], targets: Iterable[SlotKey],
           station_id: str | None = None) -> list[PeriodCount]:
    """Fill target slots with the mean of clean same-cell history.

    Clean history excludes flagged-event rows and the targets themselves.
    The input list is not touched; new rows carry quality ``imputed``.
    """
    target_list = sorted(set(targets), key=_slot_sort_key)
    target_set = set(target_list)
    history: dict[tuple, list[float]] = {}
    for c in counts:
        if c.quality == "flagged_event":
            continue
        if (c.date, c.period_index, c.direction) in target_set:
            continue
        history.setdefault(_cell_key(c), []).append(c.count)
        if station_id is None:
            station_id = c.station_id

    unresolved = []
    filled = []
    for date, period, direction in target_list:
        cell = (weekday_name(date), period, direction)
        values = history.get(cell)
        if not values:
            unresolved.append((date, period, direction))
            continue
        filled.append(
            PeriodCount(
                date,
                weekday_name(date),
                period,
                direction,
                station_id or "unknown",
                float(np.mean(values)),
                IMPUTED_SOURCE,
                quality="imputed",
            )
        )
    if unresolved:
        raise NumericalError(
            f"no clean history to impute slots: {[(d.isoformat(), p, direc) for d, p, direc in unresolved]}"
        )
    return filled


def clean_pipeline(
    counts: Sequence[PeriodCount],
    grid: ExpectedGrid,
    labels: Iterable[CalendarLabel] = (),
    k_fail: float = 4.0,
    k_corroborate: float = 2.0,
) -> tuple[list[PeriodCount], QualityReport]:
    """Run missing-slot detection, anomaly triage, and repair, in that order.

    Dates labeled non-normal are removed from both the data and the expected
    grid.  Equipment-failure readings are replaced by cell-mean imputations,
    traffic-event readings are kept with quality ``flagged_event``, and the
    cleaned output is grid-complete whenever repair succeeds.
    """
    labels = list(labels)
    foreign = sorted({c.station_id for c in counts} - {grid.station_id})
    if foreign:
        raise InputDataError(
            f"counts contain stations {foreign}; grid expects only {grid.station_id!r}"
        )
    skip_dates = {lab.date for lab in labels if lab.day_type != "normal"}
    expected = set(grid.keys(skip_dates))
    in_grid = [
        c
        for c in filter_normal(counts, labels)
        if (c.date, c.period_index, c.direction) in expected
    ]

    missing = detect_missing(in_grid, grid, skip_dates)
    anomalies, skipped = classify_anomalies(in_grid, k_fail, k_corroborate)
    failure_slots = {a.slot() for a in anomalies if a.classification == EQUIPMENT_FAILURE}
    event_slots = {a.slot() for a in anomalies if a.classification == TRAFFIC_EVENT}

    kept: list[PeriodCount] = []
    for c in in_grid:
        slot = (c.date, c.period_index, c.direction)
        if slot in failure_slots:
            continue
        if slot in event_slots and c.quality != "flagged_event":
            c = replace(c, quality="flagged_event")
        kept.append(c)

    targets = sorted(set(missing) | failure_slots, key=_slot_sort_key)
    filled = impute(kept, targets, station_id=grid.station_id)

    cleaned = sorted(kept + filled, key=lambda c: (c.date, c.direction, c.period_index))
    report = QualityReport(
        missing=tuple(missing),
        anomalies=tuple(anomalies),
        imputations=tuple(
            Imputation(c.date, c.period_index, c.direction, c.count, "cell_mean") for c in filled
        ),
        skipped_cells=tuple(skipped),
    )
    return cleaned, report
