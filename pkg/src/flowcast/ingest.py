"""Ingestion of tap records and per-period counts, calendar filtering, source fusion."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple

from .errors import InputDataError
from .schedule import DIRECTIONS, PeriodSchedule, weekday_name

QUALITY_VALUES = ("observed", "imputed", "flagged_event")
DAY_TYPES = ("normal", "holiday", "special_event")

# Reserved source id assigned to counts produced by weighted fusion.
FUSED_SOURCE = "fused"
# Reserved source id assigned to counts produced by imputation.
IMPUTED_SOURCE = "imputed"

COUNTS_COLUMNS = ("date", "day_of_week", "period_index", "direction", "station_id", "count", "source_id")
TAPS_COLUMNS = ("station_id", "timestamp", "direction", "source_id")
LABELS_COLUMNS = ("date", "day_type")


@dataclass(frozen=True)
class TapRecord:
    """One raw fare-gate tap."""

    station_id: str
    timestamp: dt.datetime
    direction: str
    source_id: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise InputDataError(f"invalid direction: {self.direction!r}")


@dataclass(frozen=True)
class PeriodCount:
    """Observed (or repaired) passenger count for one station/period slot."""

    date: dt.date
    day_of_week: str
    period_index: int
    direction: str
    station_id: str
    count: float
    source_id: str
    quality: str = "observed"

    def __post_init__(self):
        if self.day_of_week != weekday_name(self.date):
            raise InputDataError(
                f"{self.date} is a {weekday_name(self.date)}, not {self.day_of_week}"
            )
        if self.period_index < 1:
            raise InputDataError(f"period_index must be >= 1, got {self.period_index}")
        if self.direction not in DIRECTIONS:
            raise InputDataError(f"invalid direction: {self.direction!r}")
        if self.count < 0:
            raise InputDataError(f"negative count {self.count} on {self.date}")
        if self.quality not in QUALITY_VALUES:
            raise InputDataError(f"invalid quality: {self.quality!r}")

    def slot_key(self) -> tuple:
        """Key identifying the observation slot, ignoring the source."""
        return (self.date, self.period_index, self.direction, self.station_id)

    def full_key(self) -> tuple:
        return self.slot_key() + (self.source_id,)


@dataclass(frozen=True)
class CalendarLabel:
    date: dt.date
    day_type: str

    def __post_init__(self):
        if self.day_type not in DAY_TYPES:
            raise InputDataError(f"invalid day_type: {self.day_type!r}")


class TapBucketing(NamedTuple):
    counts: list[PeriodCount]
    out_of_window: int


def _parse_date(text: str, line_num: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputDataError(f"line {line_num}: unparsable date {text!r}") from None


def _open_reader(stream, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> csv.DictReader:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise InputDataError("empty input: missing CSV header")
    fields = [f.strip() for f in reader.fieldnames]
    missing = [c for c in required if c not in fields]
    if missing:
        raise InputDataError(f"missing CSV columns: {', '.join(missing)}")
    unknown = [c for c in fields if c not in required + optional]
    if unknown:
        raise InputDataError(f"unknown CSV columns: {', '.join(unknown)}")
    reader.fieldnames = fields
    return reader


def load_taps(stream: Iterable[str], schedule: PeriodSchedule) -> TapBucketing:
    """Bucket raw taps into period counts.

    Taps falling outside every schedule interval, or on a non-service day,
    are tallied in ``out_of_window`` rather than dropped silently.  The sum
    of all returned counts plus ``out_of_window`` equals the number of taps.
    """
    reader = _open_reader(stream, TAPS_COLUMNS)
    totals: dict[tuple, float] = {}
    out_of_window = 0
    for row in reader:
        n = reader.line_num
        if any(row.get(c) in (None, "") for c in TAPS_COLUMNS):
            raise InputDataError(f"line {n}: malformed tap row (missing fields)")
        try:
            stamp = dt.datetime.fromisoformat(row["timestamp"].strip())
        except ValueError:
            raise InputDataError(
                f"line {n}: unparsable timestamp {row['timestamp']!r}"
            ) from None
        tap = TapRecord(row["station_id"].strip(), stamp, row["direction"].strip(), row["source_id"].strip())
        period = schedule.period_index_for(stamp.time())
        if period is None or weekday_name(stamp.date()) not in schedule.service_days:
            out_of_window += 1
            continue
        key = (stamp.date(), period, tap.direction, tap.station_id, tap.source_id)
        totals[key] = totals.get(key, 0.0) + 1.0
    counts = [
        PeriodCount(date, weekday_name(date), period, direction, station, value, source)
        for (date, period, direction, station, source), value in sorted(totals.items(), key=_sort_key)
    ]
    return TapBucketing(counts, out_of_window)


def _sort_key(item):
    (date, period, direction, station, source), _ = item
    return (date, station, direction, period, source)


def load_counts(stream: Iterable[str], schedule: PeriodSchedule) -> list[PeriodCount]:
    """Read pre-aggregated counts, validating every row against the schedule.

    An optional trailing ``quality`` column (written by :func:`write_counts`)
    is honoured; absent, rows load as quality ``observed``.
    """
    reader = _open_reader(stream, COUNTS_COLUMNS, optional=("quality",))
    counts: list[PeriodCount] = []
    seen: dict[tuple, int] = {}
    for row in reader:
        n = reader.line_num
        if any(row.get(c) in (None, "") for c in COUNTS_COLUMNS):
            raise InputDataError(f"line {n}: malformed count row (missing fields)")
        date = _parse_date(row["date"], n)
        try:
            period = int(row["period_index"])
            value = float(row["count"])
        except ValueError as exc:
            raise InputDataError(f"line {n}: {exc}") from None
        if not 1 <= period <= schedule.period_count:
            raise InputDataError(
                f"line {n}: period_index {period} outside 1..{schedule.period_count}"
            )
        try:
            count = PeriodCount(
                date,
                row["day_of_week"].strip(),
                period,
                row["direction"].strip(),
                row["station_id"].strip(),
                value,
                row["source_id"].strip(),
                (row.get("quality") or "observed").strip(),
            )
        except InputDataError as exc:
            raise InputDataError(f"line {n}: {exc}") from None
        key = count.full_key()
        if key in seen:
            raise InputDataError(
                f"line {n}: duplicate key {key} already seen at line {seen[key]}"
            )
        seen[key] = n
        counts.append(count)
    return counts


def write_counts(counts: Iterable[PeriodCount], stream) -> None:
    """Write counts as CSV at full float precision (round-trips through load_counts)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COUNTS_COLUMNS + ("quality",))
    for c in counts:
        writer.writerow(
            [
                c.date.isoformat(),
                c.day_of_week,
                c.period_index,
                c.direction,
                c.station_id,
                repr(float(c.count)),
                c.source_id,
                c.quality,
            ]
        )


def load_labels(stream: Iterable[str]) -> list[CalendarLabel]:
    reader = _open_reader(stream, LABELS_COLUMNS)
    labels: list[CalendarLabel] = []
    seen: dict[dt.date, int] = {}
    for row in reader:
        n = reader.line_num
        if any(row.get(c) in (None, "") for c in LABELS_COLUMNS):
            raise InputDataError(f"line {n}: malformed label row")
        date = _parse_date(row["date"], n)
        if date in seen:
            raise InputDataError(f"line {n}: date {date} already labeled at line {seen[date]}")
        seen[date] = n
        labels.append(CalendarLabel(date, row["day_type"].strip()))
    return labels


def filter_normal(
    counts: Iterable[PeriodCount], labels: Iterable[CalendarLabel] = ()
) -> list[PeriodCount]:
    """Keep only counts on dates labeled normal; unlabeled dates are normal."""
    day_type = {label.date: label.day_type for label in labels}
    return [c for c in counts if day_type.get(c.date, "normal") == "normal"]


def fuse_sources(
    counts: Iterable[PeriodCount], weights: Mapping[str, float] | None = None
) -> list[PeriodCount]:
    """Collapse multi-source duplicates of a slot into one weighted-mean count.

    Sources without an entry in ``weights`` get weight 1.  Slots observed by
    a single source pass through unchanged; fused slots carry the reserved
    source id and quality ``observed``.
    """
    weights = dict(weights or {})
    for source, w in weights.items():
        if w <= 0:
            raise InputDataError(f"non-positive weight {w} for source {source!r}")
    groups: dict[tuple, list[PeriodCount]] = {}
    order: list[tuple] = []
    for c in counts:
        key = c.slot_key()
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(c)
    fused: list[PeriodCount] = []
    for key in order:
        members = groups[key]
        if len(members) == 1:
            fused.append(members[0])
            continue
        sources = [m.source_id for m in members]
        if len(set(sources)) != len(sources):
            raise InputDataError(f"slot {key} has repeated source ids {sources}")
        total_weight = sum(weights.get(m.source_id, 1.0) for m in members)
        value = sum(weights.get(m.source_id, 1.0) * m.count for m in members) / total_weight
        first = members[0]
        fused.append(replace(first, count=value, source_id=FUSED_SOURCE, quality="observed"))
    return fused
