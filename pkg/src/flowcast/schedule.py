"""Service-day schedule: the partition of the day into indexed count periods."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass, field

from .errors import InputDataError

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
DIRECTIONS = ("inbound", "outbound")

# Illustrative default: 8 intervals of varying width spanning 06:00-24:00.
# Any real deployment should configure boundaries that match its own
# operating hours; see the sample schedule config in the README.
DEFAULT_BOUNDARIES = (
    "06:00", "08:00", "10:00", "12:00", "14:00", "17:00", "19:00", "21:00", "24:00",
)


def weekday_name(date: dt.date) -> str:
    return WEEKDAYS[date.weekday()]


def parse_time_of_day(text: str) -> float:
    """Parse 'HH:MM' or 'HH:MM:SS' into minutes since midnight.

    '24:00' is accepted as the end-of-day boundary.
    """
    parts = text.strip().split(":")
    if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
        raise InputDataError(f"invalid time of day: {text!r}")
    hours, minutes = int(parts[0]), int(parts[1])
    seconds = int(parts[2]) if len(parts) == 3 else 0
    total = hours * 60.0 + minutes + seconds / 60.0
    if minutes > 59 or seconds > 59 or total > 1440.0:
        raise InputDataError(f"time of day out of range: {text!r}")
    return total


def _format_minutes(minutes: float) -> str:
    whole = int(round(minutes))
    return f"{whole // 60:02d}:{whole % 60:02d}"


@dataclass(frozen=True)
class PeriodSchedule:
    """Ordered day partition into ``period_count`` half-open intervals.

    ``boundaries`` holds period_count + 1 instants as minutes since local
    midnight; period i covers [boundaries[i-1], boundaries[i]).
    """

    period_count: int = 8
    boundaries: tuple[float, ...] = tuple(parse_time_of_day(t) for t in DEFAULT_BOUNDARIES)
    service_days: frozenset[str] = field(default_factory=lambda: frozenset(WEEKDAYS))

    def __post_init__(self):
        if self.period_count < 2:
            raise InputDataError(f"period_count must be >= 2, got {self.period_count}")
        if len(self.boundaries) != self.period_count + 1:
            raise InputDataError(
                f"expected {self.period_count + 1} boundaries for "
                f"{self.period_count} periods, got {len(self.boundaries)}"
            )
        if any(later <= earlier for earlier, later in zip(self.boundaries, self.boundaries[1:])):
            raise InputDataError("boundaries must be strictly increasing")
        bad = set(self.service_days) - set(WEEKDAYS)
        if bad or not self.service_days:
            raise InputDataError(f"invalid service days: {sorted(bad) or 'empty set'}")
        object.__setattr__(self, "service_days", frozenset(self.service_days))

    def period_index_for(self, when: dt.time | float) -> int | None:
        """Return the 1-based period containing a time of day, or None."""
        if isinstance(when, dt.time):
            minutes = when.hour * 60.0 + when.minute + when.second / 60.0
        else:
            minutes = float(when)
        if minutes < self.boundaries[0] or minutes >= self.boundaries[-1]:
            return None
        lo, hi = 0, self.period_count - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if minutes >= self.boundaries[mid]:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1

    def fingerprint(self) -> str:
        """Stable short hash identifying this schedule."""
        payload = json.dumps(
            {
                "period_count": self.period_count,
                "boundaries": list(self.boundaries),
                "service_days": sorted(self.service_days),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def to_json_dict(self) -> dict:
        return {
            "period_count": self.period_count,
            "boundaries": [_format_minutes(b) for b in self.boundaries],
            "service_days": [d for d in WEEKDAYS if d in self.service_days],
        }


def schedule_from_dict(data: dict) -> PeriodSchedule:
    try:
        period_count = int(data["period_count"])
        raw_boundaries = data["boundaries"]
        raw_days = data.get("service_days", list(WEEKDAYS))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputDataError(f"invalid schedule config: {exc}") from exc
    boundaries = tuple(parse_time_of_day(str(t)) for t in raw_boundaries)
    return PeriodSchedule(period_count, boundaries, frozenset(raw_days))


def load_schedule(path) -> PeriodSchedule:
    """Read a schedule config JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputDataError(f"schedule file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputDataError(f"schedule file {path} is not valid JSON: {exc}") from exc
    return schedule_from_dict(data)
