"""Deterministic synthetic count generators for demos and end-to-end checks."""

from __future__ import annotations

import datetime as dt
from typing import Mapping, Sequence

import numpy as np

from .errors import InputDataError
from .ingest import PeriodCount
from .schedule import WEEKDAYS, weekday_name

# Period-mean profiles for a busy interchange: strong morning and evening
# peaks Monday-Thursday, a heavier Friday evening, flatter weekends.
DEMO_PROFILES: dict[str, tuple[float, ...]] = {
    "Mon": (2486.266667, 1537.5, 1199.0625, 1298.8125, 1646.75, 2999.5625, 1240.125, 522.6875),
    "Tue": (2486.266667, 1537.5, 1199.0625, 1298.8125, 1646.75, 2999.5625, 1240.125, 522.6875),
    "Wed": (2486.266667, 1537.5, 1199.0625, 1298.8125, 1646.75, 2999.5625, 1240.125, 522.6875),
    "Thu": (2486.266667, 1537.5, 1199.0625, 1298.8125, 1646.75, 2999.5625, 1240.125, 522.6875),
    "Fri": (2353.33, 1467.5, 1232.5, 1339.25, 1590.5, 3301.75, 1547.0, 641.5),
    "Sat": (1225.67, 1308.5, 1330.5, 1441.75, 1323.75, 1485.25, 1098.75, 616.0),
    "Sun": (862.67, 1182.5, 1232.5, 1348.25, 1400.75, 1475.5, 1239.25, 653.75),
}

# Zero-sum weekly offsets: every cell keeps its exact profile mean while the
# sample still has within-cell variance.
DEFAULT_DELTAS = (25.0, -25.0, 10.0, -10.0)


def _check_profiles(profiles: Mapping[str, Sequence[float]]) -> int:
    missing = [d for d in WEEKDAYS if d not in profiles]
    if missing:
        raise InputDataError(f"profiles missing weekdays {missing}")
    lengths = {len(profiles[d]) for d in WEEKDAYS}
    if len(lengths) != 1:
        raise InputDataError(f"profiles have mixed period counts {sorted(lengths)}")
    return lengths.pop()


def _monday_check(start: dt.date) -> None:
    if weekday_name(start) != "Mon":
        raise InputDataError(f"start date {start} must be a Monday for whole-week coverage")


def balanced_counts(
    profiles: Mapping[str, Sequence[float]] = DEMO_PROFILES,
    weeks: int = 4,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    start: dt.date = dt.date(2024, 7, 1),
    station_id: str = "CENTRAL",
    direction: str = "outbound",
    source_id: str = "afc",
) -> list[PeriodCount]:
    """Counts whose (day, period) cell means equal the profiles exactly.

    Week w of a cell observes profile + deltas[w]; deltas must sum to zero.
    """
    period_count = _check_profiles(profiles)
    _monday_check(start)
    if len(deltas) != weeks:
        raise InputDataError(f"need one delta per week: {weeks} weeks, {len(deltas)} deltas")
    if abs(sum(deltas)) > 1e-9:
        raise InputDataError(f"deltas must sum to zero, got {sum(deltas)}")
    counts = []
    for week in range(weeks):
        for day_offset, day in enumerate(WEEKDAYS):
            date = start + dt.timedelta(days=7 * week + day_offset)
            for period in range(1, period_count + 1):
                value = float(profiles[day][period - 1]) + float(deltas[week])
                counts.append(
                    PeriodCount(date, day, period, direction, station_id, value, source_id)
                )
    return counts


def noisy_counts(
    profiles: Mapping[str, Sequence[float]] = DEMO_PROFILES,
    weeks: int = 4,
    noise_sd: float = 10.0,
    seed: int = 0,
    start: dt.date = dt.date(2024, 7, 1),
    station_id: str = "CENTRAL",
    direction: str = "outbound",
    source_id: str = "afc",
    anchor_cell_means: bool = False,
) -> list[PeriodCount]:
    """Counts drawn as profile + Gaussian noise, reproducible per seed.

    With ``anchor_cell_means`` the noise is demeaned within every
    (day, period) cell, so cell means equal the profiles exactly while the
    replicates still vary; days sharing a profile then agree exactly in
    sample, not just in expectation.
    """
    period_count = _check_profiles(profiles)
    _monday_check(start)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sd, size=(len(WEEKDAYS), period_count, weeks))
    if anchor_cell_means:
        noise -= noise.mean(axis=2, keepdims=True)
    counts = []
    for week in range(weeks):
        for day_offset, day in enumerate(WEEKDAYS):
            date = start + dt.timedelta(days=7 * week + day_offset)
            for period in range(1, period_count + 1):
                value = float(profiles[day][period - 1]) + float(noise[day_offset, period - 1, week])
                counts.append(
                    PeriodCount(date, day, period, direction, station_id, max(value, 0.0), source_id)
                )
    return counts
