"""Repair a corrupted month of counts, then score predictions on a holdout week.

A dead sensor reading and a missing slot get repaired from cell history; a
three-period event surge is kept but flagged so it never trains the models.
Accuracy is reported as mean absolute percentage error over the holdout.

    python demos/04_clean_and_validate.py
"""

import dataclasses
import datetime as dt

from flowcast import (
    ExpectedGrid,
    PeriodSchedule,
    clean_pipeline,
    discover_groups,
    fit_models,
    validate,
)
from flowcast.synth import noisy_counts

# Eight replicate weeks: robust per-cell statistics need history, and with
# only a few replicates the MAD is fragile enough to flag honest readings.
schedule = PeriodSchedule()
monday = dt.date(2024, 7, 1)
weeks = 8
counts = noisy_counts(weeks=weeks, noise_sd=10.0, seed=8, anchor_cell_means=True)

# corrupt the data: drop one slot, zero another, triple an evening stretch
counts.pop(100)
counts[200] = dataclasses.replace(counts[200], count=0.0)
event_day = monday + dt.timedelta(days=15)
counts = [
    dataclasses.replace(c, count=c.count * 3.0)
    if c.date == event_day and c.period_index in (5, 6, 7)
    else c
    for c in counts
]

grid = ExpectedGrid(
    monday, monday + dt.timedelta(days=7 * weeks - 1), schedule, ("outbound",), "CENTRAL"
)

# With 8 Gaussian replicates per cell the MAD estimate is loose, so honest
# readings reach robust z around 8; the failure threshold goes above that
# noise floor. The planted faults sit two orders of magnitude beyond it.
cleaned, report = clean_pipeline(counts, grid, k_fail=10.0, k_corroborate=2.0)

print(f"missing slots detected: {len(report.missing)}")
for anomaly in report.anomalies:
    print(f"  {anomaly.date} period {anomaly.period_index}: observed {anomaly.observed:9.1f}, "
          f"robust z = {anomaly.z_score:8.1f} -> {anomaly.classification}")
for imputation in report.imputations:
    print(f"  repaired {imputation.date} period {imputation.period_index} "
          f"with {imputation.value:.1f} ({imputation.method})")
print(f"cleaned rows: {len(cleaned)} (grid-complete)")

# model on the cleaned month; flagged event rows are excluded automatically
grouping = discover_groups(cleaned, alpha=0.05)
models = fit_models(cleaned, grouping, "outbound", schedule)

# fresh holdout week, same regimes, new noise
holdout = noisy_counts(weeks=1, noise_sd=20.0, seed=99, start=dt.date(2024, 8, 5))
scores = validate(models, grouping, holdout)
print(f"\nholdout week: {len(scores.entries)} slots, "
      f"mean APE = {scores.mean_ape_percent:.2f}% "
      f"({scores.skipped_zero_actual} zero-actual slots skipped)")
worst = max(scores.entries, key=lambda e: e.ape_percent)
print(f"worst slot: {worst.date} period {worst.period_index} "
      f"actual {worst.actual:.0f} vs predicted {worst.predicted:.0f} "
      f"({worst.ape_percent:.1f}%)")
