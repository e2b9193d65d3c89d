"""Bucket raw fare-gate taps into period counts, fuse two sensors, drop a holiday.

Run from the repository root after installing the package:

    python demos/01_ingest_and_fuse.py
"""

import datetime as dt
import io
import random

from flowcast import (
    CalendarLabel,
    PeriodSchedule,
    filter_normal,
    fuse_sources,
    load_taps,
    write_counts,
)

# The default schedule splits the service day 06:00-24:00 into 8 periods of
# varying width. Real deployments configure their own boundaries.
schedule = PeriodSchedule()
print("period boundaries:", schedule.to_json_dict()["boundaries"])

# --- fabricate a morning of taps from two sensors ------------------------
rng = random.Random(42)
rows = ["station_id,timestamp,direction,source_id"]
for day in (dt.date(2024, 7, 1), dt.date(2024, 7, 2)):
    for _ in range(400):
        stamp = dt.datetime.combine(day, dt.time(6, 0)) + dt.timedelta(
            minutes=rng.uniform(0, 18 * 60)
        )
        source = "afc" if rng.random() < 0.8 else "video"
        rows.append(f"CENTRAL,{stamp:%Y-%m-%dT%H:%M:%S},outbound,{source}")
# a couple of taps before opening, to show the out-of-window tally
rows.append("CENTRAL,2024-07-01T05:12:00,outbound,afc")
rows.append("CENTRAL,2024-07-02T05:47:00,outbound,afc")

counts, out_of_window = load_taps(io.StringIO("\n".join(rows) + "\n"), schedule)
print(f"\nbucketed {sum(c.count for c in counts):.0f} taps into {len(counts)} slots; "
      f"{out_of_window} taps fell outside the schedule")

# --- fuse the two sensors, trusting the fare gates 3:1 --------------------
fused = fuse_sources(counts, {"afc": 3.0, "video": 1.0})
print(f"after fusion: {len(fused)} slots, one per (date, period)")
for c in fused[:4]:
    print(f"  {c.date} period {c.period_index}: {c.count:8.2f}  [{c.source_id}]")

# --- calendar filtering ----------------------------------------------------
labels = [CalendarLabel(dt.date(2024, 7, 2), "holiday")]
normal = filter_normal(fused, labels)
print(f"\ncalendar filter kept {len(normal)} of {len(fused)} slots "
      f"(dropped the labeled holiday)")

# Anything the pipeline produces can round-trip through the counts CSV.
buffer = io.StringIO()
write_counts(normal, buffer)
print("\nfirst lines of the counts CSV:")
print("\n".join(buffer.getvalue().splitlines()[:4]))
