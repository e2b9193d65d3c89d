import datetime as dt
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flowcast import (
    CoefStats,
    OlsFit,
    PeriodCount,
    PeriodSchedule,
    RegressionModel,
)
from flowcast.schedule import weekday_name


@pytest.fixture
def schedule():
    return PeriodSchedule()


def count_row(date, period, value, direction="outbound", station="CENTRAL",
              source="afc", quality="observed"):
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return PeriodCount(date, weekday_name(date), period, direction, station, value, source, quality)


def manual_model(intercept, coefficients, group=("Mon", "Tue", "Wed", "Thu"),
                 direction="outbound", reference=None):
    """Model with hand-set parameters; diagnostics are placeholders."""
    p = len(coefficients) + 1
    stats = CoefStats(1.0, 1.0, 0.5)
    fit = OlsFit(
        intercept=float(intercept),
        coefficients=tuple(float(c) for c in coefficients),
        intercept_stats=stats,
        coef_stats=tuple(stats for _ in coefficients),
        r2=0.99,
        adj_r2=0.99,
        residual_se=1.0,
        ss_regression=99.0,
        ss_residual=1.0,
        ss_total=100.0,
        df_regression=p - 1,
        df_residual=10,
        f_stat=100.0,
        f_significance=1e-6,
        reference_period=p if reference is None else reference,
    )
    return RegressionModel(
        group=tuple(group),
        direction=direction,
        schedule_fingerprint=PeriodSchedule().fingerprint(),
        fit=fit,
        fitted_at=(dt.date(2024, 7, 1), dt.date(2024, 7, 28)),
    )
