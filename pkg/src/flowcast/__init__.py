"""Passenger-flow cleaning, variance screening, and period-regression forecasting."""

from .anova import AnovaRow, AnovaTable, FactorialSample, two_way_anova
from .errors import FlowcastError, InputDataError, NumericalError
from .forecast import (
    DayGrouping,
    MergeDecision,
    RegressionModel,
    ScheduleMismatchWarning,
    ValidationEntry,
    ValidationReport,
    counts_to_factorial_sample,
    discover_groups,
    fit_models,
    load_model,
    predict,
    save_model,
    validate,
)
from .ingest import (
    CalendarLabel,
    PeriodCount,
    TapBucketing,
    TapRecord,
    filter_normal,
    fuse_sources,
    load_counts,
    load_labels,
    load_taps,
    write_counts,
)
from .quality import (
    Anomaly,
    ExpectedGrid,
    Imputation,
    QualityReport,
    SkippedCell,
    classify_anomalies,
    clean_pipeline,
    detect_missing,
    impute,
)
from .regression import CoefStats, DummyDesign, OlsFit, adjusted_r2, ols_dummy_fit
from .schedule import DIRECTIONS, WEEKDAYS, PeriodSchedule, load_schedule, schedule_from_dict
from .tails import betainc, f_tail, t_tail_two_sided

__version__ = "0.1.0"

__all__ = [
    "AnovaRow",
    "AnovaTable",
    "Anomaly",
    "CalendarLabel",
    "CoefStats",
    "DIRECTIONS",
    "DayGrouping",
    "DummyDesign",
    "ExpectedGrid",
    "FactorialSample",
    "FlowcastError",
    "Imputation",
    "InputDataError",
    "MergeDecision",
    "NumericalError",
    "OlsFit",
    "PeriodCount",
    "PeriodSchedule",
    "QualityReport",
    "RegressionModel",
    "ScheduleMismatchWarning",
    "SkippedCell",
    "TapBucketing",
    "TapRecord",
    "ValidationEntry",
    "ValidationReport",
    "WEEKDAYS",
    "adjusted_r2",
    "betainc",
    "classify_anomalies",
    "clean_pipeline",
    "counts_to_factorial_sample",
    "detect_missing",
    "discover_groups",
    "f_tail",
    "filter_normal",
    "fit_models",
    "fuse_sources",
    "impute",
    "load_counts",
    "load_labels",
    "load_model",
    "load_schedule",
    "load_taps",
    "ols_dummy_fit",
    "predict",
    "save_model",
    "schedule_from_dict",
    "t_tail_two_sided",
    "two_way_anova",
    "validate",
    "write_counts",
]
