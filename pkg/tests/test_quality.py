import dataclasses
import datetime as dt

import pytest

from flowcast import (
    CalendarLabel,
    ExpectedGrid,
    InputDataError,
    NumericalError,
    PeriodSchedule,
    classify_anomalies,
    clean_pipeline,
    detect_missing,
    impute,
)
from flowcast.quality import EQUIPMENT_FAILURE, TRAFFIC_EVENT

from conftest import count_row

MONDAY = dt.date(2024, 7, 1)


def week_grid(schedule, days=7, directions=("outbound",)):
    return ExpectedGrid(MONDAY, MONDAY + dt.timedelta(days=days - 1), schedule, directions, "CENTRAL")


def full_grid_counts(schedule, days=7, base=800.0):
    counts = []
    for offset in range(days):
        date = MONDAY + dt.timedelta(days=offset)
        for period in range(1, schedule.period_count + 1):
            counts.append(count_row(date, period, base + 5.0 * (offset % 4) + 10.0 * period))
    return counts


class TestDetectMissing:
    def test_one_deleted_cell(self, schedule):
        counts = full_grid_counts(schedule)
        removed = counts.pop(20)
        missing = detect_missing(counts, week_grid(schedule))
        assert missing == [(removed.date, removed.period_index, removed.direction)]

    def test_empty_counts_yields_all_slots(self, schedule):
        missing = detect_missing([], week_grid(schedule))
        assert len(missing) == 7 * 8
        assert missing == sorted(missing, key=lambda k: (k[0], k[2], k[1]))

    def test_complete_grid_yields_nothing(self, schedule):
        assert detect_missing(full_grid_counts(schedule), week_grid(schedule)) == []

    def test_non_service_days_not_expected(self):
        schedule = PeriodSchedule(service_days=frozenset({"Mon", "Tue", "Wed", "Thu", "Fri"}))
        missing = detect_missing([], week_grid(schedule))
        assert len(missing) == 5 * 8
        assert all(k[0].weekday() < 5 for k in missing)


def four_week_counts(schedule, cell_value=lambda day, period: 780.0 + 10.0 * period):
    counts = []
    for week in range(4):
        for day in range(7):
            date = MONDAY + dt.timedelta(days=7 * week + day)
            for period in range(1, schedule.period_count + 1):
                jitter = (-8.0, 8.0, -3.0, 3.0)[week]
                counts.append(count_row(date, period, cell_value(day, period) + jitter))
    return counts


class TestClassifyAnomalies:
    def test_isolated_collapse_is_equipment_failure(self, schedule):
        counts = four_week_counts(schedule)
        counts[10] = dataclasses.replace(counts[10], count=0.0)
        anomalies, skipped = classify_anomalies(counts)
        assert skipped == []
        assert [a.classification for a in anomalies] == [EQUIPMENT_FAILURE]
        assert anomalies[0].observed == 0.0
        assert abs(anomalies[0].z_score) > 10

    def test_consecutive_surge_is_traffic_event(self, schedule):
        counts = four_week_counts(schedule)
        surge_date = MONDAY + dt.timedelta(days=9)
        replaced = []
        for i, c in enumerate(counts):
            if c.date == surge_date and c.period_index in (3, 4, 5):
                counts[i] = dataclasses.replace(c, count=c.count * 3.0)
                replaced.append(i)
        assert len(replaced) == 3
        anomalies, _ = classify_anomalies(counts)
        assert len(anomalies) == 3
        assert all(a.classification == TRAFFIC_EVENT for a in anomalies)

    def test_clean_data_has_no_anomalies(self, schedule):
        anomalies, skipped = classify_anomalies(four_week_counts(schedule))
        assert anomalies == [] and skipped == []

    def test_opposite_sign_neighbor_does_not_corroborate(self, schedule):
        counts = four_week_counts(schedule)
        date = MONDAY + dt.timedelta(days=3)
        for i, c in enumerate(counts):
            if c.date == date and c.period_index == 4:
                counts[i] = dataclasses.replace(c, count=c.count * 4.0)
            elif c.date == date and c.period_index in (3, 5):
                counts[i] = dataclasses.replace(c, count=c.count * 0.1)
        anomalies, _ = classify_anomalies(counts)
        spike = [a for a in anomalies if a.period_index == 4 and a.date == date]
        assert spike and spike[0].classification == EQUIPMENT_FAILURE

    def test_small_cells_skipped_and_reported(self, schedule):
        counts = [
            count_row(MONDAY + dt.timedelta(days=7 * w), 1, 700.0 + w) for w in range(3)
        ]
        anomalies, skipped = classify_anomalies(counts)
        assert anomalies == []
        assert [(s.day_of_week, s.period_index, s.observations) for s in skipped] == [("Mon", 1, 3)]

    def test_invariant_under_cell_level_shift(self, schedule):
        counts = four_week_counts(schedule)
        counts[5] = dataclasses.replace(counts[5], count=counts[5].count * 6)
        base, _ = classify_anomalies(counts)
        shifted = [
            dataclasses.replace(c, count=c.count + 5000.0)
            if (c.day_of_week, c.period_index) == ("Mon", 6)
            else c
            for c in counts
        ]
        moved, _ = classify_anomalies(shifted)
        assert [(a.slot(), round(a.z_score, 9), a.classification) for a in base] == [
            (a.slot(), round(a.z_score, 9), a.classification) for a in moved
        ]

    def test_duplicate_slot_rejected(self, schedule):
        counts = four_week_counts(schedule)
        counts.append(dataclasses.replace(counts[0], source_id="video"))
        with pytest.raises(InputDataError, match="fuse"):
            classify_anomalies(counts)

    def test_values_equal_to_cell_median_are_silent(self, schedule):
        counts = four_week_counts(schedule, cell_value=lambda day, period: 640.0)
        constant = [dataclasses.replace(c, count=640.0) for c in counts]
        anomalies, skipped = classify_anomalies(constant)
        assert anomalies == [] and skipped == []

    def test_constant_history_flags_any_deviation(self, schedule):
        counts = [dataclasses.replace(c, count=640.0) for c in four_week_counts(schedule)]
        counts[37] = dataclasses.replace(counts[37], count=640.5)
        anomalies, _ = classify_anomalies(counts)
        assert [a.observed for a in anomalies] == [640.5]
        assert anomalies[0].classification == EQUIPMENT_FAILURE


class TestImpute:
    def test_cell_mean(self, schedule):
        counts = [
            count_row(MONDAY + dt.timedelta(days=7 * w), 2, value)
            for w, value in enumerate((700.0, 720.0, 740.0))
        ]
        target_date = MONDAY + dt.timedelta(days=21)
        (imputed,) = impute(counts, [(target_date, 2, "outbound")])
        assert imputed.count == pytest.approx(720.0)
        assert imputed.quality == "imputed"
        assert counts == counts[:]  # input untouched

    def test_flagged_history_is_unusable(self, schedule):
        counts = [count_row(MONDAY, 2, 900.0, quality="flagged_event")]
        with pytest.raises(NumericalError, match="no clean history"):
            impute(counts, [(MONDAY + dt.timedelta(days=7), 2, "outbound")])

    def test_two_targets_in_different_cells(self, schedule):
        counts = []
        for w in range(3):
            counts.append(count_row(MONDAY + dt.timedelta(days=7 * w), 1, 100.0 + w))
            counts.append(count_row(MONDAY + dt.timedelta(days=7 * w), 2, 200.0 + w))
        targets = [
            (MONDAY + dt.timedelta(days=21), 1, "outbound"),
            (MONDAY + dt.timedelta(days=21), 2, "outbound"),
        ]
        filled = impute(counts, targets)
        assert [round(c.count, 6) for c in filled] == [101.0, 201.0]

    def test_target_itself_not_used_as_history(self, schedule):
        counts = [
            count_row(MONDAY, 1, 500.0),
            count_row(MONDAY + dt.timedelta(days=7), 1, 9999.0),
        ]
        (imputed,) = impute(counts, [(MONDAY + dt.timedelta(days=7), 1, "outbound")])
        assert imputed.count == pytest.approx(500.0)


class TestCleanPipeline:
    def build_fixture(self, schedule):
        counts = four_week_counts(schedule)
        deleted = counts.pop(12)
        spike_at = next(
            i for i, c in enumerate(counts) if c.date == MONDAY + dt.timedelta(days=8)
            and c.period_index == 2
        )
        counts[spike_at] = dataclasses.replace(counts[spike_at], count=0.0)
        surge_date = MONDAY + dt.timedelta(days=16)
        for i, c in enumerate(counts):
            if c.date == surge_date and c.period_index in (5, 6, 7):
                counts[i] = dataclasses.replace(c, count=c.count * 3.0)
        grid = ExpectedGrid(MONDAY, MONDAY + dt.timedelta(days=27), schedule, ("outbound",), "CENTRAL")
        return counts, grid, deleted

    def test_report_and_completeness(self, schedule):
        counts, grid, deleted = self.build_fixture(schedule)
        cleaned, report = clean_pipeline(counts, grid)
        assert len(report.missing) == 1
        assert report.missing[0][:2] == (deleted.date, deleted.period_index)
        failures = [a for a in report.anomalies if a.classification == EQUIPMENT_FAILURE]
        events = [a for a in report.anomalies if a.classification == TRAFFIC_EVENT]
        assert len(failures) == 1 and len(events) == 3
        assert len(report.imputations) == 2
        assert len(cleaned) == 28 * 8
        assert {c.quality for c in cleaned} == {"observed", "imputed", "flagged_event"}
        assert sum(1 for c in cleaned if c.quality == "flagged_event") == 3

    def test_idempotent_on_own_output(self, schedule):
        counts, grid, _ = self.build_fixture(schedule)
        cleaned, _ = clean_pipeline(counts, grid)
        cleaned_again, report = clean_pipeline(cleaned, grid)
        assert report.imputations == ()
        assert all(a.classification != EQUIPMENT_FAILURE for a in report.anomalies)
        assert cleaned_again == cleaned

    def test_already_clean_is_identity(self, schedule):
        counts = four_week_counts(schedule)
        grid = ExpectedGrid(MONDAY, MONDAY + dt.timedelta(days=27), schedule, ("outbound",), "CENTRAL")
        cleaned, report = clean_pipeline(counts, grid)
        assert sorted(cleaned, key=lambda c: (c.date, c.direction, c.period_index)) == cleaned
        assert set(cleaned) == set(counts)
        assert report.missing == () and report.anomalies == () and report.imputations == ()

    def test_surge_day_retained_not_imputed(self, schedule):
        counts, grid, _ = self.build_fixture(schedule)
        cleaned, report = clean_pipeline(counts, grid)
        surge_date = MONDAY + dt.timedelta(days=16)
        surge_rows = [c for c in cleaned if c.date == surge_date and c.period_index in (5, 6, 7)]
        assert all(c.quality == "flagged_event" for c in surge_rows)
        assert all(imp.date != surge_date for imp in report.imputations)

    def test_labeled_dates_not_expected_or_kept(self, schedule):
        counts = four_week_counts(schedule)
        holiday = MONDAY + dt.timedelta(days=7)
        labels = [CalendarLabel(holiday, "holiday")]
        grid = ExpectedGrid(MONDAY, MONDAY + dt.timedelta(days=27), schedule, ("outbound",), "CENTRAL")
        cleaned, report = clean_pipeline(counts, grid, labels)
        assert len(cleaned) == 27 * 8
        assert all(c.date != holiday for c in cleaned)
        assert all(k[0] != holiday for k in report.missing)

    def test_foreign_station_rejected(self, schedule):
        counts, grid, _ = self.build_fixture(schedule)
        counts.append(count_row(MONDAY, 1, 10.0, station="OTHER", direction="inbound"))
        with pytest.raises(InputDataError, match="OTHER"):
            clean_pipeline(counts, grid)

    def test_report_invariant_enforced(self, schedule):
        from flowcast.quality import Anomaly, QualityReport

        failure = Anomaly(MONDAY, 1, "outbound", 0.0, -50.0, EQUIPMENT_FAILURE)
        with pytest.raises(NumericalError, match="exactly once"):
            QualityReport(missing=(), anomalies=(failure,), imputations=())

    def test_no_observed_value_altered(self, schedule):
        counts, grid, _ = self.build_fixture(schedule)
        original_by_slot = {(c.date, c.period_index, c.direction): c.count for c in counts}
        cleaned, report = clean_pipeline(counts, grid)
        failure_slots = {
            a.slot() for a in report.anomalies if a.classification == EQUIPMENT_FAILURE
        }
        for c in cleaned:
            slot = (c.date, c.period_index, c.direction)
            if c.quality == "imputed":
                assert slot in failure_slots or slot not in original_by_slot
            else:
                assert c.count == original_by_slot[slot]
