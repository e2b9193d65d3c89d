import dataclasses
import datetime as dt
import json

import numpy as np
import pytest

from flowcast import (
    DayGrouping,
    InputDataError,
    NumericalError,
    PeriodSchedule,
    ScheduleMismatchWarning,
    counts_to_factorial_sample,
    discover_groups,
    fit_models,
    load_model,
    predict,
    save_model,
    validate,
)
from flowcast.synth import DEMO_PROFILES, balanced_counts, noisy_counts

from conftest import count_row, manual_model

MON_THU = (2486.266667, 1537.5, 1199.0625, 1298.8125, 1646.75, 2999.5625, 1240.125, 522.6875)
FRI = (1711.83, 826.0, 591.0, 697.75, 949.0, 2660.25, 905.5)
SAT = (609.67, 692.5, 714.5, 825.75, 707.75, 869.25, 482.75)
SUN = (208.92, 528.75, 578.75, 694.5, 747.0, 821.75, 585.5)


class TestDayGrouping:
    def test_partition_must_cover_week_in_order(self):
        with pytest.raises(InputDataError):
            DayGrouping((("Mon", "Wed"), ("Tue",), ("Thu", "Fri", "Sat", "Sun")), 0.05)
        with pytest.raises(InputDataError):
            DayGrouping((("Mon", "Tue"),), 0.05)

    def test_group_lookup(self):
        grouping = DayGrouping(
            (("Mon", "Tue", "Wed", "Thu"), ("Fri",), ("Sat",), ("Sun",)), 0.05
        )
        assert grouping.group_for("Wed") == ("Mon", "Tue", "Wed", "Thu")
        assert grouping.group_for("Sun") == ("Sun",)


class TestFactorialArrangement:
    def test_balanced_cells(self):
        counts = balanced_counts(weeks=3, deltas=(6.0, -2.0, -4.0))
        sample = counts_to_factorial_sample(counts, ("Mon", "Tue"))
        assert sample.values.shape == (2, 8, 3)

    def test_unbalanced_cells_rejected(self):
        counts = balanced_counts(weeks=3, deltas=(6.0, -2.0, -4.0))
        extra = count_row(dt.date(2024, 7, 22), 1, 999.0)  # a fourth Monday, period 1 only
        with pytest.raises(NumericalError, match="unbalanced"):
            counts_to_factorial_sample(counts + [extra], ("Mon", "Tue"))

    def test_single_replicate_rejected(self):
        counts = balanced_counts(weeks=1, deltas=(0.0,))
        with pytest.raises(NumericalError, match="replicates"):
            counts_to_factorial_sample(counts, ("Mon", "Tue"))


class TestDiscoverGroups:
    def test_recovers_four_regimes(self):
        grouping = discover_groups(balanced_counts(), 0.05)
        assert grouping.groups == (("Mon", "Tue", "Wed", "Thu"), ("Fri",), ("Sat",), ("Sun",))
        assert len(grouping.evidence) == 6
        merges = [e.merged for e in grouping.evidence]
        assert merges == [True, True, True, False, False, False]

    def test_single_regime_merges_everything(self):
        flat = {day: DEMO_PROFILES["Mon"] for day in DEMO_PROFILES}
        grouping = discover_groups(balanced_counts(profiles=flat), 0.05)
        assert grouping.groups == (("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"),)

    def test_alternating_regimes_split_monday_tuesday(self):
        profiles = dict(DEMO_PROFILES)
        profiles["Mon"] = tuple(2000.0 + 10 * p for p in range(8))
        profiles["Tue"] = tuple(1000.0 + 10 * p for p in range(8))
        grouping = discover_groups(balanced_counts(profiles=profiles), 0.05)
        assert grouping.group_for("Mon") != grouping.group_for("Tue")

    def test_noisy_data_recovers_regimes(self):
        grouping = discover_groups(noisy_counts(noise_sd=5.0, seed=123), 0.05)
        assert grouping.groups == (("Mon", "Tue", "Wed", "Thu"), ("Fri",), ("Sat",), ("Sun",))

    def test_mixed_directions_rejected(self):
        counts = balanced_counts() + balanced_counts(direction="inbound")
        with pytest.raises(InputDataError, match="single station and direction"):
            discover_groups(counts)

    def test_missing_weekday_rejected(self):
        counts = [c for c in balanced_counts() if c.day_of_week != "Wed"]
        with pytest.raises(InputDataError, match="Wed"):
            discover_groups(counts)

    def test_deterministic(self):
        counts = noisy_counts(seed=5)
        assert discover_groups(counts).groups == discover_groups(counts).groups


FOUR_GROUPS = DayGrouping((("Mon", "Tue", "Wed", "Thu"), ("Fri",), ("Sat",), ("Sun",)), 0.05)


class TestFitModels:
    def test_reproduces_cell_mean_offsets(self, schedule):
        models = fit_models(balanced_counts(), FOUR_GROUPS, "outbound", schedule)
        by_group = {m.group: m for m in models}
        mon_thu = by_group[("Mon", "Tue", "Wed", "Thu")]
        assert mon_thu.fit.intercept == pytest.approx(522.6875, abs=1e-6)
        expected = [m - MON_THU[-1] for m in MON_THU[:-1]]
        for got, want in zip(mon_thu.fit.coefficients, expected):
            assert got == pytest.approx(want, abs=1e-6)

    def test_saturday_profile_recovered_exactly(self, schedule):
        models = fit_models(balanced_counts(), FOUR_GROUPS, "outbound", schedule)
        saturday = next(m for m in models if m.group == ("Sat",))
        assert saturday.fit.intercept == pytest.approx(616.0, abs=1e-9)
        for got, want in zip(saturday.fit.coefficients, SAT):
            assert got == pytest.approx(want, abs=1e-9)

    def test_flagged_rows_excluded_by_default(self, schedule):
        counts = balanced_counts()
        poisoned = [
            dataclasses.replace(c, count=c.count * 50, quality="flagged_event")
            if c.day_of_week == "Sat" and c.date.day == 6
            else c
            for c in counts
        ]
        clean_fit = fit_models(counts, FOUR_GROUPS, "outbound", schedule)
        shielded = fit_models(poisoned, FOUR_GROUPS, "outbound", schedule)
        sat_clean = next(m for m in clean_fit if m.group == ("Sat",))
        sat_shielded = next(m for m in shielded if m.group == ("Sat",))
        # one Saturday removed entirely: means shift only by the delta structure
        assert sat_shielded.fit.intercept == pytest.approx(sat_clean.fit.intercept, abs=10.0)
        included = fit_models(poisoned, FOUR_GROUPS, "outbound", schedule, include_flagged=True)
        sat_included = next(m for m in included if m.group == ("Sat",))
        assert sat_included.fit.intercept > sat_clean.fit.intercept + 1000

    def test_empty_period_cell_is_error(self, schedule):
        counts = [c for c in balanced_counts() if not (c.day_of_week == "Fri" and c.period_index == 3)]
        with pytest.raises(NumericalError, match="Fri"):
            fit_models(counts, FOUR_GROUPS, "outbound", schedule)

    def test_scaling_counts_scales_coefficients(self, schedule):
        counts = noisy_counts(seed=2)
        lam = 2.5
        scaled = [dataclasses.replace(c, count=c.count * lam) for c in counts]
        base = fit_models(counts, FOUR_GROUPS, "outbound", schedule)
        stretched = fit_models(scaled, FOUR_GROUPS, "outbound", schedule)
        for m_base, m_scaled in zip(base, stretched):
            assert m_scaled.fit.intercept == pytest.approx(lam * m_base.fit.intercept, rel=1e-9)
            for c_base, c_scaled in zip(m_base.fit.coefficients, m_scaled.fit.coefficients):
                assert c_scaled == pytest.approx(lam * c_base, rel=1e-9, abs=1e-9)
            for p in range(1, 9):
                assert predict(m_scaled, p) == pytest.approx(lam * predict(m_base, p), rel=1e-9)


class TestPredict:
    def test_reference_period_returns_intercept_exactly(self):
        model = manual_model(522.69, (1963.58, 1014.81, 676.38, 776.13, 1124.06, 2476.88, 717.44))
        assert predict(model, 8) == model.fit.intercept

    def test_offset_periods(self):
        model = manual_model(522.69, (1963.58, 1014.81, 676.38, 776.13, 1124.06, 2476.88, 717.44))
        assert predict(model, 6) == pytest.approx(2999.57, abs=0.01)
        assert predict(model, 1) == pytest.approx(2486.27, abs=0.01)

    def test_sunday_first_period(self):
        model = manual_model(653.75, SUN, group=("Sun",))
        assert predict(model, 1) == pytest.approx(862.67, abs=0.01)

    def test_out_of_range_period(self):
        model = manual_model(500.0, (1.0, 2.0, 3.0))
        with pytest.raises(InputDataError):
            predict(model, 5)
        with pytest.raises(InputDataError):
            predict(model, 0)

    def test_non_default_reference(self):
        model = manual_model(100.0, (10.0, 20.0, 30.0), reference=1)
        assert predict(model, 1) == pytest.approx(100.0)
        assert predict(model, 2) == pytest.approx(110.0)
        assert predict(model, 4) == pytest.approx(130.0)

    def test_balanced_training_predicts_cell_means(self, schedule):
        models = fit_models(balanced_counts(), FOUR_GROUPS, "outbound", schedule)
        mon_thu = next(m for m in models if "Mon" in m.group)
        for period, mean in enumerate(MON_THU, start=1):
            assert predict(mon_thu, period) == pytest.approx(mean, abs=1e-6)


class TestValidate:
    def models(self):
        return [
            manual_model(522.69, (1963.58, 1014.81, 676.38, 776.13, 1124.06, 2476.88, 717.44)),
            manual_model(641.5, FRI, group=("Fri",)),
            manual_model(616.0, SAT, group=("Sat",)),
            manual_model(653.75, SUN, group=("Sun",)),
        ]

    def test_perfect_prediction_is_zero_ape(self):
        model = self.models()[0]
        holdout = [count_row("2024-08-05", p, predict(model, p)) for p in range(1, 9)]
        report = validate(self.models(), FOUR_GROUPS, holdout)
        assert all(e.ape_percent == 0.0 for e in report.entries)
        assert report.mean_ape_percent == 0.0

    def test_ten_percent_error(self):
        models = [manual_model(1100.0, tuple(0.0 for _ in range(7)), group=tuple(FOUR_GROUPS.groups[0]))] + self.models()[1:]
        holdout = [count_row("2024-08-05", 8, 1000.0)]
        report = validate(models, FOUR_GROUPS, holdout)
        assert report.entries[0].predicted == pytest.approx(1100.0)
        assert report.entries[0].ape_percent == pytest.approx(10.0)

    def test_hand_computed_mean(self):
        model = self.models()[0]
        actuals = [2400.0, 1500.0, 1100.0, 1300.0, 1700.0, 3100.0, 1200.0, 500.0]
        holdout = [count_row("2024-08-05", p, a) for p, a in enumerate(actuals, start=1)]
        apes = [100.0 * abs(predict(model, p) - a) / a for p, a in enumerate(actuals, start=1)]
        report = validate(self.models(), FOUR_GROUPS, holdout)
        assert report.mean_ape_percent == pytest.approx(sum(apes) / len(apes), abs=1e-9)

    def test_zero_actual_skipped_and_counted(self):
        holdout = [count_row("2024-08-05", 1, 0.0), count_row("2024-08-05", 2, 1537.5)]
        report = validate(self.models(), FOUR_GROUPS, holdout)
        assert report.skipped_zero_actual == 1
        assert len(report.entries) == 1

    def test_permutation_invariant_mean(self):
        rng = np.random.default_rng(4)
        holdout = [
            count_row(dt.date(2024, 8, 5) + dt.timedelta(days=d), p, float(rng.uniform(100, 3000)))
            for d in range(7)
            for p in range(1, 9)
        ]
        forward = validate(self.models(), FOUR_GROUPS, holdout)
        backward = validate(self.models(), FOUR_GROUPS, holdout[::-1])
        assert forward.mean_ape_percent == pytest.approx(backward.mean_ape_percent, rel=1e-12)

    def test_missing_model_for_weekday(self):
        models = self.models()[:2]
        holdout = [count_row("2024-08-10", 1, 700.0)]  # a Saturday
        with pytest.raises(InputDataError, match="Sat"):
            validate(models, FOUR_GROUPS, holdout)

    def test_direction_mismatch(self):
        holdout = [count_row("2024-08-05", 1, 700.0, direction="inbound")]
        with pytest.raises(InputDataError, match="inbound"):
            validate(self.models(), FOUR_GROUPS, holdout)


class TestModelPersistence:
    def test_round_trip(self, tmp_path, schedule):
        models = fit_models(noisy_counts(seed=6), FOUR_GROUPS, "outbound", schedule)
        path = tmp_path / "model.json"
        save_model(models[0], path)
        assert load_model(path) == models[0]

    def test_truncated_file_is_schema_error(self, tmp_path):
        path = tmp_path / "model.json"
        model = manual_model(616.0, SAT, group=("Sat",))
        save_model(model, path)
        path.write_text(path.read_text()[: path.stat().st_size // 2])
        with pytest.raises(InputDataError):
            load_model(path)

    def test_missing_field_is_schema_error(self, tmp_path):
        path = tmp_path / "model.json"
        model = manual_model(616.0, SAT, group=("Sat",))
        save_model(model, path)
        data = json.loads(path.read_text())
        del data["coefficients"]
        path.write_text(json.dumps(data))
        with pytest.raises(InputDataError, match="schema"):
            load_model(path)

    def test_fingerprint_mismatch_warns(self, tmp_path, schedule):
        path = tmp_path / "model.json"
        save_model(manual_model(616.0, SAT, group=("Sat",)), path)
        other = PeriodSchedule(2, (360.0, 720.0, 1440.0))
        with pytest.warns(ScheduleMismatchWarning):
            load_model(path, other)

    def test_matching_fingerprint_is_silent(self, tmp_path, schedule):
        import warnings

        path = tmp_path / "model.json"
        save_model(manual_model(616.0, SAT, group=("Sat",)), path)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            load_model(path, schedule)
