"""Segmentation, weather joins, train/test split, annotation merge."""

from dataclasses import replace
from datetime import timedelta

import pytest

from conftest import make_environment, make_frame, ts
from mission_eval.curation import (
    ActivityLog,
    ActivityRecord,
    MissingWeatherError,
    RecordingWindow,
    Station,
    attach_environment,
    is_quarantined,
    merge_annotations,
    segment_by_timestamps,
    split_train_test,
)
from mission_eval.model import AnnotationSet, SubjectRecord


def field_log(records):
    return ActivityLog(stations=(Station("field", "field", 1),), records=tuple(records))


class TestSegmentation:
    def test_three_back_to_back_subjects(self):
        t0 = ts("2025-06-02T14:00:00Z")
        records = [
            ActivityRecord(f"sub-{i:04d}", "standing",
                           t0 + timedelta(seconds=10 * i),
                           t0 + timedelta(seconds=10 * i + 10), "field")
            for i in range(3)
        ]
        recording = RecordingWindow("rec-1", "cam-a", "field", t0,
                                    t0 + timedelta(seconds=30))
        segments = segment_by_timestamps(recording, field_log(records))
        assert len(segments) == 3
        for record, segment in zip(records, segments):
            assert segment.subject_id == record.subject_id
            assert segment.start_ts == record.start_ts
            assert segment.end_ts == record.end_ts
            assert segment.clothing_set == 1
            assert segment.sensor_id == "cam-a"

    def test_empty_log(self):
        recording = RecordingWindow("rec-1", "cam-a", "field",
                                    ts("2025-06-02T14:00:00Z"),
                                    ts("2025-06-02T15:00:00Z"))
        assert segment_by_timestamps(recording, field_log([])) == []

    def test_overlapping_intervals_rejected(self):
        t0 = ts("2025-06-02T14:00:00Z")
        with pytest.raises(ValueError, match="overlapping"):
            field_log([
                ActivityRecord("sub-0001", "standing", t0, t0 + timedelta(seconds=10), "field"),
                ActivityRecord("sub-0002", "standing", t0 + timedelta(seconds=5),
                               t0 + timedelta(seconds=15), "field"),
            ])

    def test_interval_outside_recording_skipped_with_warning(self, caplog):
        t0 = ts("2025-06-02T14:00:00Z")
        log = field_log([
            ActivityRecord("sub-0001", "standing", t0, t0 + timedelta(seconds=10), "field"),
            ActivityRecord("sub-0002", "standing", t0 + timedelta(seconds=3600),
                           t0 + timedelta(seconds=3610), "field"),
        ])
        recording = RecordingWindow("rec-1", "cam-a", "field", t0,
                                    t0 + timedelta(seconds=60))
        with caplog.at_level("WARNING"):
            segments = segment_by_timestamps(recording, log)
        assert [s.subject_id for s in segments] == ["sub-0001"]
        assert "skipped" in caplog.text

    def test_segmentation_lossless_over_span(self):
        # union of output intervals equals intersection of log and recording
        t0 = ts("2025-06-02T14:00:00Z")
        log = field_log([
            ActivityRecord("sub-0001", "standing", t0 - timedelta(seconds=5),
                           t0 + timedelta(seconds=5), "field"),
            ActivityRecord("sub-0002", "standing", t0 + timedelta(seconds=5),
                           t0 + timedelta(seconds=20), "field"),
        ])
        recording = RecordingWindow("rec-1", "cam-a", "field", t0,
                                    t0 + timedelta(seconds=15))
        segments = segment_by_timestamps(recording, log)
        covered = sum((s.end_ts - s.start_ts).total_seconds() for s in segments)
        assert covered == 15.0
        assert segments[0].start_ts == t0
        assert segments[-1].end_ts == t0 + timedelta(seconds=15)

    def test_end_before_start_rejected(self):
        t0 = ts("2025-06-02T14:00:00Z")
        with pytest.raises(ValueError, match="end <= start"):
            field_log([ActivityRecord("sub-0001", "standing", t0, t0, "field")])


class TestAttachEnvironment:
    def _series(self, minutes):
        return {ts(m): make_environment(m) for m in minutes}

    def test_mid_minute_start_truncates(self):
        from conftest import make_segment

        segment = replace(make_segment(start="2025-06-02T12:03:45Z"), environment=None)
        series = self._series(["2025-06-02T12:03:00Z", "2025-06-02T12:04:00Z"])
        out = attach_environment(segment, series)
        assert out.environment.sample_minute == ts("2025-06-02T12:03:00Z")

    def test_exact_minute_boundary(self):
        from conftest import make_segment

        segment = replace(make_segment(start="2025-06-02T12:04:00Z"), environment=None)
        series = self._series(["2025-06-02T12:03:00Z", "2025-06-02T12:04:00Z"])
        out = attach_environment(segment, series)
        assert out.environment.sample_minute == ts("2025-06-02T12:04:00Z")

    def test_missing_minute_is_hard_error_naming_both(self):
        from conftest import make_segment

        segment = replace(make_segment(start="2025-06-02T12:03:45Z"), environment=None)
        series = self._series(["2025-06-02T12:04:00Z"])
        with pytest.raises(MissingWeatherError) as err:
            attach_environment(segment, series)
        assert segment.segment_id in str(err.value)
        assert "12:03" in str(err.value)


def subjects_uniform(n, gender_cycle=("female", "male")):
    out = []
    for i in range(n):
        out.append(SubjectRecord(
            subject_id=f"sub-{i + 1:04d}",
            age_years=20 + 10 * (i % 4),
            gender=gender_cycle[i % len(gender_cycle)],
            height_cm=155 + 10 * (i % 4),
        ))
    return out


class TestSplit:
    def test_uniform_demographics_reach_zero_tv(self):
        # every joint demographic cell has an even count, so TV 0 is reachable
        report = split_train_test(subjects_uniform(96), 0.5, tolerance=0.0, seed=3)
        assert report.tolerance_met
        assert max(report.tv_distance.values()) == pytest.approx(0.0, abs=1e-12)
        assert abs(len(report.test_subjects) - 48) <= 1

    def test_split_deterministic(self):
        a = split_train_test(subjects_uniform(60), 0.4, seed=9)
        b = split_train_test(subjects_uniform(60), 0.4, seed=9)
        assert a.assignment == b.assignment

    def test_every_subject_assigned_once(self):
        subjects = subjects_uniform(31)
        report = split_train_test(subjects, 0.5, seed=1)
        assert sorted(report.assignment) == [s.subject_id for s in subjects]
        assert set(report.assignment.values()) <= {"train", "test"}

    def test_paper_scale_test_side(self):
        report = split_train_test(subjects_uniform(520), 0.5, seed=4)
        assert abs(len(report.test_subjects) - 260) <= 1

    def test_single_gender_adversarial_input(self):
        report = split_train_test(subjects_uniform(40, gender_cycle=("male",)),
                                  0.5, tolerance=0.05, seed=5)
        assert report.tv_distance["gender"] == pytest.approx(0.0)
        # flag raised only if some attribute stays over tolerance
        if report.flagged:
            assert max(report.tv_distance.values()) > 0.05
        else:
            assert max(report.tv_distance.values()) <= 0.05

    def test_unreachable_tolerance_flags_not_raises(self):
        subjects = [
            SubjectRecord("sub-0001", 21, "female", 160),
            SubjectRecord("sub-0002", 68, "male", 190),
            SubjectRecord("sub-0003", 35, "nonbinary", 175),
        ]
        report = split_train_test(subjects, 0.5, tolerance=0.01, seed=2)
        assert report.flagged
        assert not report.tolerance_met

    def test_too_few_subjects(self):
        with pytest.raises(ValueError):
            split_train_test([SubjectRecord("sub-0001", 30, "male", 180)], 0.5)


class TestMergeAnnotations:
    def test_manual_overrides_framewise(self):
        auto = AnnotationSet("seg-x", tuple(make_frame(i) for i in range(10)))
        corrected = replace(make_frame(7, head_h=44.0), source="manual")
        manual = AnnotationSet("seg-x", (corrected,))
        merged = merge_annotations(auto, manual)
        assert len(merged.frames) == 10
        assert merged.frames[7].head_bbox[3] == 44.0
        assert merged.frames[7].source == "manual"
        assert merged.frames[6].source == "auto"

    def test_empty_manual_is_identity(self):
        auto = AnnotationSet("seg-x", tuple(make_frame(i) for i in range(4)))
        assert merge_annotations(auto, AnnotationSet("seg-x")) == auto

    def test_manual_frame_beyond_count_rejected(self):
        auto = AnnotationSet("seg-x", tuple(make_frame(i) for i in range(4)))
        manual = AnnotationSet("seg-x", (replace(make_frame(9), source="manual"),))
        with pytest.raises(ValueError, match="beyond"):
            merge_annotations(auto, manual)

    def test_mismatched_segment_rejected(self):
        auto = AnnotationSet("seg-x", (make_frame(0),))
        manual = AnnotationSet("seg-y", (replace(make_frame(0), source="manual"),))
        with pytest.raises(ValueError, match="different segments"):
            merge_annotations(auto, manual)

    def test_non_subject_flag_quarantines(self):
        auto = AnnotationSet("seg-x", tuple(make_frame(i) for i in range(4)))
        manual = AnnotationSet(
            "seg-x",
            (replace(make_frame(0), source="manual", identity_confirmed=False),))
        merged = merge_annotations(auto, manual)
        assert is_quarantined(merged)
        assert not is_quarantined(auto)
