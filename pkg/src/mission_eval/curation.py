"""Corpus curation: segmentation, metadata joins, splitting, annotation merge.

Covers the post-collection steps: cutting continuous recordings into
single-subject segments along activity-log timestamps, attaching the
per-minute environment sample, the demographically balanced train/test
split, and merging manual annotation checks over the automated ones
(including quarantine of segments whose subject could not be confirmed).
"""

from __future__ import annotations

import hashlib
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime

from .model import (
    AnnotationSet,
    EnvironmentRecord,
    MediaSegment,
    SubjectRecord,
    format_ts,
    parse_ts,
    truncate_to_minute,
)
from .rng import keyed_rng
from .xmlio import fmt_float, write_document

log = logging.getLogger(__name__)

__all__ = [
    "Station",
    "ActivityRecord",
    "ActivityLog",
    "RecordingWindow",
    "SplitReport",
    "MissingWeatherError",
    "segment_id_for",
    "segment_by_timestamps",
    "attach_environment",
    "split_train_test",
    "merge_annotations",
    "is_quarantined",
    "activity_log_to_element",
    "element_to_activity_log",
    "recordings_to_element",
    "element_to_recordings",
    "split_report_document",
    "split_report_table",
]


@dataclass(frozen=True)
class Station:
    station_id: str
    venue: str          # indoor | field
    clothing_set: int


@dataclass(frozen=True)
class ActivityRecord:
    subject_id: str
    activity: str
    start_ts: datetime
    end_ts: datetime
    station_id: str


@dataclass(frozen=True)
class ActivityLog:
    stations: tuple[Station, ...]
    records: tuple[ActivityRecord, ...]

    def __post_init__(self) -> None:
        for record in self.records:
            if record.end_ts <= record.start_ts:
                raise ValueError(f"log interval for {record.subject_id} has end <= start")
        by_station: dict[str, list[ActivityRecord]] = {}
        for record in self.records:
            by_station.setdefault(record.station_id, []).append(record)
        for station_id, records in by_station.items():
            ordered = sorted(records, key=lambda r: r.start_ts)
            for prev, cur in zip(ordered, ordered[1:]):
                if cur.start_ts < prev.end_ts:
                    raise ValueError(
                        f"overlapping intervals on station {station_id}: "
                        f"{prev.subject_id} and {cur.subject_id}"
                    )

    def station(self, station_id: str) -> Station:
        for station in self.stations:
            if station.station_id == station_id:
                return station
        raise KeyError(station_id)


@dataclass(frozen=True)
class RecordingWindow:
    """Continuous stream descriptor for one sensor at one station."""

    recording_id: str
    sensor_id: str
    station_id: str
    start_ts: datetime
    end_ts: datetime


class MissingWeatherError(KeyError):
    pass


def segment_id_for(sensor_id: str, subject_id: str, start_ts: datetime) -> str:
    """Deterministic pseudonymous segment id (no subject string embedded)."""
    digest = hashlib.sha1(
        f"{sensor_id}|{subject_id}|{format_ts(start_ts)}".encode("utf-8")
    ).hexdigest()[:12]
    return f"seg--{sensor_id}--{digest}"


def segment_by_timestamps(recording: RecordingWindow, log_: ActivityLog) -> list[MediaSegment]:
    """Cut one recording into single-subject segments along the activity log.

    Emits one segment per log interval on the recording's station that
    intersects the recording span; intervals entirely outside the span are
    skipped with a warning.  The log's station table supplies the clothing
    set in effect.
    """
    station = log_.station(recording.station_id)
    segments = []
    for record in sorted(log_.records, key=lambda r: (r.start_ts, r.subject_id)):
        if record.station_id != recording.station_id:
            continue
        start = max(record.start_ts, recording.start_ts)
        end = min(record.end_ts, recording.end_ts)
        if end <= start:
            log.warning(
                "interval %s/%s outside recording %s span; skipped",
                record.subject_id, record.activity, recording.recording_id,
            )
            continue
        segment_id = segment_id_for(recording.sensor_id, record.subject_id, start)
        segments.append(
            MediaSegment(
                segment_id=segment_id,
                subject_id=record.subject_id,
                activity=record.activity,
                clothing_set=station.clothing_set,
                sensor_id=recording.sensor_id,
                start_ts=start,
                end_ts=end,
                payload_ref=f"segments/{segment_id}.brf",
                annotations=AnnotationSet(segment_id),
            )
        )
    return segments


def attach_environment(
    segment: MediaSegment, weather_series: dict[datetime, EnvironmentRecord]
) -> MediaSegment:
    """Attach the environment record for the segment's start minute."""
    minute = truncate_to_minute(segment.start_ts)
    record = weather_series.get(minute)
    if record is None:
        raise MissingWeatherError(
            f"no weather record for {segment.segment_id} at minute {format_ts(minute)}"
        )
    return segment.with_environment(record)


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------


@dataclass
class SplitReport:
    assignment: dict[str, str]                # subject_id -> train | test
    tv_distance: dict[str, float]             # attribute -> total variation
    tolerance: float
    test_fraction: float
    tolerance_met: bool
    flagged: bool = False

    @property
    def test_subjects(self) -> list[str]:
        return sorted(s for s, split in self.assignment.items() if split == "test")

    @property
    def train_subjects(self) -> list[str]:
        return sorted(s for s, split in self.assignment.items() if split == "train")


def _buckets(subjects: list[SubjectRecord]) -> dict[str, dict[str, str]]:
    """Bucket each balancing attribute: age decades, gender, height quartiles."""
    heights = sorted(s.height_cm for s in subjects)
    n = len(heights)
    qs = [heights[min(n - 1, (n * k) // 4)] for k in (1, 2, 3)]

    def height_bucket(h: int) -> str:
        for i, q in enumerate(qs):
            if h <= q:
                return f"q{i + 1}"
        return "q4"

    out: dict[str, dict[str, str]] = {"age": {}, "gender": {}, "height": {}}
    for s in subjects:
        out["age"][s.subject_id] = f"{(s.age_years // 10) * 10}s"
        out["gender"][s.subject_id] = s.gender
        out["height"][s.subject_id] = height_bucket(s.height_cm)
    return out


def _tv_distance(
    bucket_of: dict[str, str], train: set[str], test: set[str]
) -> float:
    values = sorted(set(bucket_of.values()))
    tv = 0.0
    for value in values:
        p = sum(1 for s in train if bucket_of[s] == value) / max(len(train), 1)
        q = sum(1 for s in test if bucket_of[s] == value) / max(len(test), 1)
        tv += abs(p - q)
    return 0.5 * tv


def _max_tv(buckets, train: set[str], test: set[str]) -> tuple[float, dict[str, float]]:
    tvs = {attr: _tv_distance(bucket_of, train, test) for attr, bucket_of in buckets.items()}
    return max(tvs.values()), tvs


def _objective(buckets, train: set[str], test: set[str]) -> tuple[float, float]:
    tvs = [_tv_distance(bucket_of, train, test) for bucket_of in buckets.values()]
    return max(tvs), sum(tvs)


def _stratified_start(subjects, buckets, test_fraction, rng) -> set[str]:
    cells: dict[tuple[str, str, str], list[str]] = {}
    for s in subjects:
        key = (buckets["age"][s.subject_id], buckets["gender"][s.subject_id],
               buckets["height"][s.subject_id])
        cells.setdefault(key, []).append(s.subject_id)
    test: set[str] = set()
    for key in sorted(cells):
        members = cells[key]
        order = list(rng.permutation(len(members)))
        take = int(round(test_fraction * len(members)))
        test.update(members[i] for i in order[:take])
    # repair the overall count to within one subject of the target
    target = test_fraction * len(subjects)
    all_ids = [s.subject_id for s in subjects]
    pool_order = list(rng.permutation(len(all_ids)))
    for idx in pool_order:
        if len(test) < target - 0.5 and all_ids[idx] not in test:
            test.add(all_ids[idx])
        elif len(test) > target + 0.5 and all_ids[idx] in test:
            test.discard(all_ids[idx])
    return test


def _swap_descent(buckets, train: set[str], test: set[str]):
    """Steepest-descent single swaps under the lexicographic
    (max TV, sum TV) objective, run to a local minimum."""
    current = _objective(buckets, train, test)
    improved = True
    while improved:
        improved = False
        best = (current, None, None)
        for a in sorted(train):
            for b in sorted(test):
                train2 = (train - {a}) | {b}
                test2 = (test - {b}) | {a}
                cand = _objective(buckets, train2, test2)
                if cand < (best[0][0] - 1e-12, best[0][1] - 1e-12):
                    best = (cand, a, b)
        if best[1] is not None:
            train = (train - {best[1]}) | {best[2]}
            test = (test - {best[2]}) | {best[1]}
            current = best[0]
            improved = True
    return train, test, current


def split_train_test(
    subjects: list[SubjectRecord],
    test_fraction: float,
    tolerance: float = 0.05,
    seed: int = 0,
    restarts: int = 4,
) -> SplitReport:
    """Seeded stratified split plus greedy single-swap balancing.

    Guarantees |test share - test_fraction| <= 1 subject.  Each restart
    descends to a swap-local minimum of the worst attribute TV distance
    (ties broken by the sum); the best restart wins.  An unreachable
    tolerance yields a flagged best-effort report, never a failure.
    """
    if len(subjects) < 2:
        raise ValueError("need at least 2 subjects to split")
    subjects = sorted(subjects, key=lambda s: s.subject_id)
    buckets = _buckets(subjects)
    all_ids = {s.subject_id for s in subjects}

    best: tuple[tuple[float, float], set[str]] | None = None
    for restart in range(max(restarts, 1)):
        rng = keyed_rng(seed, "train-test-split", restart)
        test = _stratified_start(subjects, buckets, test_fraction, rng)
        _, test, value = _swap_descent(buckets, all_ids - test, test)
        if best is None or value < best[0]:
            best = (value, test)
        if best[0][0] <= tolerance and restart >= 0:
            break
    test = best[1]
    train = all_ids - test

    worst, tvs = _max_tv(buckets, train, test)
    assignment = {s: ("test" if s in test else "train") for s in sorted(all_ids)}
    met = worst <= tolerance
    if not met:
        log.warning("split tolerance %.3f unreachable; worst TV %.3f", tolerance, worst)
    return SplitReport(
        assignment=assignment,
        tv_distance=tvs,
        tolerance=tolerance,
        test_fraction=test_fraction,
        tolerance_met=met,
        flagged=not met,
    )


# ---------------------------------------------------------------------------
# annotation merge
# ---------------------------------------------------------------------------


def merge_annotations(auto: AnnotationSet, manual: AnnotationSet) -> AnnotationSet:
    """Manual records replace auto records framewise."""
    if manual.frames and manual.segment_id != auto.segment_id:
        raise ValueError(
            f"annotation sets reference different segments: "
            f"{auto.segment_id!r} vs {manual.segment_id!r}"
        )
    frame_count = len(auto.frames)
    merged = auto.frame_map()
    for frame in manual.frames:
        if frame.frame_index >= frame_count:
            raise ValueError(
                f"manual record for frame {frame.frame_index} beyond "
                f"frame count {frame_count} of {auto.segment_id}"
            )
        merged[frame.frame_index] = frame
    frames = tuple(merged[i] for i in sorted(merged))
    return AnnotationSet(segment_id=auto.segment_id, frames=frames)


def is_quarantined(merged: AnnotationSet) -> bool:
    """True when a manual check failed to confirm the claimed subject."""
    return any(f.source == "manual" and not f.identity_confirmed for f in merged.frames)


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------


def activity_log_to_element(log_: ActivityLog) -> ET.Element:
    root = ET.Element("activity-log")
    stations = ET.SubElement(root, "stations")
    for station in sorted(log_.stations, key=lambda s: s.station_id):
        elem = ET.SubElement(stations, "station")
        elem.set("id", station.station_id)
        elem.set("venue", station.venue)
        elem.set("clothing-set", str(station.clothing_set))
    records = ET.SubElement(root, "records")
    for record in sorted(log_.records, key=lambda r: (r.start_ts, r.station_id, r.subject_id)):
        elem = ET.SubElement(records, "record")
        elem.set("subject", record.subject_id)
        elem.set("activity", record.activity)
        elem.set("start", format_ts(record.start_ts))
        elem.set("end", format_ts(record.end_ts))
        elem.set("station", record.station_id)
    return root


def element_to_activity_log(root: ET.Element) -> ActivityLog:
    stations = tuple(
        Station(e.get("id"), e.get("venue"), int(e.get("clothing-set")))
        for e in root.find("stations").findall("station")
    )
    records = tuple(
        ActivityRecord(
            subject_id=e.get("subject"),
            activity=e.get("activity"),
            start_ts=parse_ts(e.get("start")),
            end_ts=parse_ts(e.get("end")),
            station_id=e.get("station"),
        )
        for e in root.find("records").findall("record")
    )
    return ActivityLog(stations=stations, records=records)


def recordings_to_element(recordings: list[RecordingWindow]) -> ET.Element:
    root = ET.Element("recordings")
    for rec in sorted(recordings, key=lambda r: r.recording_id):
        elem = ET.SubElement(root, "recording")
        elem.set("id", rec.recording_id)
        elem.set("sensor", rec.sensor_id)
        elem.set("station", rec.station_id)
        elem.set("start", format_ts(rec.start_ts))
        elem.set("end", format_ts(rec.end_ts))
    return root


def element_to_recordings(root: ET.Element) -> list[RecordingWindow]:
    return [
        RecordingWindow(
            recording_id=e.get("id"),
            sensor_id=e.get("sensor"),
            station_id=e.get("station"),
            start_ts=parse_ts(e.get("start")),
            end_ts=parse_ts(e.get("end")),
        )
        for e in root.findall("recording")
    ]


def split_report_document(report: SplitReport) -> bytes:
    root = ET.Element("split-report")
    root.set("test-fraction", fmt_float(report.test_fraction))
    root.set("tolerance", fmt_float(report.tolerance))
    root.set("tolerance-met", "true" if report.tolerance_met else "false")
    root.set("flagged", "true" if report.flagged else "false")
    distances = ET.SubElement(root, "distances")
    for attr in sorted(report.tv_distance):
        elem = ET.SubElement(distances, "attribute")
        elem.set("name", attr)
        elem.set("tv-distance", fmt_float(report.tv_distance[attr]))
    assignment = ET.SubElement(root, "assignment")
    for subject in sorted(report.assignment):
        elem = ET.SubElement(assignment, "subject")
        elem.set("id", subject)
        elem.set("split", report.assignment[subject])
    return write_document(root)


def split_report_table(report: SplitReport) -> str:
    lines = [
        "train/test split report",
        f"  test fraction target: {report.test_fraction}",
        f"  train={len(report.train_subjects)}  test={len(report.test_subjects)}",
        f"  tolerance: {report.tolerance}  met: {report.tolerance_met}"
        + ("  [FLAGGED best-effort]" if report.flagged else ""),
        "  attribute        TV distance",
    ]
    for attr in sorted(report.tv_distance):
        lines.append(f"  {attr:16s} {report.tv_distance[attr]:.4f}")
    return "\n".join(lines) + "\n"
