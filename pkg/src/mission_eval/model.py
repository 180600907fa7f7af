"""Domain types for the evaluation corpus.

Everything here is immutable after load; validation and serialization over
these types are pure functions, so instances are safe to share across
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

__all__ = [
    "GENDERS",
    "ACTIVITIES",
    "WALKING_ACTIVITIES",
    "PLATFORMS",
    "SETTINGS",
    "CONFIGURATIONS",
    "SPLITS",
    "ROLES",
    "OCCLUSIONS",
    "SubjectRecord",
    "SensorRecord",
    "EnvironmentRecord",
    "PlatformGeometry",
    "FrameAnnotation",
    "AnnotationSet",
    "MediaSegment",
    "SigSetEntry",
    "SigSet",
    "truncate_to_minute",
    "parse_ts",
    "format_ts",
]

GENDERS = ("female", "male", "nonbinary")
ACTIVITIES = ("standing", "structured-walk", "random-walk", "phone-use")
WALKING_ACTIVITIES = ("structured-walk", "random-walk")
PLATFORMS = ("ground", "elevated", "uav")
SETTINGS = ("indoor", "field")
CONFIGURATIONS = ("face-configured", "wholebody-configured")
SPLITS = ("train", "test")
ROLES = ("probe-subject", "distractor")
OCCLUSIONS = ("none", "partial", "full")


def parse_ts(text: str) -> datetime:
    """UTC ISO-8601 with second precision, trailing Z."""
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def format_ts(ts: datetime) -> str:
    if ts.tzinfo is None or ts.utcoffset() != timezone.utc.utcoffset(None):
        raise ValueError("timestamps must be UTC-aware")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def truncate_to_minute(ts: datetime) -> datetime:
    return ts.replace(second=0, microsecond=0)


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    age_years: int
    gender: str
    height_cm: int
    split: str = "test"
    role: str = "probe-subject"


@dataclass(frozen=True)
class SensorRecord:
    sensor_id: str
    make: str
    model: str
    serial: str
    resolution_px: tuple[int, int]          # (width, height)
    focal_length_mm: tuple[float, float]    # (min, max)
    focal_mm: float                         # chosen within [min, max]
    platform: str
    setting: str                            # indoor | field
    distance_m: float
    pitch_deg: float
    configuration: str

    def __post_init__(self) -> None:
        if self.setting == "field" and self.distance_m <= 0:
            raise ValueError(f"{self.sensor_id}: field sensor needs distance_m > 0")
        lo, hi = self.focal_length_mm
        if not lo <= self.focal_mm <= hi:
            raise ValueError(f"{self.sensor_id}: focal_mm outside focal range")


@dataclass(frozen=True)
class EnvironmentRecord:
    sample_minute: datetime
    temperature_c: float
    wind_chill_c: float
    heat_index_c: float
    relative_humidity_pct: float
    wind_speed_mps: float
    wind_direction_deg: float
    pressure_hpa: float
    solar_loading_wpm2: float
    cn2: float


@dataclass(frozen=True)
class PlatformGeometry:
    """Per-segment effective sensor geometry (UAV telemetry)."""

    distance_m: float
    pitch_deg: float


@dataclass(frozen=True)
class FrameAnnotation:
    frame_index: int
    body_bbox: tuple[float, float, float, float]   # x, y, w, h px
    head_bbox: tuple[float, float, float, float]
    head_keypoints_3d: tuple[tuple[float, float, float], ...]
    occlusion: str = "none"
    identity_confirmed: bool = True
    source: str = "auto"


@dataclass(frozen=True)
class AnnotationSet:
    segment_id: str
    frames: tuple[FrameAnnotation, ...] = ()

    def frame_map(self) -> dict[int, FrameAnnotation]:
        return {f.frame_index: f for f in self.frames}


@dataclass(frozen=True)
class MediaSegment:
    segment_id: str
    subject_id: str
    activity: str
    clothing_set: int
    sensor_id: str
    start_ts: datetime
    end_ts: datetime
    payload_ref: str
    annotations: AnnotationSet = field(default_factory=lambda: AnnotationSet(""))
    environment: EnvironmentRecord | None = None
    geometry: PlatformGeometry | None = None

    def __post_init__(self) -> None:
        if self.end_ts <= self.start_ts:
            raise ValueError(f"{self.segment_id}: end_ts must follow start_ts")

    @property
    def duration_s(self) -> float:
        return (self.end_ts - self.start_ts).total_seconds()

    def with_environment(self, env: EnvironmentRecord) -> "MediaSegment":
        return replace(self, environment=env)

    def with_annotations(self, annotations: AnnotationSet) -> "MediaSegment":
        return replace(self, annotations=annotations)


@dataclass(frozen=True)
class SigSetEntry:
    entry_id: str
    media_refs: tuple[str, ...]
    subject_id: str | None = None    # gallery only; withheld on probe entries
    modality_hint: str = "all"


@dataclass(frozen=True)
class SigSet:
    sigset_id: str
    kind: str                        # gallery | probe
    entries: tuple[SigSetEntry, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("gallery", "probe"):
            raise ValueError(f"unknown sig-set kind {self.kind!r}")
        ids = [e.entry_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("entry ids must be unique")
        for entry in self.entries:
            if self.kind == "gallery":
                if entry.subject_id is None:
                    raise ValueError(f"gallery entry {entry.entry_id} lacks subject_id")
                if not entry.media_refs:
                    raise ValueError(f"gallery entry {entry.entry_id} has no media")
            else:
                if entry.subject_id is not None:
                    raise ValueError(f"probe entry {entry.entry_id} carries subject_id")
                if len(entry.media_refs) != 1:
                    raise ValueError(
                        f"probe entry {entry.entry_id} must reference exactly one segment"
                    )
