"""Deterministic synthetic collection-event generator.

Produces a full desk-scale corpus: subject roster with demographics, a
sensor suite spanning close-range, long-range, elevated, UAV and indoor
geometry, a per-minute weather/turbulence series, an activity schedule, and
one structured binary payload (BRF) per segment carrying exactly what a
detector/tracker chain would have produced: per-frame boxes, head pose, and
per-modality feature observations with quality scalars.

Every random draw is keyed by semantic identifiers, so corpus bytes are a
pure function of the config regardless of generation order.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .brf import BrfFrame, BrfPayload, Observation, write_brf
from .curation import (
    ActivityLog,
    ActivityRecord,
    RecordingWindow,
    Station,
    segment_by_timestamps,
)
from .model import (
    ACTIVITIES,
    GENDERS,
    WALKING_ACTIVITIES,
    AnnotationSet,
    EnvironmentRecord,
    FrameAnnotation,
    MediaSegment,
    PlatformGeometry,
    SensorRecord,
    SubjectRecord,
    truncate_to_minute,
)
from .pose import CANONICAL_HEAD_POINTS, rotation_from_angles
from .rng import keyed_rng, keyed_uniform_int
from .xmlio import (
    element_to_sensors,
    fmt_float,
    sensors_to_element,
    subjects_to_element,
    weather_to_element,
    write_document,
)

__all__ = [
    "ConfigurationError",
    "GeneratorConfig",
    "IdentityLatent",
    "Corpus",
    "default_sensor_suite",
    "focal_px",
    "head_pixel_height",
    "modality_quality",
    "observe",
    "render_segment_payload",
    "generate_event",
    "write_corpus",
    "generator_config_to_element",
    "element_to_generator_config",
]

# face quality saturates at this head height; body/gait at the body scale
FACE_PX_SCALE = 60.0
BODY_PX_SCALE = 120.0
QUALITY_FLOOR = 0.05

_INDOOR_ACTIVITIES: tuple[tuple[str, int], ...] = (("standing", 8), ("structured-walk", 8))
_FIELD_BASE_DURATION_S = {"standing": 10, "structured-walk": 10, "random-walk": 8, "phone-use": 6}
_ACTIVITY_GAP_S = 2
_INDOOR_PITCHES = (0.0, 15.0, 30.0, 45.0, 50.0)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 42
    n_subjects: int = 80
    distractor_fraction: float = 0.15
    sensor_suite: tuple[SensorRecord, ...] = ()
    cn2_range: tuple[float, float] = (2e-15, 3e-14)
    face_dim: int = 64
    body_dim: int = 64
    gait_dim: int = 32
    sigma0: float = 0.25
    head_size_m: float = 0.24
    body_size_m: float = 1.75
    frame_rate: float = 4.0
    field_activities: tuple[str, ...] = ACTIVITIES
    field_repeats: int = 1
    field_duration_jitter_s: int = 2
    occlusion_fraction: float = 0.03
    quarantine_fraction: float = 0.02
    face_framing_penalty: float = 0.7
    kappa_face: float = 4e11
    kappa_body: float = 6e10
    kappa_gait: float = 4e10
    collection_date: str = "2025-06-02"

    def __post_init__(self) -> None:
        if self.n_subjects < 2:
            raise ConfigurationError("n_subjects must be >= 2")
        if min(self.face_dim, self.body_dim, self.gait_dim) < 2:
            raise ConfigurationError("modality dims must be >= 2")
        if self.sigma0 < 0:
            raise ConfigurationError("sigma0 must be >= 0")
        if not self.sensor_suite:
            object.__setattr__(self, "sensor_suite", default_sensor_suite())
        object.__setattr__(
            self, "sensor_suite",
            tuple(sorted(self.sensor_suite, key=lambda s: s.sensor_id)))
        if not any(s.setting == "field" for s in self.sensor_suite):
            raise ConfigurationError("sensor suite has no probe-capable (field) sensors")
        if not any(s.setting == "indoor" for s in self.sensor_suite):
            raise ConfigurationError("sensor suite has no indoor (gallery) sensors")
        for activity in self.field_activities:
            if activity not in ACTIVITIES:
                raise ConfigurationError(f"unknown activity {activity!r}")

    def dim(self, modality: str) -> int:
        return {"face": self.face_dim, "body": self.body_dim, "gait": self.gait_dim}[modality]

    def kappa(self, modality: str) -> float:
        return {"face": self.kappa_face, "body": self.kappa_body, "gait": self.kappa_gait}[modality]


def default_sensor_suite() -> tuple[SensorRecord, ...]:
    """Sensor geometry spanning every mission band: close ground cameras at
    3.8-17.2 m, long-range at 300-500 m, an elevated mast in the 5.8-12.9 m
    band past 12 deg pitch, a UAV, and the indoor enrollment pair."""

    def mk(sensor_id, model, res, frange, focal, platform, setting, dist, pitch, conf):
        return SensorRecord(
            sensor_id=sensor_id, make="Auravis", model=model, serial=f"SN-{sensor_id}",
            resolution_px=res, focal_length_mm=frange, focal_mm=focal,
            platform=platform, setting=setting, distance_m=dist, pitch_deg=pitch,
            configuration=conf,
        )

    return (
        mk("indoor-face-01", "IF-2", (1920, 1080), (8.0, 50.0), 16.0,
           "ground", "indoor", 2.0, 0.0, "face-configured"),
        mk("indoor-wb-01", "IW-4", (1920, 1080), (4.0, 12.0), 8.0,
           "ground", "indoor", 3.0, 0.0, "wholebody-configured"),
        mk("ground-face-01", "GF-1", (1920, 1080), (8.0, 50.0), 12.0,
           "ground", "field", 3.8, 2.0, "face-configured"),
        mk("ground-wb-01", "GW-1", (1920, 1080), (2.8, 12.0), 4.0,
           "ground", "field", 3.8, 0.0, "wholebody-configured"),
        mk("ground-wb-02", "GW-2", (2560, 1440), (12.0, 60.0), 35.0,
           "ground", "field", 17.2, 1.0, "wholebody-configured"),
        mk("longrange-face-01", "LF-9", (4096, 2160), (80.0, 600.0), 240.0,
           "ground", "field", 300.0, 0.5, "face-configured"),
        mk("longrange-wb-01", "LW-7", (2048, 1080), (50.0, 400.0), 200.0,
           "ground", "field", 500.0, 0.3, "wholebody-configured"),
        mk("elevated-wb-01", "EW-3", (1920, 1080), (2.8, 12.0), 8.0,
           "elevated", "field", 8.5, 20.0, "wholebody-configured"),
        mk("uav-wb-01", "UW-5", (3840, 2160), (24.0, 120.0), 50.0,
           "uav", "field", 80.0, 25.0, "wholebody-configured"),
    )


@dataclass(frozen=True)
class IdentityLatent:
    subject_id: str
    mu: dict[str, np.ndarray]                 # modality -> unit vector
    clothing: dict[int, np.ndarray]           # clothing set -> latent (never observed)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def identity_latent(config: GeneratorConfig, subject_id: str) -> IdentityLatent:
    mu = {
        m: _unit(keyed_rng(config.seed, "identity", subject_id, m), config.dim(m))
        for m in ("face", "body", "gait")
    }
    clothing = {
        s: keyed_rng(config.seed, "clothing", subject_id, s).standard_normal(16)
        for s in (1, 2)
    }
    return IdentityLatent(subject_id=subject_id, mu=mu, clothing=clothing)


# ---------------------------------------------------------------------------
# optics and quality
# ---------------------------------------------------------------------------


def focal_px(sensor: SensorRecord) -> float:
    """Focal length in pixels under a 36 mm-equivalent sensor width."""
    return sensor.focal_mm * sensor.resolution_px[0] / 36.0


def head_pixel_height(sensor: SensorRecord, distance_m: float, head_size_m: float) -> float:
    """Pinhole head height in pixels; strictly decreasing in distance."""
    if distance_m <= 0:
        raise ValueError("distance_m must be positive")
    return focal_px(sensor) * head_size_m / distance_m


def modality_quality(
    config: GeneratorConfig,
    sensor: SensorRecord,
    modality: str,
    distance_m: float,
    cn2: float,
) -> float:
    """Quality in (0, 1]: pixel-scale term times turbulence attenuation.

    Face quality is keyed to head pixel height, body and gait to body pixel
    height.  Indoor sensors see no atmospheric path (cn2 treated as 0).
    """
    cn2_eff = cn2 if sensor.setting == "field" else 0.0
    if modality == "face":
        px = head_pixel_height(sensor, distance_m, config.head_size_m)
        base = min(max(px / FACE_PX_SCALE, QUALITY_FLOOR), 1.0)
    else:
        px = focal_px(sensor) * config.body_size_m / distance_m
        base = min(max(px / BODY_PX_SCALE, QUALITY_FLOOR), 1.0)
        if modality == "body" and sensor.configuration == "face-configured":
            base *= config.face_framing_penalty
    return base * math.exp(-config.kappa(modality) * cn2_eff * distance_m)


def observe(mu: np.ndarray, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    """One frame observation: unit-normalized mu plus isotropic noise."""
    if noise_scale == 0.0:
        return mu.copy()
    v = mu + noise_scale * rng.standard_normal(mu.shape[0])
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# the collection event
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Corpus:
    config: GeneratorConfig
    subjects: tuple[SubjectRecord, ...]
    sensors: tuple[SensorRecord, ...]
    activity_log: ActivityLog
    recordings: tuple[RecordingWindow, ...]
    weather: tuple[EnvironmentRecord, ...]
    payloads: dict[str, bytes]                      # segment_id -> BRF bytes
    auto_annotations: dict[str, AnnotationSet]
    manual_annotations: dict[str, AnnotationSet]
    segments: tuple[MediaSegment, ...]              # skeletons with geometry, no env

    def weather_by_minute(self) -> dict[datetime, EnvironmentRecord]:
        return {w.sample_minute: w for w in self.weather}

    def sensor_map(self) -> dict[str, SensorRecord]:
        return {s.sensor_id: s for s in self.sensors}


def _subject_roster(config: GeneratorConfig) -> tuple[SubjectRecord, ...]:
    n_distractors = int(round(config.n_subjects * config.distractor_fraction))
    subjects = []
    for i in range(config.n_subjects):
        sid = f"sub-{i + 1:04d}"
        rng = keyed_rng(config.seed, "demographics", sid)
        gender = GENDERS[int(rng.choice(3, p=[0.47, 0.47, 0.06]))]
        age = int(rng.integers(18, 76))
        height = int(np.clip(round(rng.normal(171, 9)), 150, 200))
        role = "distractor" if i >= config.n_subjects - n_distractors else "probe-subject"
        subjects.append(
            SubjectRecord(subject_id=sid, age_years=age, gender=gender,
                          height_cm=height, split="test", role=role)
        )
    return tuple(subjects)


def _field_durations(config: GeneratorConfig, subject_id: str) -> list[tuple[str, int]]:
    out = []
    for activity in config.field_activities:
        base = _FIELD_BASE_DURATION_S[activity]
        if config.field_duration_jitter_s > 0:
            j = config.field_duration_jitter_s
            base += keyed_uniform_int(2 * j + 1, config.seed, "duration", subject_id, activity) - j
        out.append((activity, int(min(15, max(5, base)))))
    return out


def _schedule(config: GeneratorConfig, subjects) -> tuple[ActivityLog, tuple[RecordingWindow, ...]]:
    day = datetime.strptime(config.collection_date, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    t0 = day.replace(hour=13)
    stations = (
        Station("indoor-1", "indoor", 1),
        Station("indoor-2", "indoor", 2),
        Station("field", "field", 1),
    )
    records: list[ActivityRecord] = []

    cursor = t0
    session_bounds = {}
    for station_id in ("indoor-1", "indoor-2"):
        session_start = cursor
        for subject in subjects:
            for activity, dur in _INDOOR_ACTIVITIES:
                records.append(ActivityRecord(subject.subject_id, activity, cursor,
                                              cursor + timedelta(seconds=dur), station_id))
                cursor += timedelta(seconds=dur + _ACTIVITY_GAP_S)
        session_bounds[station_id] = (session_start, cursor)
        cursor += timedelta(minutes=5)

    field_start = cursor
    for subject in subjects:
        if subject.role == "distractor":
            continue
        for _ in range(config.field_repeats):
            for activity, dur in _field_durations(config, subject.subject_id):
                records.append(ActivityRecord(subject.subject_id, activity, cursor,
                                              cursor + timedelta(seconds=dur), "field"))
                cursor += timedelta(seconds=dur + _ACTIVITY_GAP_S)
    session_bounds["field"] = (field_start, cursor)

    log = ActivityLog(stations=stations, records=tuple(records))
    recordings = []
    for sensor in config.sensor_suite:
        if sensor.setting == "indoor":
            for station_id in ("indoor-1", "indoor-2"):
                start, end = session_bounds[station_id]
                recordings.append(RecordingWindow(
                    f"rec--{sensor.sensor_id}--{station_id}", sensor.sensor_id,
                    station_id, start, end))
        else:
            start, end = session_bounds["field"]
            recordings.append(RecordingWindow(
                f"rec--{sensor.sensor_id}--field", sensor.sensor_id, "field", start, end))
    return log, tuple(recordings)


def _weather_series(config: GeneratorConfig, start: datetime, end: datetime):
    lo, hi = config.cn2_range
    first = truncate_to_minute(start) - timedelta(minutes=1)
    last = truncate_to_minute(end) + timedelta(minutes=1)
    minutes = []
    cursor = first
    while cursor <= last:
        minutes.append(cursor)
        cursor += timedelta(minutes=1)
    total = max(len(minutes) - 1, 1)
    series = []
    for i, minute in enumerate(minutes):
        rng = keyed_rng(config.seed, "weather", i)
        phase = i / total
        temp = 18.0 + 6.0 * math.sin(math.pi * phase) + float(rng.normal(0, 0.3))
        wind = max(0.0, 4.0 + 2.5 * math.sin(2 * math.pi * phase) + float(rng.normal(0, 0.5)))
        humidity = min(100.0, max(0.0, 55.0 - 10.0 * phase + float(rng.normal(0, 1.5))))
        if lo >= hi:
            cn2 = lo
        else:
            # log-space sweep from low to high turbulence across the day
            blend = 0.5 - 0.5 * math.cos(2 * math.pi * phase)
            log_cn2 = math.log(lo) + blend * (math.log(hi) - math.log(lo))
            cn2 = min(hi, max(lo, math.exp(log_cn2 + float(rng.normal(0, 0.08)))))
        series.append(EnvironmentRecord(
            sample_minute=minute,
            temperature_c=round(temp, 2),
            wind_chill_c=round(temp - 0.7 * wind, 2),
            heat_index_c=round(temp + 0.05 * humidity, 2),
            relative_humidity_pct=round(humidity, 2),
            wind_speed_mps=round(wind, 2),
            wind_direction_deg=round((140.0 + 80.0 * phase + float(rng.normal(0, 4))) % 360.0, 2),
            pressure_hpa=round(1013.0 - 2.0 * phase + float(rng.normal(0, 0.4)), 2),
            solar_loading_wpm2=round(max(0.0, 820.0 * math.sin(math.pi * min(1.0, 0.15 + 0.7 * phase))), 2),
            cn2=cn2,
        ))
    return tuple(series)


# ---------------------------------------------------------------------------
# per-segment rendering
# ---------------------------------------------------------------------------


def _f32(x: float) -> float:
    return float(np.float32(x))


def _wrap_deg(x: float) -> float:
    w = math.fmod(x + 180.0, 360.0)
    if w <= 0.0:
        w += 360.0
    return w - 180.0


def _head_yaw_track(config, segment, sensor, n_frames: int) -> np.ndarray:
    """Per-frame head yaw relative to the camera, degrees."""
    seed = config.seed
    sid = segment.segment_id
    camera_az = keyed_uniform_int(360, seed, "camera-azimuth", sensor.sensor_id)
    rng = keyed_rng(seed, "yaw-track", sid)
    t = np.arange(n_frames) / config.frame_rate

    if sensor.setting == "indoor" and segment.activity == "standing":
        # enrollment sweep: full rotation at 45 degree increments
        return np.array([_wrap_deg(45.0 * (i % 8)) for i in range(n_frames)])
    if segment.activity == "standing":
        facing = 45.0 * keyed_uniform_int(8, seed, "facing", sid)
        yaw = np.full(n_frames, facing - camera_az)
    elif segment.activity == "structured-walk":
        rate = (15.0 + 30.0 * rng.random()) * (1 if rng.random() < 0.5 else -1)
        yaw = (360.0 * rng.random() - camera_az) + rate * t
    elif segment.activity == "random-walk":
        steps = rng.normal(0.0, 25.0, n_frames)
        yaw = (360.0 * rng.random() - camera_az) + np.cumsum(steps)
    else:  # phone-use
        yaw = np.full(n_frames, 360.0 * rng.random() - camera_az) + rng.normal(0, 5.0, n_frames)
    return np.array([_wrap_deg(v) for v in yaw])


def _distance_profile(config, segment, sensor, n_frames: int) -> np.ndarray:
    if sensor.platform != "uav":
        return np.full(n_frames, sensor.distance_m)
    rng = keyed_rng(config.seed, "uav-path", segment.segment_id)
    base = 50.0 + 60.0 * rng.random()
    phase = 2 * math.pi * rng.random()
    t = np.arange(n_frames) / config.frame_rate
    duration = max(n_frames / config.frame_rate, 1.0)
    return base * (1.0 + 0.35 * np.sin(2 * math.pi * t / duration + phase))


def _pitch_profile(config, segment, sensor, n_frames: int) -> np.ndarray:
    rng = keyed_rng(config.seed, "pitch-track", segment.segment_id)
    if sensor.setting == "indoor" and segment.activity == "standing":
        pitch_cam = _INDOOR_PITCHES[keyed_uniform_int(len(_INDOOR_PITCHES), config.seed,
                                                      "indoor-pitch", segment.segment_id)]
        return np.full(n_frames, -pitch_cam) + rng.normal(0, 0.5, n_frames)
    if sensor.platform == "uav":
        t = np.arange(n_frames) / config.frame_rate
        duration = max(n_frames / config.frame_rate, 1.0)
        return -(20.0 + 8.0 * np.sin(2 * math.pi * t / duration)) + rng.normal(0, 1.0, n_frames)
    return np.full(n_frames, -sensor.pitch_deg) + rng.normal(0, 2.0, n_frames)


def render_segment_payload(
    config: GeneratorConfig,
    latent: IdentityLatent,
    sensor: SensorRecord,
    environment: EnvironmentRecord,
    segment: MediaSegment,
) -> BrfPayload:
    """Render one segment's payload from the observation model.

    Per frame, per modality: observation = normalize(mu + (sigma0/q) * eps).
    The eps values come from a counter-based stream keyed by
    (seed, subject, segment, modality); frame i reads block i of the
    counter sequence, so every frame's noise is fixed by its identifiers and
    output is independent of generation order.  Gait is emitted only for
    walking activities.
    """
    n_frames = max(1, int(segment.duration_s * config.frame_rate))
    res_w, res_h = sensor.resolution_px
    fpx = focal_px(sensor)

    yaw = _head_yaw_track(config, segment, sensor, n_frames)
    pitch = np.clip(_pitch_profile(config, segment, sensor, n_frames), -89.0, 89.0)
    roll = keyed_rng(config.seed, "roll-track", segment.segment_id).normal(0, 2.0, n_frames)
    distances = _distance_profile(config, segment, sensor, n_frames)

    walking = segment.activity in WALKING_ACTIVITIES
    modalities = ["face", "body"] + (["gait"] if walking else [])

    noise_rows: dict[str, np.ndarray] = {}
    if config.sigma0 > 0:
        for modality in modalities:
            stream = keyed_rng(config.seed, "observation", segment.subject_id,
                               segment.segment_id, modality)
            noise_rows[modality] = stream.standard_normal(
                (n_frames, config.dim(modality)))

    brng = keyed_rng(config.seed, "bbox", segment.segment_id)
    drift = float(brng.normal(0, 30.0)) if walking else 0.0
    x_jitter = float(brng.normal(0, 0.05))

    frames = []
    start_posix = segment.start_ts.timestamp()
    for i in range(n_frames):
        d = float(distances[i])
        head_px = head_pixel_height(sensor, d, config.head_size_m)
        body_px = fpx * config.body_size_m / d

        body_h = min(float(round(body_px)), res_h - 2.0)
        body_w = min(round(body_px * 0.35), res_w / 2.0)
        bx = (res_w - body_w) / 2.0 + x_jitter * res_w + drift * (i / config.frame_rate)
        bx = float(min(max(bx, 0.0), res_w - body_w))
        by = float(min(max((res_h - body_h) / 2.0, 0.0), res_h - body_h))
        head_h = float(round(head_px))
        head_w = round(head_px * 0.8)
        hx = float(min(max(bx + (body_w - head_w) / 2.0, bx), bx + body_w - head_w))
        hy = by + 0.02 * body_h

        observations = {}
        for modality in modalities:
            q = modality_quality(config, sensor, modality, d, environment.cn2)
            if config.sigma0 == 0:
                vec = latent.mu[modality].astype(np.float32)
            else:
                raw = latent.mu[modality] + (config.sigma0 / q) * noise_rows[modality][i]
                vec = (raw / np.linalg.norm(raw)).astype(np.float32)
            observations[modality] = Observation(vector=vec, quality=_f32(q))

        frames.append(BrfFrame(
            timestamp=start_posix + i / config.frame_rate,
            head_bbox=(_f32(hx), _f32(hy), _f32(head_w), _f32(head_h)),
            body_bbox=(_f32(bx), _f32(by), _f32(body_w), _f32(body_h)),
            yaw_deg=_f32(yaw[i]),
            pitch_deg=_f32(pitch[i]),
            roll_deg=_f32(roll[i]),
            observations=observations,
        ))
    return BrfPayload(segment_id=segment.segment_id, frame_rate=config.frame_rate,
                      frames=tuple(frames))


def _auto_annotations(config: GeneratorConfig, segment: MediaSegment, sensor: SensorRecord,
                      payload: BrfPayload) -> AnnotationSet:
    occlude_all = (
        sensor.setting == "field"
        and keyed_uniform_int(10_000, config.seed, "occlusion", segment.segment_id)
        < int(config.occlusion_fraction * 10_000)
    )
    partial_rolls = keyed_rng(config.seed, "occl-frames", segment.segment_id).integers(
        0, 100, len(payload.frames))
    frames = []
    for i, frame in enumerate(payload.frames):
        rot = rotation_from_angles(frame.yaw_deg, frame.pitch_deg, frame.roll_deg)
        keypoints = tuple(
            (float(p[0]), float(p[1]), float(p[2])) for p in CANONICAL_HEAD_POINTS @ rot.T
        )
        if occlude_all:
            occlusion = "full"
        else:
            occlusion = "partial" if partial_rolls[i] < 5 else "none"
        frames.append(FrameAnnotation(
            frame_index=i,
            body_bbox=frame.body_bbox,
            head_bbox=frame.head_bbox,
            head_keypoints_3d=keypoints,
            occlusion=occlusion,
            identity_confirmed=True,
            source="auto",
        ))
    return AnnotationSet(segment_id=segment.segment_id, frames=tuple(frames))


def _manual_annotations(config: GeneratorConfig, segment: MediaSegment, sensor: SensorRecord,
                        auto: AnnotationSet) -> AnnotationSet | None:
    """Sparse manual checks: identity confirmations, and occasional rejections
    that quarantine the segment."""
    if sensor.setting != "field":
        return None
    roll = keyed_uniform_int(10_000, config.seed, "manual", segment.segment_id)
    reject = roll < int(config.quarantine_fraction * 10_000)
    confirm = not reject and roll < int((config.quarantine_fraction + 0.05) * 10_000)
    if not (reject or confirm):
        return None
    first = auto.frames[0]
    manual = replace(first, identity_confirmed=not reject, source="manual")
    return AnnotationSet(segment_id=segment.segment_id, frames=(manual,))


def generate_event(config: GeneratorConfig) -> Corpus:
    """Generate the full collection event in memory.

    The corpus contains indoor enrollment segments (clothing set 2 among
    them) and field probe segments in clothing set 1; every non-distractor
    subject is observed by every field sensor, and every subject by the
    indoor sensors.  Output bytes are a pure function of the config.
    """
    subjects = _subject_roster(config)
    log, recordings = _schedule(config, subjects)
    weather = _weather_series(config, log.records[0].start_ts, log.records[-1].end_ts)
    by_minute = {w.sample_minute: w for w in weather}
    sensor_map = {s.sensor_id: s for s in config.sensor_suite}
    latents = {s.subject_id: identity_latent(config, s.subject_id) for s in subjects}

    payloads: dict[str, bytes] = {}
    autos: dict[str, AnnotationSet] = {}
    manuals: dict[str, AnnotationSet] = {}
    skeletons: list[MediaSegment] = []

    for recording in recordings:
        sensor = sensor_map[recording.sensor_id]
        for segment in segment_by_timestamps(recording, log):
            env = by_minute[truncate_to_minute(segment.start_ts)]
            payload = render_segment_payload(
                config, latents[segment.subject_id], sensor, env, segment)
            if sensor.platform == "uav":
                per_frame = _distance_profile(config, segment, sensor, len(payload.frames))
                pitches = _pitch_profile(config, segment, sensor, len(payload.frames))
                segment = replace(segment, geometry=PlatformGeometry(
                    distance_m=round(float(np.mean(per_frame)), 2),
                    pitch_deg=round(float(-np.mean(pitches)), 2),
                ))
            auto = _auto_annotations(config, segment, sensor, payload)
            manual = _manual_annotations(config, segment, sensor, auto)
            payloads[segment.segment_id] = write_brf(payload)
            autos[segment.segment_id] = auto
            if manual is not None:
                manuals[segment.segment_id] = manual
            skeletons.append(segment)

    return Corpus(
        config=config,
        subjects=subjects,
        sensors=tuple(config.sensor_suite),
        activity_log=log,
        recordings=recordings,
        weather=weather,
        payloads=payloads,
        auto_annotations=autos,
        manual_annotations=manuals,
        segments=tuple(sorted(skeletons, key=lambda s: s.segment_id)),
    )


# ---------------------------------------------------------------------------
# config and corpus persistence
# ---------------------------------------------------------------------------


def generator_config_to_element(config: GeneratorConfig) -> ET.Element:
    root = ET.Element("generator-config")
    root.set("seed", str(config.seed))
    root.set("n-subjects", str(config.n_subjects))
    root.set("distractor-fraction", fmt_float(config.distractor_fraction))
    root.set("cn2-lo", fmt_float(config.cn2_range[0]))
    root.set("cn2-hi", fmt_float(config.cn2_range[1]))
    root.set("face-dim", str(config.face_dim))
    root.set("body-dim", str(config.body_dim))
    root.set("gait-dim", str(config.gait_dim))
    root.set("sigma0", fmt_float(config.sigma0))
    root.set("head-size-m", fmt_float(config.head_size_m))
    root.set("body-size-m", fmt_float(config.body_size_m))
    root.set("frame-rate", fmt_float(config.frame_rate))
    root.set("field-activities", ",".join(config.field_activities))
    root.set("field-repeats", str(config.field_repeats))
    root.set("field-duration-jitter-s", str(config.field_duration_jitter_s))
    root.set("occlusion-fraction", fmt_float(config.occlusion_fraction))
    root.set("quarantine-fraction", fmt_float(config.quarantine_fraction))
    root.set("face-framing-penalty", fmt_float(config.face_framing_penalty))
    root.set("kappa-face", fmt_float(config.kappa_face))
    root.set("kappa-body", fmt_float(config.kappa_body))
    root.set("kappa-gait", fmt_float(config.kappa_gait))
    root.set("collection-date", config.collection_date)
    root.append(sensors_to_element(list(config.sensor_suite)))
    return root


def element_to_generator_config(root: ET.Element) -> GeneratorConfig:
    sensors = tuple(element_to_sensors(root.find("sensors")))
    return GeneratorConfig(
        seed=int(root.get("seed")),
        n_subjects=int(root.get("n-subjects")),
        distractor_fraction=float(root.get("distractor-fraction")),
        sensor_suite=sensors,
        cn2_range=(float(root.get("cn2-lo")), float(root.get("cn2-hi"))),
        face_dim=int(root.get("face-dim")),
        body_dim=int(root.get("body-dim")),
        gait_dim=int(root.get("gait-dim")),
        sigma0=float(root.get("sigma0")),
        head_size_m=float(root.get("head-size-m")),
        body_size_m=float(root.get("body-size-m")),
        frame_rate=float(root.get("frame-rate")),
        field_activities=tuple(root.get("field-activities").split(",")),
        field_repeats=int(root.get("field-repeats")),
        field_duration_jitter_s=int(root.get("field-duration-jitter-s")),
        occlusion_fraction=float(root.get("occlusion-fraction")),
        quarantine_fraction=float(root.get("quarantine-fraction")),
        face_framing_penalty=float(root.get("face-framing-penalty")),
        kappa_face=float(root.get("kappa-face")),
        kappa_body=float(root.get("kappa-body")),
        kappa_gait=float(root.get("kappa-gait")),
        collection_date=root.get("collection-date"),
    )


def write_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    """Write the raw collection event; bytes are canonical and deterministic."""
    from .curation import activity_log_to_element, recordings_to_element
    from .xmlio import annotations_to_element

    out = Path(out_dir)
    (out / "segments").mkdir(parents=True, exist_ok=True)
    (out / "annotations" / "auto").mkdir(parents=True, exist_ok=True)
    (out / "annotations" / "manual").mkdir(parents=True, exist_ok=True)

    (out / "generator-config.xml").write_bytes(
        write_document(generator_config_to_element(corpus.config)))
    (out / "subjects.xml").write_bytes(write_document(subjects_to_element(list(corpus.subjects))))
    (out / "sensors.xml").write_bytes(write_document(sensors_to_element(list(corpus.sensors))))
    (out / "activity_log.xml").write_bytes(
        write_document(activity_log_to_element(corpus.activity_log)))
    (out / "recordings.xml").write_bytes(
        write_document(recordings_to_element(list(corpus.recordings))))
    (out / "weather.xml").write_bytes(write_document(weather_to_element(list(corpus.weather))))

    overrides = [s for s in corpus.segments if s.geometry is not None]
    if overrides:
        geom_root = ET.Element("geometry-overrides")
        for segment in sorted(overrides, key=lambda s: s.segment_id):
            elem = ET.SubElement(geom_root, "segment")
            elem.set("id", segment.segment_id)
            elem.set("distance-m", fmt_float(segment.geometry.distance_m))
            elem.set("pitch-deg", fmt_float(segment.geometry.pitch_deg))
        (out / "geometry.xml").write_bytes(write_document(geom_root))

    for segment_id in sorted(corpus.payloads):
        (out / "segments" / f"{segment_id}.brf").write_bytes(corpus.payloads[segment_id])
    for segment_id in sorted(corpus.auto_annotations):
        (out / "annotations" / "auto" / f"{segment_id}.xml").write_bytes(
            write_document(annotations_to_element(corpus.auto_annotations[segment_id])))
    for segment_id in sorted(corpus.manual_annotations):
        (out / "annotations" / "manual" / f"{segment_id}.xml").write_bytes(
            write_document(annotations_to_element(corpus.manual_annotations[segment_id])))
