"""Probe/gallery partitioning: pose gates, restriction and treatment
classification, mission membership, and sig-set construction.

All classification here is a pure function of a segment's stored metadata,
so every probe's mission memberships are re-derivable after the fact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    WALKING_ACTIVITIES,
    AnnotationSet,
    MediaSegment,
    SensorRecord,
    SigSet,
    SigSetEntry,
    SubjectRecord,
)
from .pose import CANONICAL_HEAD_POINTS, PoseAngles, kabsch_umeyama, pose_angles
from .rng import keyed_rng

log = logging.getLogger(__name__)

__all__ = [
    "Mission",
    "Restriction",
    "Treatment",
    "PartitionConfig",
    "ProbeClassification",
    "ProbeCandidate",
    "ProbeMeta",
    "PartitionResult",
    "recover_track_poses",
    "facing_camera",
    "classify_restriction",
    "classify_probe",
    "assign_treatment",
    "mission_filter",
    "effective_geometry",
    "build_gallery",
    "select_probes",
    "build_partition",
    "partition_truth_to_bytes",
    "partition_truth_from_bytes",
    "partition_manifest_to_bytes",
]


class Mission(Enum):
    EXPERIMENTAL_CONTROL = "experimental-control"
    CLOSE_RANGE_FACE = "close-range-face"
    CLOSE_RANGE_BODY = "close-range-body"
    LONG_RANGE_FACE = "long-range-face"
    LONG_RANGE_BODY = "long-range-body"
    UAV = "uav"
    TURBULENCE = "turbulence"
    ELEVATED = "elevated"
    GAIT = "gait"
    FACE_RESTRICTED = "face-restricted"


class Restriction(Enum):
    FACE_INCLUDED = "face-included"
    FACE_RESTRICTED = "face-restricted"


class Treatment(Enum):
    CONTROL = "control"
    TREATMENT = "treatment"


@dataclass(frozen=True)
class PartitionConfig:
    # boundary semantics: head height inclusive, facing endpoints inclusive,
    # control distance exclusive, elevated pitch exclusive
    min_face_height_px: float = 20.0
    facing_yaw_limit_deg: float = 110.0
    control_max_distance_m: float = 75.0
    control_max_pitch_deg: float = 12.0
    close_range_m: float = 3.8
    long_range_min_m: float = 250.0
    elevated_band_m: tuple[float, float] = (5.8, 12.9)
    control_band_m: tuple[float, float] = (3.8, 17.2)
    gait_min_m: float = 3.8
    turbulence_cn2_min: float = 1e-14
    probe_duration_s: tuple[float, float] = (5.0, 15.0)
    treatment_weight: float = 2.0
    control_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.treatment_weight <= self.control_weight:
            raise ValueError("treatment_weight must exceed control_weight")


@dataclass(frozen=True)
class ProbeClassification:
    restriction: Restriction
    treatment: Treatment
    missions: frozenset[Mission]


@dataclass(frozen=True)
class ProbeCandidate:
    segment: MediaSegment
    subject_id: str
    classification: ProbeClassification


def recover_track_poses(annotations: AnnotationSet) -> list[PoseAngles]:
    """Recover per-frame head pose by aligning the canonical head landmark
    set onto each frame's stored 3D keypoints."""
    poses = []
    for frame in annotations.frames:
        observed = np.asarray(frame.head_keypoints_3d, dtype=float)
        transform = kabsch_umeyama(CANONICAL_HEAD_POINTS, observed)
        poses.append(pose_angles(transform))
    return poses


def facing_camera(track: list[PoseAngles], cfg: PartitionConfig = PartitionConfig()) -> bool:
    """True iff the subject faces the camera on any frame (|yaw| within the
    limit, endpoints inclusive)."""
    if not track:
        return False
    return any(abs(p.yaw_deg) <= cfg.facing_yaw_limit_deg for p in track)


def classify_restriction(
    segment: MediaSegment,
    poses: list[PoseAngles] | None = None,
    cfg: PartitionConfig = PartitionConfig(),
) -> Restriction:
    """Face-included iff some frame has a detectable face: head bbox height
    at or above the minimum, facing yaw, and not fully occluded.  Missing
    head annotations mean the face is not visible."""
    frames = segment.annotations.frames
    if not frames:
        return Restriction.FACE_RESTRICTED
    if poses is None:
        poses = recover_track_poses(segment.annotations)
    for frame, pose in zip(frames, poses):
        height = frame.head_bbox[3]
        if (
            height >= cfg.min_face_height_px
            and abs(pose.yaw_deg) <= cfg.facing_yaw_limit_deg
            and frame.occlusion != "full"
        ):
            return Restriction.FACE_INCLUDED
    return Restriction.FACE_RESTRICTED


def effective_geometry(sensor: SensorRecord, segment: MediaSegment) -> tuple[float, float]:
    """(distance_m, pitch_deg) with any per-segment telemetry override."""
    if segment.geometry is not None:
        return segment.geometry.distance_m, segment.geometry.pitch_deg
    return sensor.distance_m, sensor.pitch_deg


def assign_treatment(
    sensor: SensorRecord,
    segment: MediaSegment,
    cfg: PartitionConfig = PartitionConfig(),
) -> Treatment:
    """Control iff a ground camera under the control distance at eye-level
    pitch; long-range, elevated, and UAV platforms are treatment."""
    distance, pitch = effective_geometry(sensor, segment)
    if (
        sensor.platform == "ground"
        and distance < cfg.control_max_distance_m
        and pitch <= cfg.control_max_pitch_deg
    ):
        return Treatment.CONTROL
    return Treatment.TREATMENT


def mission_filter(
    segment: MediaSegment,
    sensor: SensorRecord,
    restriction: Restriction,
    treatment: Treatment,
    cfg: PartitionConfig = PartitionConfig(),
) -> frozenset[Mission]:
    """Mission memberships for one classified probe; several may apply."""
    distance, pitch = effective_geometry(sensor, segment)
    cn2 = segment.environment.cn2 if segment.environment is not None else 0.0
    walking = segment.activity in WALKING_ACTIVITIES
    missions: set[Mission] = set()

    lo, hi = cfg.control_band_m
    if sensor.platform == "ground" and lo <= distance <= hi and pitch <= cfg.control_max_pitch_deg:
        missions.add(Mission.EXPERIMENTAL_CONTROL)
    if distance <= cfg.close_range_m and sensor.platform in ("ground", "elevated"):
        missions.add(Mission.CLOSE_RANGE_BODY)
        if sensor.configuration == "face-configured" and restriction is Restriction.FACE_INCLUDED:
            missions.add(Mission.CLOSE_RANGE_FACE)
    if distance > cfg.long_range_min_m:
        missions.add(Mission.LONG_RANGE_BODY)
        if sensor.configuration == "face-configured" and restriction is Restriction.FACE_INCLUDED:
            missions.add(Mission.LONG_RANGE_FACE)
        if cn2 >= cfg.turbulence_cn2_min:
            missions.add(Mission.TURBULENCE)
    if sensor.platform == "uav":
        missions.add(Mission.UAV)
    elo, ehi = cfg.elevated_band_m
    if elo <= distance <= ehi and pitch > cfg.control_max_pitch_deg:
        missions.add(Mission.ELEVATED)
    if walking and distance >= cfg.gait_min_m:
        missions.add(Mission.GAIT)
    if restriction is Restriction.FACE_RESTRICTED and treatment is Treatment.TREATMENT:
        missions.add(Mission.FACE_RESTRICTED)
    return frozenset(missions)


def classify_probe(
    segment: MediaSegment,
    sensor: SensorRecord,
    cfg: PartitionConfig = PartitionConfig(),
) -> ProbeClassification:
    restriction = classify_restriction(segment, cfg=cfg)
    treatment = assign_treatment(sensor, segment, cfg=cfg)
    missions = mission_filter(segment, sensor, restriction, treatment, cfg=cfg)
    return ProbeClassification(restriction=restriction, treatment=treatment, missions=missions)


# ---------------------------------------------------------------------------
# sig-set construction
# ---------------------------------------------------------------------------


def build_gallery(
    subjects: list[SubjectRecord],
    segments: list[MediaSegment],
    sensors: dict[str, SensorRecord],
    gallery_clothing_set: int = 2,
) -> tuple[SigSet, list[str]]:
    """One gallery entry per subject aggregating controlled (indoor) media in
    the gallery clothing set; distractor subjects included.  Subjects with no
    controlled media are excluded with a warning."""
    by_subject: dict[str, list[str]] = {}
    for segment in segments:
        sensor = sensors[segment.sensor_id]
        if sensor.setting == "indoor" and segment.clothing_set == gallery_clothing_set:
            by_subject.setdefault(segment.subject_id, []).append(segment.segment_id)

    entries = []
    warnings = []
    for subject in sorted(subjects, key=lambda s: s.subject_id):
        media = sorted(by_subject.get(subject.subject_id, []))
        if not media:
            message = f"subject {subject.subject_id} has no controlled media; excluded"
            warnings.append(message)
            log.warning(message)
            continue
        entries.append(SigSetEntry(
            entry_id=f"g--{subject.subject_id}",
            media_refs=tuple(media),
            subject_id=subject.subject_id,
        ))
    return SigSet(sigset_id="gallery", kind="gallery", entries=tuple(entries)), warnings


def select_probes(
    candidates: list[ProbeCandidate],
    cfg: PartitionConfig = PartitionConfig(),
    caps: dict[Mission, int] | None = None,
    seed: int = 0,
) -> tuple[SigSet, dict[Mission, list[str]]]:
    """Seeded weighted probe selection without replacement.

    Treatment probes carry more weight than control probes.  Subjects are
    balanced where possible: within a mission, no subject receives its
    (m+1)-th probe until every subject with candidates left has m.  Within
    a balancing round, draws are weighted without replacement.  Selection
    runs per mission up to the mission's cap; the union forms the probe
    sig-set.  Returns the sig-set plus per-mission selected segment ids.
    """
    caps = caps or {}
    selected: set[str] = set()
    per_mission: dict[Mission, list[str]] = {m: [] for m in Mission}

    for mission in sorted(Mission, key=lambda m: m.value):
        pool = sorted(
            (c for c in candidates if mission in c.classification.missions),
            key=lambda c: c.segment.segment_id,
        )
        if not pool:
            log.info("mission %s: empty candidate pool", mission.value)
            continue
        cap = caps.get(mission, len(pool))
        rng = keyed_rng(seed, "probe-selection", mission.value)
        remaining = list(pool)
        counts: dict[str, int] = {}
        picked: list[ProbeCandidate] = []
        while remaining and len(picked) < cap:
            floor = min(counts.get(c.subject_id, 0) for c in remaining)
            eligible = [i for i, c in enumerate(remaining)
                        if counts.get(c.subject_id, 0) == floor]
            weights = [
                cfg.treatment_weight
                if remaining[i].classification.treatment is Treatment.TREATMENT
                else cfg.control_weight
                for i in eligible
            ]
            total = sum(weights)
            idx = eligible[int(rng.choice(len(eligible),
                                          p=[w / total for w in weights]))]
            choice = remaining.pop(idx)
            picked.append(choice)
            counts[choice.subject_id] = counts.get(choice.subject_id, 0) + 1
            selected.add(choice.segment.segment_id)
        per_mission[mission] = sorted(c.segment.segment_id for c in picked)

    entries = tuple(
        SigSetEntry(entry_id=f"p--{segment_id}", media_refs=(segment_id,))
        for segment_id in sorted(selected)
    )
    return SigSet(sigset_id="probes", kind="probe", entries=entries), per_mission


# ---------------------------------------------------------------------------
# partition result
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeMeta:
    """Harness-side ground truth and classification for one selected probe."""

    entry_id: str
    segment_id: str
    subject_id: str
    restriction: Restriction
    treatment: Treatment
    missions: frozenset[Mission]
    sensor_id: str
    activity: str


@dataclass(frozen=True)
class PartitionResult:
    gallery: SigSet
    probes: SigSet
    probe_meta: dict[str, ProbeMeta]          # probe entry id -> meta
    gallery_truth: dict[str, str]             # gallery entry id -> subject
    gallery_warnings: tuple[str, ...] = ()

    def probe_truth(self) -> dict[str, str]:
        return {e: m.subject_id for e, m in self.probe_meta.items()}

    def mission_probes(self, mission: Mission) -> list[str]:
        return sorted(e for e, m in self.probe_meta.items() if mission in m.missions)

    def cell_probes(self, mission: Mission, restriction: Restriction | None,
                    treatment: Treatment | None) -> list[str]:
        out = []
        for entry_id, meta in self.probe_meta.items():
            if mission not in meta.missions:
                continue
            if restriction is not None and meta.restriction is not restriction:
                continue
            if treatment is not None and meta.treatment is not treatment:
                continue
            out.append(entry_id)
        return sorted(out)

    def mission_counts(self, mission: Mission) -> tuple[int, int]:
        """(subjects, samples) in Table form for one mission."""
        entries = self.mission_probes(mission)
        subjects = {self.probe_meta[e].subject_id for e in entries}
        return len(subjects), len(entries)


def build_partition(
    probe_candidates: list[ProbeCandidate],
    subjects: list[SubjectRecord],
    segments: list[MediaSegment],
    sensors: dict[str, SensorRecord],
    cfg: PartitionConfig = PartitionConfig(),
    caps: dict[Mission, int] | None = None,
    seed: int = 0,
) -> PartitionResult:
    """Select probes, build the gallery sig-set, keep classification truth."""
    gallery, warnings = build_gallery(subjects, segments, sensors)
    probe_sigset, _per_mission = select_probes(probe_candidates, cfg=cfg, caps=caps, seed=seed)
    by_segment = {c.segment.segment_id: c for c in probe_candidates}
    probe_meta = {}
    for entry in probe_sigset.entries:
        candidate = by_segment[entry.media_refs[0]]
        probe_meta[entry.entry_id] = ProbeMeta(
            entry_id=entry.entry_id,
            segment_id=candidate.segment.segment_id,
            subject_id=candidate.subject_id,
            restriction=candidate.classification.restriction,
            treatment=candidate.classification.treatment,
            missions=candidate.classification.missions,
            sensor_id=candidate.segment.sensor_id,
            activity=candidate.segment.activity,
        )
    gallery_truth = {entry.entry_id: entry.subject_id for entry in gallery.entries}
    return PartitionResult(
        gallery=gallery,
        probes=probe_sigset,
        probe_meta=probe_meta,
        gallery_truth=gallery_truth,
        gallery_warnings=tuple(warnings),
    )


def partition_truth_to_bytes(result: PartitionResult) -> bytes:
    """Harness-side truth document (never streamed to an HS)."""
    import xml.etree.ElementTree as ET

    from .xmlio import write_document

    root = ET.Element("partition-truth")
    for entry_id in sorted(result.probe_meta):
        meta = result.probe_meta[entry_id]
        elem = ET.SubElement(root, "probe")
        elem.set("entry", entry_id)
        elem.set("segment", meta.segment_id)
        elem.set("subject", meta.subject_id)
        elem.set("restriction", meta.restriction.value)
        elem.set("treatment", meta.treatment.value)
        elem.set("missions", ",".join(sorted(m.value for m in meta.missions)))
        elem.set("sensor", meta.sensor_id)
        elem.set("activity", meta.activity)
    for entry_id in sorted(result.gallery_truth):
        elem = ET.SubElement(root, "gallery")
        elem.set("entry", entry_id)
        elem.set("subject", result.gallery_truth[entry_id])
    return write_document(root)


def partition_truth_from_bytes(data: bytes, gallery: SigSet, probes: SigSet,
                               warnings: tuple[str, ...] = ()) -> PartitionResult:
    from .xmlio import parse_xml

    root = parse_xml(data)
    probe_meta = {}
    for elem in root.findall("probe"):
        missions = frozenset(
            Mission(v) for v in elem.get("missions").split(",") if v)
        probe_meta[elem.get("entry")] = ProbeMeta(
            entry_id=elem.get("entry"),
            segment_id=elem.get("segment"),
            subject_id=elem.get("subject"),
            restriction=Restriction(elem.get("restriction")),
            treatment=Treatment(elem.get("treatment")),
            missions=missions,
            sensor_id=elem.get("sensor"),
            activity=elem.get("activity"),
        )
    gallery_truth = {e.get("entry"): e.get("subject") for e in root.findall("gallery")}
    return PartitionResult(gallery=gallery, probes=probes, probe_meta=probe_meta,
                           gallery_truth=gallery_truth, gallery_warnings=warnings)


def partition_manifest_to_bytes(result: PartitionResult) -> bytes:
    """Counts per mission and per (restriction, treatment) cell."""
    import xml.etree.ElementTree as ET

    from .xmlio import write_document

    root = ET.Element("partition-manifest")
    root.set("gallery-entries", str(len(result.gallery.entries)))
    root.set("probe-entries", str(len(result.probes.entries)))
    for mission in sorted(Mission, key=lambda m: m.value):
        subjects, samples = result.mission_counts(mission)
        m_elem = ET.SubElement(root, "mission")
        m_elem.set("id", mission.value)
        m_elem.set("subjects", str(subjects))
        m_elem.set("samples", str(samples))
        m_elem.set("table-form", f"{subjects}/{samples}")
        for restriction in Restriction:
            for treatment in Treatment:
                entries = result.cell_probes(mission, restriction, treatment)
                cell_subjects = {result.probe_meta[e].subject_id for e in entries}
                cell = ET.SubElement(m_elem, "cell")
                cell.set("restriction", restriction.value)
                cell.set("treatment", treatment.value)
                cell.set("subjects", str(len(cell_subjects)))
                cell.set("samples", str(len(entries)))
    return write_document(root)
