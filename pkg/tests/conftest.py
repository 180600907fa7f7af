"""Shared fixtures: a small generated corpus run through the full pipeline."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from mission_eval.model import (
    AnnotationSet,
    EnvironmentRecord,
    FrameAnnotation,
    MediaSegment,
)
from mission_eval.pipeline import stage_curate, stage_generate, stage_partition
from mission_eval.pose import CANONICAL_HEAD_POINTS, rotation_from_angles
from mission_eval.synthgen import GeneratorConfig


def ts(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def make_environment(start="2025-06-02T13:03:00Z", cn2=5e-15) -> EnvironmentRecord:
    return EnvironmentRecord(
        sample_minute=ts(start),
        temperature_c=21.5,
        wind_chill_c=19.0,
        heat_index_c=23.0,
        relative_humidity_pct=55.0,
        wind_speed_mps=3.2,
        wind_direction_deg=180.0,
        pressure_hpa=1012.0,
        solar_loading_wpm2=640.0,
        cn2=cn2,
    )


def make_frame(index=0, head_h=30.0, yaw=0.0, pitch=0.0, roll=0.0,
               occlusion="none", identity_confirmed=True, source="auto"):
    rot = rotation_from_angles(yaw, pitch, roll)
    keypoints = tuple(tuple(float(v) for v in p) for p in CANONICAL_HEAD_POINTS @ rot.T)
    head_w = head_h * 0.8
    return FrameAnnotation(
        frame_index=index,
        body_bbox=(400.0, 100.0, 200.0, 700.0),
        head_bbox=(480.0, 110.0, head_w, head_h),
        head_keypoints_3d=keypoints,
        occlusion=occlusion,
        identity_confirmed=identity_confirmed,
        source=source,
    )


def make_segment(segment_id="seg--cam-a--0123456789ab", subject="sub-0001",
                 activity="standing", clothing=1, sensor="cam-a",
                 start="2025-06-02T13:03:45Z", duration=8,
                 frames=None, environment=None, geometry=None) -> MediaSegment:
    start_dt = ts(start)
    if frames is None:
        frames = (make_frame(0), make_frame(1))
    return MediaSegment(
        segment_id=segment_id,
        subject_id=subject,
        activity=activity,
        clothing_set=clothing,
        sensor_id=sensor,
        start_ts=start_dt,
        end_ts=start_dt + timedelta(seconds=duration),
        payload_ref=f"segments/{segment_id}.brf",
        annotations=AnnotationSet(segment_id, tuple(frames)),
        environment=environment or make_environment(start[:17] + "00Z"),
        geometry=geometry,
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> Path:
    """Generated + curated + partitioned corpus shared across tests."""
    corpus = tmp_path_factory.mktemp("corpus")
    config = GeneratorConfig(seed=42, n_subjects=8, distractor_fraction=0.25)
    stage_generate(config, corpus)
    stage_curate(corpus, seed=42)
    stage_partition(corpus, seed=42)
    return corpus
