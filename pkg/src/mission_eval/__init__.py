"""Mission-based biometric test-and-evaluation harness over a synthetic corpus.

The library covers the full loop: deterministic corpus generation, curation
(segmentation, weather joins, train/test splitting, annotation merge),
probe/gallery partitioning by mission, black-box matcher invocation over a
length-prefixed wire protocol (or in-process), and ROC / TAR@FAR / CMC
reporting with score-level fusion.
"""

__version__ = "0.1.0"

from .brf import BrfFrame, BrfPayload, Observation, read_brf, write_brf
from .model import (
    AnnotationSet,
    EnvironmentRecord,
    FrameAnnotation,
    MediaSegment,
    PlatformGeometry,
    SensorRecord,
    SigSet,
    SigSetEntry,
    SubjectRecord,
)
from .pose import (
    CANONICAL_HEAD_POINTS,
    DegenerateInputError,
    PoseAngles,
    RigidTransform,
    kabsch_umeyama,
    pose_angles,
    rotation_from_angles,
)
from .metrics import CmcCurve, RocCurve, cmc, label_pairs, roc, tar_at_far
from .partition import (
    Mission,
    PartitionConfig,
    PartitionResult,
    Restriction,
    Treatment,
    assign_treatment,
    classify_restriction,
    facing_camera,
    mission_filter,
)
from .reference_hs import ReferenceHs, build_template, fuse, minmax_normalize, score
from .synthgen import (
    Corpus,
    GeneratorConfig,
    default_sensor_suite,
    generate_event,
    head_pixel_height,
    write_corpus,
)

__all__ = [
    "__version__",
    "AnnotationSet",
    "BrfFrame",
    "BrfPayload",
    "CANONICAL_HEAD_POINTS",
    "CmcCurve",
    "Corpus",
    "DegenerateInputError",
    "EnvironmentRecord",
    "FrameAnnotation",
    "GeneratorConfig",
    "MediaSegment",
    "Mission",
    "Observation",
    "PartitionConfig",
    "PartitionResult",
    "PlatformGeometry",
    "PoseAngles",
    "ReferenceHs",
    "Restriction",
    "RigidTransform",
    "RocCurve",
    "SensorRecord",
    "SigSet",
    "SigSetEntry",
    "SubjectRecord",
    "Treatment",
    "assign_treatment",
    "build_template",
    "classify_restriction",
    "cmc",
    "default_sensor_suite",
    "facing_camera",
    "fuse",
    "generate_event",
    "head_pixel_height",
    "kabsch_umeyama",
    "label_pairs",
    "minmax_normalize",
    "mission_filter",
    "pose_angles",
    "read_brf",
    "roc",
    "rotation_from_angles",
    "score",
    "tar_at_far",
    "write_brf",
    "write_corpus",
]
