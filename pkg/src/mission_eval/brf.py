"""BRF: the binary recording format standing in for video payloads.

Layout (all little-endian, vectors 32-bit floats, lengths u32-prefixed):

    magic       4 bytes  "SYNB"
    version     u16
    segment_id  u32 length + UTF-8 bytes
    frame_count u32
    frame_rate  f32
    frames      frame_count records:
        timestamp   f64  POSIX seconds, UTC
        head_bbox   4 x f32  (x, y, w, h)
        body_bbox   4 x f32
        yaw, pitch, roll  3 x f32  degrees, head relative to camera
        n_modalities u32, then per modality in ascending code order:
            code     u8   (1 face, 2 body, 4 gait)
            length   u32
            vector   length x f32
            quality  f32  in (0, 1]
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BRF_MAGIC",
    "BRF_VERSION",
    "MODALITY_CODES",
    "MODALITY_NAMES",
    "BrfError",
    "Observation",
    "BrfFrame",
    "BrfPayload",
    "write_brf",
    "read_brf",
]

BRF_MAGIC = b"SYNB"
BRF_VERSION = 1

MODALITY_CODES = {"face": 1, "body": 2, "gait": 4}
MODALITY_NAMES = {code: name for name, code in MODALITY_CODES.items()}


class BrfError(ValueError):
    """Malformed or truncated BRF payload."""


@dataclass(frozen=True)
class Observation:
    vector: np.ndarray   # float32, unit norm
    quality: float       # (0, 1]


@dataclass(frozen=True)
class BrfFrame:
    timestamp: float
    head_bbox: tuple[float, float, float, float]
    body_bbox: tuple[float, float, float, float]
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    observations: dict[str, Observation]   # keyed by modality name


@dataclass(frozen=True)
class BrfPayload:
    segment_id: str
    frame_rate: float
    frames: tuple[BrfFrame, ...]


def write_brf(payload: BrfPayload) -> bytes:
    if not payload.frames:
        raise BrfError("payload needs at least one frame")
    out = io.BytesIO()
    out.write(BRF_MAGIC)
    out.write(struct.pack("<H", BRF_VERSION))
    seg = payload.segment_id.encode("utf-8")
    out.write(struct.pack("<I", len(seg)))
    out.write(seg)
    out.write(struct.pack("<I", len(payload.frames)))
    out.write(struct.pack("<f", payload.frame_rate))
    for frame in payload.frames:
        out.write(struct.pack("<d", frame.timestamp))
        out.write(struct.pack("<4f", *frame.head_bbox))
        out.write(struct.pack("<4f", *frame.body_bbox))
        out.write(struct.pack("<3f", frame.yaw_deg, frame.pitch_deg, frame.roll_deg))
        codes = sorted(MODALITY_CODES[name] for name in frame.observations)
        out.write(struct.pack("<I", len(codes)))
        for code in codes:
            obs = frame.observations[MODALITY_NAMES[code]]
            vec = np.asarray(obs.vector, dtype="<f4")
            out.write(struct.pack("<B", code))
            out.write(struct.pack("<I", vec.shape[0]))
            out.write(vec.tobytes())
            out.write(struct.pack("<f", obs.quality))
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BrfError("truncated payload")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_brf(data: bytes) -> BrfPayload:
    r = _Reader(data)
    if r.take(4) != BRF_MAGIC:
        raise BrfError("bad magic")
    (version,) = r.unpack("<H")
    if version != BRF_VERSION:
        raise BrfError(f"unsupported version {version}")
    (id_len,) = r.unpack("<I")
    segment_id = r.take(id_len).decode("utf-8")
    (frame_count,) = r.unpack("<I")
    if frame_count < 1:
        raise BrfError("frame_count must be >= 1")
    (frame_rate,) = r.unpack("<f")

    frames = []
    for _ in range(frame_count):
        (timestamp,) = r.unpack("<d")
        head_bbox = r.unpack("<4f")
        body_bbox = r.unpack("<4f")
        yaw, pitch, roll = r.unpack("<3f")
        (n_mod,) = r.unpack("<I")
        observations: dict[str, Observation] = {}
        for _ in range(n_mod):
            (code,) = r.unpack("<B")
            name = MODALITY_NAMES.get(code)
            if name is None:
                raise BrfError(f"unknown modality code {code}")
            (length,) = r.unpack("<I")
            vector = np.frombuffer(r.take(4 * length), dtype="<f4").copy()
            (quality,) = r.unpack("<f")
            if not 0.0 < quality <= 1.0:
                raise BrfError(f"quality {quality} outside (0, 1]")
            observations[name] = Observation(vector=vector, quality=quality)
        frames.append(
            BrfFrame(
                timestamp=timestamp,
                head_bbox=head_bbox,
                body_bbox=body_bbox,
                yaw_deg=yaw,
                pitch_deg=pitch,
                roll_deg=roll,
                observations=observations,
            )
        )
    if r.pos != len(data):
        raise BrfError(f"{len(data) - r.pos} trailing bytes")
    return BrfPayload(segment_id=segment_id, frame_rate=frame_rate, frames=tuple(frames))
