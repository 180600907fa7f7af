"""HS protocol conformance checking and golden transcript generation.

Two levels:

* structural checks run against any HS over a live session (handles treated
  as opaque, scores checked against the reference math within tolerance);
* golden transcripts capture the exact byte exchange of the reference HS on
  a fixed scripted session, for bit-level conformance of reimplementations
  that adopt the reference handle scheme.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

from . import protocol
from .brf import BrfFrame, BrfPayload, Observation, write_brf
from .harness import HsEntryError, open_wire_session
from .reference_hs import ReferenceHs
from .rng import keyed_rng

__all__ = [
    "CheckResult",
    "conformance_media",
    "run_structural_checks",
    "golden_transcript",
    "protocol_check",
]

SCORE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        suffix = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}{suffix}"


def conformance_media(subject: int, n_frames: int = 6, segment_id: str | None = None) -> bytes:
    """Deterministic tiny BRF payload for protocol exercises."""
    rng = keyed_rng(7, "conformance", subject)
    frames = []
    for i in range(n_frames):
        observations = {}
        for modality, dim in (("face", 8), ("body", 8), ("gait", 4)):
            v = rng.standard_normal(dim)
            v = (v / (v * v).sum() ** 0.5).astype("float32")
            observations[modality] = Observation(vector=v, quality=0.5 + 0.05 * (i % 3))
        frames.append(BrfFrame(
            timestamp=1000.0 + i * 0.25,
            head_bbox=(10.0, 10.0, 16.0, 20.0),
            body_bbox=(0.0, 0.0, 60.0, 160.0),
            yaw_deg=5.0 * i, pitch_deg=-3.0, roll_deg=0.5,
            observations=observations,
        ))
    return write_brf(BrfPayload(
        segment_id=segment_id or f"conf-seg-{subject:03d}",
        frame_rate=4.0,
        frames=tuple(frames),
    ))


def _expected_scores() -> tuple[list[float | None], list[float | None]]:
    """Reference-math scores for the scripted session (face and fusion)."""
    hs = ReferenceHs()
    g1 = hs.ingest("g-1", "gallery", b"", [conformance_media(1)])
    g2 = hs.ingest("g-2", "gallery", b"", [conformance_media(2)])
    p1 = hs.ingest("p-1", "probe", b"", [conformance_media(1, segment_id="probe-seg")])
    return hs.verify(p1, [g1, g2], "face"), hs.verify(p1, [g1, g2], "fusion")


def run_structural_checks(hs_spec: str) -> list[CheckResult]:
    """Scripted conformance run against a live HS; returns per-check results."""
    results: list[CheckResult] = []

    def check(name: str, passed: bool, detail: str = "") -> None:
        results.append(CheckResult(name, passed, detail))

    session = open_wire_session(hs_spec)
    try:
        supported = session.hello({"face", "body", "gait", "fusion"})
        check("hello negotiates modes", bool(supported), f"modes={sorted(supported)}")

        session.configure(b'<?xml version="1.0" encoding="UTF-8"?>\n<constraint-profile/>\n')
        check("config acknowledged", True)

        g1 = session.ingest("g-1", "gallery", b"", [conformance_media(1)])
        g2 = session.ingest("g-2", "gallery", b"", [conformance_media(2)])
        check("gallery enrollment yields handles", bool(g1) and bool(g2) and g1 != g2)

        p1 = session.ingest("p-1", "probe", b"",
                            [conformance_media(1, segment_id="probe-seg")])
        check("probe ingest yields handle", bool(p1))

        face, fusion = _expected_scores()
        got_face = session.verify(p1, [g1, g2], "face")
        ok = len(got_face) == 2 and all(
            a is not None and b is not None and abs(a - b) <= SCORE_TOLERANCE
            for a, b in zip(got_face, face))
        check("verify face matches reference within 1e-6", ok, f"scores={got_face}")

        got_fusion = session.verify(p1, [g1, g2], "fusion")
        ok = len(got_fusion) == 2 and all(
            a is not None and b is not None and abs(a - b) <= SCORE_TOLERANCE
            for a, b in zip(got_fusion, fusion))
        check("verify fusion matches reference within 1e-6", ok, f"scores={got_fusion}")

        ranked = session.search(p1, 2, "face")
        ok = (len(ranked) == 2 and ranked[0][1] >= ranked[1][1])
        check("search returns descending top-k", ok, f"ranked={ranked}")

        try:
            session.ingest("bad-media", "probe", b"", [b"XXXX not a payload"])
            check("corrupt media rejected with ERROR", False, "no error raised")
        except HsEntryError as exc:
            check("corrupt media rejected with ERROR", "3" in str(exc).split(":")[0]
                  or "error" in str(exc).lower(), str(exc))

        # session must survive the error and keep serving
        got_face_again = session.verify(p1, [g1, g2], "face")
        check("session continues after media error",
              got_face_again == got_face)
    finally:
        session.close()
    return results


def protocol_check(hs_spec: str) -> tuple[bool, list[CheckResult]]:
    results = run_structural_checks(hs_spec)
    return all(r.passed for r in results), results


# ---------------------------------------------------------------------------
# golden transcripts
# ---------------------------------------------------------------------------


def _scripted_frames() -> list[tuple[int, bytes]]:
    profile = b'<?xml version="1.0" encoding="UTF-8"?>\n<constraint-profile/>\n'
    frames: list[tuple[int, bytes]] = [
        (protocol.MSG_HELLO,
         protocol.encode_hello(protocol.PROTOCOL_VERSION,
                               {"face", "body", "gait", "fusion"})),
        (protocol.MSG_CONFIG, profile),
    ]
    for subject, entry in ((1, "g-1"), (2, "g-2")):
        frames.append((protocol.MSG_MEDIA_BEGIN,
                       protocol.encode_media_begin(entry, "gallery", b"")))
        frames.append((protocol.MSG_MEDIA_CHUNK, conformance_media(subject)))
        frames.append((protocol.MSG_MEDIA_END, b""))
    frames.append((protocol.MSG_MEDIA_BEGIN,
                   protocol.encode_media_begin("p-1", "probe", b"")))
    frames.append((protocol.MSG_MEDIA_CHUNK,
                   conformance_media(1, segment_id="probe-seg")))
    frames.append((protocol.MSG_MEDIA_END, b""))
    for mode in ("face", "body", "gait", "fusion"):
        frames.append((protocol.MSG_VERIFY,
                       protocol.encode_verify("P000001", ["G000001", "G000002"], mode)))
    frames.append((protocol.MSG_SEARCH, protocol.encode_search("P000001", 2, "fusion")))
    frames.append((protocol.MSG_MEDIA_BEGIN,
                   protocol.encode_media_begin("bad", "probe", b"")))
    frames.append((protocol.MSG_MEDIA_CHUNK, b"XXXXcorrupt"))
    frames.append((protocol.MSG_MEDIA_END, b""))
    frames.append((protocol.MSG_VERIFY,
                   protocol.encode_verify("P000001", ["G000001"], "face")))
    return frames


def golden_transcript() -> tuple[bytes, bytes]:
    """(harness->HS bytes, expected HS->harness bytes) for the scripted
    session, assuming the reference handle scheme (G/P + 6 digits)."""
    out_stream = io.BytesIO()
    for msg_type, payload in _scripted_frames():
        out_stream.write(struct.pack("<I", 1 + len(payload)))
        out_stream.write(bytes([msg_type]))
        out_stream.write(payload)
    request_bytes = out_stream.getvalue()

    hs = ReferenceHs()
    response_stream = io.BytesIO()
    status = protocol.serve_stream(hs, io.BytesIO(request_bytes), response_stream)
    if status != 0:
        raise RuntimeError("reference HS failed the scripted session")
    return request_bytes, response_stream.getvalue()
