"""Sig-set driven HS orchestration: constraint engine, sessions, scoring.

The harness streams sig-set media to a holistic solution through a
constraint profile (which controls exactly which metadata fields the HS may
see and how media is reformatted), then collects verification and search
results into a ScoreMatrix keyed by (probe entry, gallery entry, mode) so
aggregation is independent of processing order.

A failed enrollment or probe ingest never aborts the evaluation: the entry
is tallied and, per the failure policy, a failed probe counts as a rejection
at every threshold downstream.
"""

from __future__ import annotations

import logging
import shlex
import socket
import subprocess
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable

from . import protocol
from .brf import BrfPayload, read_brf, write_brf
from .model import MediaSegment, SensorRecord, SigSet, format_ts
from .protocol import PROTOCOL_VERSION
from .xmlio import fmt_float, parse_xml, write_document

log = logging.getLogger(__name__)

__all__ = [
    "SessionRefused",
    "HsEntryError",
    "ConstraintProfile",
    "default_profile",
    "profile_to_bytes",
    "profile_from_bytes",
    "constrained_metadata",
    "reformat_media",
    "TemplateHandle",
    "ProbeEntry",
    "ScoreRecord",
    "ScoreMatrix",
    "Capabilities",
    "InProcessSession",
    "WireSession",
    "open_wire_session",
    "negotiate",
    "enroll",
    "probe_ingest",
    "verify",
    "search",
    "MAX_IN_FLIGHT",
]

# negotiated in-flight window; this client issues requests serially, which
# always respects the window and tolerates single-threaded solutions
MAX_IN_FLIGHT = 4

MEDIA_REFORMATS = ("none", "downsample-frames", "strip-annotations")


class SessionRefused(RuntimeError):
    pass


class HsEntryError(RuntimeError):
    """Per-entry HS failure (enrollment or ingest)."""


# ---------------------------------------------------------------------------
# constraint profiles
# ---------------------------------------------------------------------------

_FIELD_EXTRACTORS: dict[str, Callable[[MediaSegment, SensorRecord], str]] = {
    "sensor.make": lambda seg, sen: sen.make,
    "sensor.model": lambda seg, sen: sen.model,
    "sensor.serial": lambda seg, sen: sen.serial,
    "sensor.resolution": lambda seg, sen: f"{sen.resolution_px[0]}x{sen.resolution_px[1]}",
    "sensor.focal-mm": lambda seg, sen: fmt_float(sen.focal_mm),
    "sensor.platform": lambda seg, sen: sen.platform,
    "sensor.configuration": lambda seg, sen: sen.configuration,
    "sensor.distance-m": lambda seg, sen: fmt_float(
        seg.geometry.distance_m if seg.geometry else sen.distance_m),
    "sensor.pitch-deg": lambda seg, sen: fmt_float(
        seg.geometry.pitch_deg if seg.geometry else sen.pitch_deg),
    "segment.activity": lambda seg, sen: seg.activity,
    "segment.start": lambda seg, sen: format_ts(seg.start_ts),
    "segment.duration-s": lambda seg, sen: fmt_float(seg.duration_s),
    "environment.temperature-c": lambda seg, sen: fmt_float(seg.environment.temperature_c),
    "environment.wind-speed-mps": lambda seg, sen: fmt_float(seg.environment.wind_speed_mps),
    "environment.relative-humidity-pct": lambda seg, sen: fmt_float(
        seg.environment.relative_humidity_pct),
    "environment.cn2": lambda seg, sen: fmt_float(seg.environment.cn2),
}


@dataclass(frozen=True)
class ConstraintProfile:
    scenario_name: str = "default"
    metadata_fields_exposed: tuple[str, ...] = ()
    media_reformat: str = "none"

    def __post_init__(self) -> None:
        if self.media_reformat not in MEDIA_REFORMATS:
            raise ValueError(f"unknown media reformat {self.media_reformat!r}")
        for name in self.metadata_fields_exposed:
            # probe identity must never be exposable
            if "subject" in name:
                raise ValueError(f"identity-bearing field {name!r} not allowed")
            if name not in _FIELD_EXTRACTORS:
                raise ValueError(f"unknown metadata field {name!r}")


def default_profile() -> ConstraintProfile:
    return ConstraintProfile(
        scenario_name="full-metadata",
        metadata_fields_exposed=tuple(sorted(_FIELD_EXTRACTORS)),
        media_reformat="none",
    )


def profile_to_bytes(profile: ConstraintProfile) -> bytes:
    root = ET.Element("constraint-profile")
    root.set("scenario", profile.scenario_name)
    root.set("media-reformat", profile.media_reformat)
    for name in profile.metadata_fields_exposed:
        ET.SubElement(root, "expose").set("field", name)
    return write_document(root)


def profile_from_bytes(data: bytes) -> ConstraintProfile:
    root = parse_xml(data)
    return ConstraintProfile(
        scenario_name=root.get("scenario"),
        metadata_fields_exposed=tuple(e.get("field") for e in root.findall("expose")),
        media_reformat=root.get("media-reformat"),
    )


def constrained_metadata(
    segment: MediaSegment, sensor: SensorRecord, profile: ConstraintProfile
) -> bytes:
    """Per-media metadata document carrying only allowlisted fields."""
    root = ET.Element("media-metadata")
    root.set("media", segment.segment_id)
    for name in profile.metadata_fields_exposed:
        extractor = _FIELD_EXTRACTORS[name]
        try:
            value = extractor(segment, sensor)
        except AttributeError:
            continue  # field source absent on this segment (e.g. no environment)
        elem = ET.SubElement(root, "field")
        elem.set("name", name)
        elem.text = value
    return write_document(root)


def reformat_media(raw: bytes, profile: ConstraintProfile) -> bytes:
    if profile.media_reformat == "none":
        return raw
    payload = read_brf(raw)
    if profile.media_reformat == "downsample-frames":
        frames = payload.frames[::2] or payload.frames[:1]
        return write_brf(BrfPayload(payload.segment_id, payload.frame_rate / 2.0, frames))
    # strip-annotations: remove detector-derived geometry, keep observations
    stripped = tuple(
        frame.__class__(
            timestamp=frame.timestamp,
            head_bbox=(0.0, 0.0, 0.0, 0.0),
            body_bbox=(0.0, 0.0, 0.0, 0.0),
            yaw_deg=0.0, pitch_deg=0.0, roll_deg=0.0,
            observations=frame.observations,
        )
        for frame in payload.frames
    )
    return write_brf(BrfPayload(payload.segment_id, payload.frame_rate, stripped))


# ---------------------------------------------------------------------------
# score bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplateHandle:
    entry_id: str
    handle: str


@dataclass(frozen=True)
class ProbeEntry:
    entry_id: str
    handle: str
    tracklet_ids: tuple[str, ...] = ("t-0",)


@dataclass(frozen=True)
class ScoreRecord:
    probe_entry: str
    gallery_entry: str
    mode: str
    score: float | None


@dataclass
class ScoreMatrix:
    probe_entries: tuple[str, ...]
    gallery_entries: tuple[str, ...]
    modes: tuple[str, ...]
    scores: dict[tuple[str, str, str], float | None] = field(default_factory=dict)
    fte_gallery: tuple[str, ...] = ()
    fte_probe: tuple[str, ...] = ()
    unsupported_modes: tuple[str, ...] = ()

    def get(self, probe: str, gallery: str, mode: str) -> float | None:
        return self.scores.get((probe, gallery, mode))

    def records(self) -> list[ScoreRecord]:
        return [
            ScoreRecord(p, g, m, self.scores.get((p, g, m)))
            for m in self.modes
            for p in self.probe_entries
            for g in self.gallery_entries
        ]

    def to_csv(self) -> str:
        lines = ["probe,gallery,mode,score"]
        for record in self.records():
            value = "" if record.score is None else fmt_float(record.score)
            lines.append(f"{record.probe_entry},{record.gallery_entry},{record.mode},{value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(
        cls, text: str,
        fte_gallery: tuple[str, ...] = (), fte_probe: tuple[str, ...] = (),
        unsupported_modes: tuple[str, ...] = (),
    ) -> "ScoreMatrix":
        probes: dict[str, None] = {}
        galleries: dict[str, None] = {}
        modes: dict[str, None] = {}
        scores: dict[tuple[str, str, str], float | None] = {}
        lines = text.strip().splitlines()
        if lines[0] != "probe,gallery,mode,score":
            raise ValueError("unexpected scores CSV header")
        for line in lines[1:]:
            probe, gallery, mode, raw = line.split(",")
            probes[probe] = None
            galleries[gallery] = None
            modes[mode] = None
            scores[(probe, gallery, mode)] = float(raw) if raw else None
        return cls(
            probe_entries=tuple(sorted(probes)),
            gallery_entries=tuple(sorted(galleries)),
            modes=tuple(sorted(modes)),
            scores=scores,
            fte_gallery=fte_gallery,
            fte_probe=fte_probe,
            unsupported_modes=unsupported_modes,
        )


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


class InProcessSession:
    """Runs an HS object inside the harness process, same operation contract
    as the wire."""

    def __init__(self, hs):
        self._hs = hs

    def hello(self, requested_modes: set[str]) -> set[str]:
        return self._hs.hello(PROTOCOL_VERSION, requested_modes)

    def configure(self, profile_xml: bytes) -> None:
        self._hs.configure(profile_xml)

    def ingest(self, entry_id: str, kind: str, metadata: bytes, payloads: list[bytes]) -> str:
        try:
            return self._hs.ingest(entry_id, kind, metadata, payloads)
        except ValueError as exc:
            raise HsEntryError(str(exc)) from exc

    def verify(self, probe_handle: str, gallery_handles: list[str], mode: str):
        return self._hs.verify(probe_handle, gallery_handles, mode)

    def search(self, probe_handle: str, k: int, mode: str):
        return self._hs.search(probe_handle, k, mode)

    def close(self) -> None:
        self._hs.close()


class WireSession:
    """Client side of the wire protocol over a pair of byte streams."""

    def __init__(self, rfile, wfile, on_close: Callable[[], None] | None = None):
        self._rfile = rfile
        self._wfile = wfile
        self._on_close = on_close

    def _request(self, msg_type: int, payload: bytes, expect: int):
        protocol.write_frame(self._wfile, msg_type, payload)
        frame = protocol.read_frame(self._rfile)
        if frame is None:
            raise protocol.TruncatedStream("HS closed the stream mid-session")
        got_type, got_payload = frame
        if got_type == protocol.MSG_ERROR:
            code, message = protocol.decode_error(got_payload)
            raise HsEntryError(f"HS error {code}: {message}")
        if got_type != expect:
            raise protocol.ProtocolError(
                f"expected message 0x{expect:02x}, got 0x{got_type:02x}")
        return got_payload

    def hello(self, requested_modes: set[str]) -> set[str]:
        payload = self._request(
            protocol.MSG_HELLO,
            protocol.encode_hello(PROTOCOL_VERSION, requested_modes),
            protocol.MSG_HELLO,
        )
        version, supported = protocol.decode_hello(payload)
        if version != PROTOCOL_VERSION:
            raise SessionRefused(f"HS speaks protocol version {version}")
        return supported

    def configure(self, profile_xml: bytes) -> None:
        self._request(protocol.MSG_CONFIG, profile_xml, protocol.MSG_CONFIG)

    def ingest(self, entry_id: str, kind: str, metadata: bytes, payloads: list[bytes]) -> str:
        protocol.write_frame(
            self._wfile, protocol.MSG_MEDIA_BEGIN,
            protocol.encode_media_begin(entry_id, kind, metadata))
        for raw in payloads:
            protocol.write_frame(self._wfile, protocol.MSG_MEDIA_CHUNK, raw)
        payload = self._request(protocol.MSG_MEDIA_END, b"", protocol.MSG_HANDLE)
        return protocol.decode_handle(payload)

    def verify(self, probe_handle: str, gallery_handles: list[str], mode: str):
        payload = self._request(
            protocol.MSG_VERIFY,
            protocol.encode_verify(probe_handle, gallery_handles, mode),
            protocol.MSG_SCORES,
        )
        scores = protocol.decode_scores(payload)
        if len(scores) != len(gallery_handles):
            raise protocol.ProtocolError("SCORES count mismatch")
        return scores

    def search(self, probe_handle: str, k: int, mode: str):
        payload = self._request(
            protocol.MSG_SEARCH,
            protocol.encode_search(probe_handle, k, mode),
            protocol.MSG_RANKED,
        )
        return protocol.decode_ranked(payload)

    def close(self) -> None:
        if self._on_close is not None:
            self._on_close()


def open_wire_session(spec: str) -> WireSession:
    """Open a wire transport from an HS spec string.

    ``exec:<command>`` launches a child process speaking the protocol on
    stdio; ``tcp:<host>:<port>`` connects to a local stream socket.
    """
    if spec.startswith("exec:"):
        argv = shlex.split(spec[len("exec:"):])
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)

        def close() -> None:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=30)

        return WireSession(proc.stdout, proc.stdin, on_close=close)
    if spec.startswith("tcp:"):
        host, port = spec[len("tcp:"):].rsplit(":", 1)
        sock = socket.create_connection((host, int(port)))
        rfile = sock.makefile("rb")
        wfile = sock.makefile("wb")

        def close() -> None:
            wfile.close()
            rfile.close()
            sock.close()

        return WireSession(rfile, wfile, on_close=close)
    raise ValueError(f"unknown HS transport spec {spec!r}")


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Capabilities:
    supported_modes: frozenset[str]
    absent_modes: frozenset[str]


def negotiate(session, requested_modes: set[str]) -> Capabilities:
    """Version/mode negotiation; an HS with no usable modes refuses the run."""
    supported = set(session.hello(requested_modes))
    if not supported:
        raise SessionRefused("HS declared no supported modes")
    absent = set(requested_modes) - supported
    for mode in sorted(absent):
        log.warning("HS does not support mode %s; requests will be skipped", mode)
    return Capabilities(supported_modes=frozenset(supported), absent_modes=frozenset(absent))


MediaSource = Callable[[str], tuple[MediaSegment, SensorRecord, bytes]]


def _stream_entry(session, entry, kind: str, profile: ConstraintProfile,
                  media_source: MediaSource) -> str:
    if not entry.media_refs:
        raise HsEntryError(f"entry {entry.entry_id} has no media refs")
    metadata_docs = []
    payloads = []
    for ref in entry.media_refs:
        segment, sensor, raw = media_source(ref)
        metadata_docs.append(constrained_metadata(segment, sensor, profile))
        payloads.append(reformat_media(raw, profile))
    bundle = b"".join(metadata_docs)
    return session.ingest(entry.entry_id, kind, bundle, payloads)


def enroll(session, sigset: SigSet, profile: ConstraintProfile,
           media_source: MediaSource) -> tuple[dict[str, TemplateHandle], list[str]]:
    """Enroll a gallery sig-set; failures are tallied, never fatal."""
    if sigset.kind != "gallery":
        raise ValueError("enroll expects a gallery sig-set")
    handles: dict[str, TemplateHandle] = {}
    failed: list[str] = []
    for entry in sigset.entries:
        try:
            handle = _stream_entry(session, entry, "gallery", profile, media_source)
        except HsEntryError as exc:
            log.warning("enrollment failed for %s: %s", entry.entry_id, exc)
            failed.append(entry.entry_id)
            continue
        handles[entry.entry_id] = TemplateHandle(entry_id=entry.entry_id, handle=handle)
    return handles, failed


def probe_ingest(session, sigset: SigSet, profile: ConstraintProfile,
                 media_source: MediaSource) -> tuple[dict[str, ProbeEntry], list[str]]:
    """Ingest a probe sig-set; subject labels are never streamed."""
    if sigset.kind != "probe":
        raise ValueError("probe_ingest expects a probe sig-set")
    entries: dict[str, ProbeEntry] = {}
    failed: list[str] = []
    for entry in sigset.entries:
        try:
            handle = _stream_entry(session, entry, "probe", profile, media_source)
        except HsEntryError as exc:
            log.warning("probe ingest failed for %s: %s", entry.entry_id, exc)
            failed.append(entry.entry_id)
            continue
        entries[entry.entry_id] = ProbeEntry(entry_id=entry.entry_id, handle=handle)
    return entries, failed


def verify(session, probes: dict[str, ProbeEntry], gallery: dict[str, TemplateHandle],
           modes, matrix: ScoreMatrix) -> None:
    """Fill the matrix with the full probe x gallery x mode cross-product.

    Per-pair HS failures leave explicit nulls; aggregation is keyed, so the
    outcome does not depend on processing order.
    """
    gallery_ids = sorted(gallery)
    gallery_handles = [gallery[g].handle for g in gallery_ids]
    for mode in modes:
        for probe_id in sorted(probes):
            try:
                scores = session.verify(probes[probe_id].handle, gallery_handles, mode)
            except HsEntryError as exc:
                log.warning("verify failed for %s/%s: %s", probe_id, mode, exc)
                scores = [None] * len(gallery_ids)
            for gallery_id, value in zip(gallery_ids, scores):
                matrix.scores[(probe_id, gallery_id, mode)] = value


def search(session, probes: dict[str, ProbeEntry], gallery: dict[str, TemplateHandle],
           k: int, mode: str) -> dict[str, list[tuple[str, float]]]:
    """Top-k search per probe, mapped back to gallery entry ids."""
    by_handle = {h.handle: entry_id for entry_id, h in gallery.items()}
    results: dict[str, list[tuple[str, float]]] = {}
    for probe_id in sorted(probes):
        ranked = session.search(probes[probe_id].handle, k, mode)
        results[probe_id] = [(by_handle[h], s) for h, s in ranked if h in by_handle]
    return results
