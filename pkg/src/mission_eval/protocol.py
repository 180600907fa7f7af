"""Bit-exact wire protocol between the harness and a holistic solution (HS).

Framing: little-endian u32 frame length, then one message-type byte, then the
payload; the length covers the type byte plus payload.  Strings and byte
blobs are u32-length-prefixed; scores are IEEE 754 binary32, with a null
score encoded as the canonical quiet NaN bit pattern 0x7fc00000.

Message flow (one response per request, in order; no correlation ids):

    HELLO{version u16, modes bitmask u8}      -> HELLO{version, supported}
    CONFIG{constraint profile XML}            -> CONFIG{} (ack)
    MEDIA_BEGIN{entry_id, kind u8, metadata XML}
    MEDIA_CHUNK{one complete BRF payload}     (repeatable)
    MEDIA_END{}                               -> HANDLE{opaque id} | ERROR
    VERIFY{probe handle, gallery handles, mode u8} -> SCORES{f32 list}
    SEARCH{probe handle, k u32, mode u8}      -> RANKED{(handle, f32) list}
    ERROR{code u16, message}                  (any time, from the HS)

Transport is a local stream socket or the stdio pipe of a child process.
In-process implementations bypass the wire via the same operation contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

__all__ = [
    "PROTOCOL_VERSION",
    "MSG_HELLO",
    "MSG_CONFIG",
    "MSG_MEDIA_BEGIN",
    "MSG_MEDIA_CHUNK",
    "MSG_MEDIA_END",
    "MSG_HANDLE",
    "MSG_VERIFY",
    "MSG_SCORES",
    "MSG_SEARCH",
    "MSG_RANKED",
    "MSG_ERROR",
    "MODE_BITS",
    "MODE_FROM_BITS",
    "NULL_SCORE_BITS",
    "ERR_VERSION",
    "ERR_BAD_MESSAGE",
    "ERR_BAD_MEDIA",
    "ERR_UNKNOWN_HANDLE",
    "ERR_UNSUPPORTED_MODE",
    "ERR_INTERNAL",
    "ProtocolError",
    "TruncatedStream",
    "write_frame",
    "read_frame",
    "encode_hello",
    "decode_hello",
    "encode_media_begin",
    "decode_media_begin",
    "encode_handle",
    "decode_handle",
    "encode_verify",
    "decode_verify",
    "encode_scores",
    "decode_scores",
    "encode_search",
    "decode_search",
    "encode_ranked",
    "decode_ranked",
    "encode_error",
    "decode_error",
    "modes_to_bits",
    "bits_to_modes",
    "serve_stream",
]

PROTOCOL_VERSION = 1
MAX_FRAME = 64 * 1024 * 1024

MSG_HELLO = 0x01
MSG_CONFIG = 0x02
MSG_MEDIA_BEGIN = 0x10
MSG_MEDIA_CHUNK = 0x11
MSG_MEDIA_END = 0x12
MSG_HANDLE = 0x13
MSG_VERIFY = 0x20
MSG_SCORES = 0x21
MSG_SEARCH = 0x22
MSG_RANKED = 0x23
MSG_ERROR = 0x7F

MODE_BITS = {"face": 1, "body": 2, "gait": 4, "fusion": 8}
MODE_FROM_BITS = {bits: name for name, bits in MODE_BITS.items()}

NULL_SCORE_BITS = 0x7FC00000

ERR_VERSION = 1
ERR_BAD_MESSAGE = 2
ERR_BAD_MEDIA = 3
ERR_UNKNOWN_HANDLE = 4
ERR_UNSUPPORTED_MODE = 5
ERR_INTERNAL = 6


class ProtocolError(ValueError):
    pass


class TruncatedStream(ProtocolError):
    pass


def modes_to_bits(modes) -> int:
    bits = 0
    for mode in modes:
        bits |= MODE_BITS[mode]
    return bits


def bits_to_modes(bits: int) -> set[str]:
    return {name for name, b in MODE_BITS.items() if bits & b}


# ---------------------------------------------------------------------------
# framing
# ---------------------------------------------------------------------------


def write_frame(stream: BinaryIO, msg_type: int, payload: bytes = b"") -> None:
    stream.write(struct.pack("<I", 1 + len(payload)))
    stream.write(bytes([msg_type]))
    stream.write(payload)
    stream.flush()


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise TruncatedStream(f"stream ended with {remaining} bytes pending")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> tuple[int, bytes] | None:
    """Next (type, payload) frame, or None at a clean end of stream."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        header += _read_exact(stream, 4 - len(header))
    (length,) = struct.unpack("<I", header)
    if length < 1 or length > MAX_FRAME:
        raise ProtocolError(f"implausible frame length {length}")
    body = _read_exact(stream, length)
    return body[0], body[1:]


# ---------------------------------------------------------------------------
# payload encoding
# ---------------------------------------------------------------------------


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("payload too short")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def string(self) -> str:
        return self.blob().decode("utf-8")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing payload bytes")


def _blob(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def _string(text: str) -> bytes:
    return _blob(text.encode("utf-8"))


def _score_bytes(value: float | None) -> bytes:
    if value is None:
        return struct.pack("<I", NULL_SCORE_BITS)
    return struct.pack("<f", value)


def _score_from(raw: bytes) -> float | None:
    (value,) = struct.unpack("<f", raw)
    return None if value != value else value  # any NaN encodes null


def encode_hello(version: int, modes) -> bytes:
    return struct.pack("<H", version) + bytes([modes_to_bits(modes)])


def decode_hello(payload: bytes) -> tuple[int, set[str]]:
    c = _Cursor(payload)
    version = c.u16()
    modes = bits_to_modes(c.u8())
    c.done()
    return version, modes


def encode_media_begin(entry_id: str, kind: str, metadata_xml: bytes) -> bytes:
    kind_byte = {"gallery": 0, "probe": 1}[kind]
    return _string(entry_id) + bytes([kind_byte]) + _blob(metadata_xml)


def decode_media_begin(payload: bytes) -> tuple[str, str, bytes]:
    c = _Cursor(payload)
    entry_id = c.string()
    kind = {0: "gallery", 1: "probe"}.get(c.u8())
    if kind is None:
        raise ProtocolError("unknown media kind")
    metadata = c.blob()
    c.done()
    return entry_id, kind, metadata


def encode_handle(handle: str) -> bytes:
    return _string(handle)


def decode_handle(payload: bytes) -> str:
    c = _Cursor(payload)
    handle = c.string()
    c.done()
    return handle


def encode_verify(probe_handle: str, gallery_handles: list[str], mode: str) -> bytes:
    out = [_string(probe_handle), bytes([MODE_BITS[mode]]),
           struct.pack("<I", len(gallery_handles))]
    out.extend(_string(h) for h in gallery_handles)
    return b"".join(out)


def decode_verify(payload: bytes) -> tuple[str, list[str], str]:
    c = _Cursor(payload)
    probe = c.string()
    mode = MODE_FROM_BITS.get(c.u8())
    if mode is None:
        raise ProtocolError("unknown mode bits")
    count = c.u32()
    handles = [c.string() for _ in range(count)]
    c.done()
    return probe, handles, mode


def encode_scores(scores: list[float | None]) -> bytes:
    return struct.pack("<I", len(scores)) + b"".join(_score_bytes(s) for s in scores)


def decode_scores(payload: bytes) -> list[float | None]:
    c = _Cursor(payload)
    count = c.u32()
    scores = [_score_from(c.take(4)) for _ in range(count)]
    c.done()
    return scores


def encode_search(probe_handle: str, k: int, mode: str) -> bytes:
    return _string(probe_handle) + struct.pack("<I", k) + bytes([MODE_BITS[mode]])


def decode_search(payload: bytes) -> tuple[str, int, str]:
    c = _Cursor(payload)
    probe = c.string()
    k = c.u32()
    mode = MODE_FROM_BITS.get(c.u8())
    if mode is None:
        raise ProtocolError("unknown mode bits")
    c.done()
    return probe, k, mode


def encode_ranked(ranked: list[tuple[str, float]]) -> bytes:
    out = [struct.pack("<I", len(ranked))]
    for handle, value in ranked:
        out.append(_string(handle))
        out.append(struct.pack("<f", value))
    return b"".join(out)


def decode_ranked(payload: bytes) -> list[tuple[str, float]]:
    c = _Cursor(payload)
    count = c.u32()
    ranked = []
    for _ in range(count):
        handle = c.string()
        (value,) = struct.unpack("<f", c.take(4))
        ranked.append((handle, value))
    c.done()
    return ranked


def encode_error(code: int, message: str) -> bytes:
    return struct.pack("<H", code) + _string(message)


def decode_error(payload: bytes) -> tuple[int, str]:
    c = _Cursor(payload)
    code = c.u16()
    message = c.string()
    c.done()
    return code, message


# ---------------------------------------------------------------------------
# server loop (an HS behind the wire)
# ---------------------------------------------------------------------------


@dataclass
class _MediaInFlight:
    entry_id: str
    kind: str
    metadata: bytes
    chunks: list[bytes]


def serve_stream(hs, rfile: BinaryIO, wfile: BinaryIO) -> int:
    """Serve one session over a byte stream; returns a process exit status.

    Malformed messages produce an ERROR frame and the loop continues; a
    truncated stream exits nonzero.  State is per-session only.
    """
    pending: _MediaInFlight | None = None
    try:
        while True:
            try:
                frame = read_frame(rfile)
            except TruncatedStream:
                return 1
            if frame is None:
                return 0
            msg_type, payload = frame
            try:
                if msg_type == MSG_HELLO:
                    version, requested = decode_hello(payload)
                    if version != PROTOCOL_VERSION:
                        write_frame(wfile, MSG_ERROR, encode_error(
                            ERR_VERSION, f"protocol version {version} unsupported"))
                        return 1
                    supported = hs.hello(version, requested)
                    write_frame(wfile, MSG_HELLO,
                                encode_hello(PROTOCOL_VERSION, supported))
                elif msg_type == MSG_CONFIG:
                    hs.configure(payload)
                    write_frame(wfile, MSG_CONFIG, b"")
                elif msg_type == MSG_MEDIA_BEGIN:
                    entry_id, kind, metadata = decode_media_begin(payload)
                    pending = _MediaInFlight(entry_id, kind, metadata, [])
                elif msg_type == MSG_MEDIA_CHUNK:
                    if pending is None:
                        raise ProtocolError("MEDIA_CHUNK outside MEDIA_BEGIN")
                    pending.chunks.append(payload)
                elif msg_type == MSG_MEDIA_END:
                    if pending is None:
                        raise ProtocolError("MEDIA_END outside MEDIA_BEGIN")
                    entry, pending = pending, None
                    try:
                        handle = hs.ingest(entry.entry_id, entry.kind,
                                           entry.metadata, entry.chunks)
                        write_frame(wfile, MSG_HANDLE, encode_handle(handle))
                    except ValueError as exc:
                        write_frame(wfile, MSG_ERROR,
                                    encode_error(ERR_BAD_MEDIA, str(exc)))
                elif msg_type == MSG_VERIFY:
                    probe, handles, mode = decode_verify(payload)
                    try:
                        scores = hs.verify(probe, handles, mode)
                    except KeyError as exc:
                        write_frame(wfile, MSG_ERROR,
                                    encode_error(ERR_UNKNOWN_HANDLE, str(exc)))
                        continue
                    write_frame(wfile, MSG_SCORES, encode_scores(scores))
                elif msg_type == MSG_SEARCH:
                    probe, k, mode = decode_search(payload)
                    try:
                        ranked = hs.search(probe, k, mode)
                    except KeyError as exc:
                        write_frame(wfile, MSG_ERROR,
                                    encode_error(ERR_UNKNOWN_HANDLE, str(exc)))
                        continue
                    write_frame(wfile, MSG_RANKED, encode_ranked(ranked))
                else:
                    raise ProtocolError(f"unknown message type 0x{msg_type:02x}")
            except ProtocolError as exc:
                write_frame(wfile, MSG_ERROR, encode_error(ERR_BAD_MESSAGE, str(exc)))
    finally:
        hs.close()
