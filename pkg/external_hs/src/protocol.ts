/**
 * Wire protocol: little-endian u32 frame length, one message-type byte,
 * payload. The length covers the type byte plus the payload. Strings and
 * blobs are u32-length-prefixed; scores are IEEE 754 binary32 with null
 * encoded as the canonical quiet NaN bit pattern 0x7fc00000.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_FRAME = 64 * 1024 * 1024;

export const MSG_HELLO = 0x01;
export const MSG_CONFIG = 0x02;
export const MSG_MEDIA_BEGIN = 0x10;
export const MSG_MEDIA_CHUNK = 0x11;
export const MSG_MEDIA_END = 0x12;
export const MSG_HANDLE = 0x13;
export const MSG_VERIFY = 0x20;
export const MSG_SCORES = 0x21;
export const MSG_SEARCH = 0x22;
export const MSG_RANKED = 0x23;
export const MSG_ERROR = 0x7f;

export const ERR_VERSION = 1;
export const ERR_BAD_MESSAGE = 2;
export const ERR_BAD_MEDIA = 3;
export const ERR_UNKNOWN_HANDLE = 4;
export const ERR_UNSUPPORTED_MODE = 5;
export const ERR_INTERNAL = 6;

export const NULL_SCORE_BITS = 0x7fc00000;

export const MODE_BITS: Record<string, number> = {
  face: 1,
  body: 2,
  gait: 4,
  fusion: 8,
};

export const MODE_FROM_BITS: Record<number, string> = {
  1: "face",
  2: "body",
  4: "gait",
  8: "fusion",
};

export class ProtocolError extends Error {}

export interface Frame {
  msgType: number;
  payload: Buffer;
}

/** Incremental frame accumulator tolerant of arbitrary chunk boundaries. */
export class FrameParser {
  private buffer: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): Frame[] {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
    const frames: Frame[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const length = this.buffer.readUInt32LE(0);
      if (length < 1 || length > MAX_FRAME) {
        throw new ProtocolError(`implausible frame length ${length}`);
      }
      if (this.buffer.length < 4 + length) break;
      const msgType = this.buffer[4];
      const payload = Buffer.from(this.buffer.subarray(5, 4 + length));
      this.buffer = Buffer.from(this.buffer.subarray(4 + length));
      frames.push({ msgType, payload });
    }
    return frames;
  }

  /** Bytes still pending; nonzero at end-of-stream means truncation. */
  pending(): number {
    return this.buffer.length;
  }
}

export function frameBytes(msgType: number, payload: Buffer): Buffer {
  const out = Buffer.alloc(5 + payload.length);
  out.writeUInt32LE(1 + payload.length, 0);
  out[4] = msgType;
  payload.copy(out, 5);
  return out;
}

export class Cursor {
  private pos = 0;

  constructor(private readonly data: Buffer) {}

  take(n: number): Buffer {
    if (this.pos + n > this.data.length) {
      throw new ProtocolError("payload too short");
    }
    const out = this.data.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u8(): number {
    return this.take(1)[0];
  }

  u16(): number {
    return this.take(2).readUInt16LE(0);
  }

  u32(): number {
    return this.take(4).readUInt32LE(0);
  }

  f32(): number {
    return this.take(4).readFloatLE(0);
  }

  f64(): number {
    return this.take(8).readDoubleLE(0);
  }

  blob(): Buffer {
    return this.take(this.u32());
  }

  string(): string {
    return this.blob().toString("utf-8");
  }

  done(): void {
    if (this.pos !== this.data.length) {
      throw new ProtocolError(`${this.data.length - this.pos} trailing payload bytes`);
    }
  }
}

function blob(data: Buffer): Buffer {
  const prefix = Buffer.alloc(4);
  prefix.writeUInt32LE(data.length, 0);
  return Buffer.concat([prefix, data]);
}

function stringBytes(text: string): Buffer {
  return blob(Buffer.from(text, "utf-8"));
}

export function modesToBits(modes: Iterable<string>): number {
  let bits = 0;
  for (const mode of modes) bits |= MODE_BITS[mode] ?? 0;
  return bits;
}

export function encodeHello(version: number, modesBits: number): Buffer {
  const out = Buffer.alloc(3);
  out.writeUInt16LE(version, 0);
  out[2] = modesBits;
  return out;
}

export function decodeHello(payload: Buffer): { version: number; modesBits: number } {
  const c = new Cursor(payload);
  const version = c.u16();
  const modesBits = c.u8();
  c.done();
  return { version, modesBits };
}

export function decodeMediaBegin(payload: Buffer): {
  entryId: string;
  kind: "gallery" | "probe";
  metadata: Buffer;
} {
  const c = new Cursor(payload);
  const entryId = c.string();
  const kindByte = c.u8();
  if (kindByte !== 0 && kindByte !== 1) throw new ProtocolError("unknown media kind");
  const metadata = Buffer.from(c.blob());
  c.done();
  return { entryId, kind: kindByte === 0 ? "gallery" : "probe", metadata };
}

export function encodeHandle(handle: string): Buffer {
  return stringBytes(handle);
}

export function decodeVerify(payload: Buffer): {
  probeHandle: string;
  galleryHandles: string[];
  mode: string;
} {
  const c = new Cursor(payload);
  const probeHandle = c.string();
  const mode = MODE_FROM_BITS[c.u8()];
  if (mode === undefined) throw new ProtocolError("unknown mode bits");
  const count = c.u32();
  const galleryHandles: string[] = [];
  for (let i = 0; i < count; i++) galleryHandles.push(c.string());
  c.done();
  return { probeHandle, galleryHandles, mode };
}

export function encodeScores(scores: Array<number | null>): Buffer {
  const out = Buffer.alloc(4 + 4 * scores.length);
  out.writeUInt32LE(scores.length, 0);
  scores.forEach((value, i) => {
    if (value === null) {
      out.writeUInt32LE(NULL_SCORE_BITS, 4 + 4 * i);
    } else {
      out.writeFloatLE(value, 4 + 4 * i);
    }
  });
  return out;
}

export function decodeSearch(payload: Buffer): { probeHandle: string; k: number; mode: string } {
  const c = new Cursor(payload);
  const probeHandle = c.string();
  const k = c.u32();
  const mode = MODE_FROM_BITS[c.u8()];
  if (mode === undefined) throw new ProtocolError("unknown mode bits");
  c.done();
  return { probeHandle, k, mode };
}

export function encodeRanked(ranked: Array<[string, number]>): Buffer {
  const parts: Buffer[] = [Buffer.alloc(4)];
  parts[0].writeUInt32LE(ranked.length, 0);
  for (const [handle, value] of ranked) {
    parts.push(stringBytes(handle));
    const f = Buffer.alloc(4);
    f.writeFloatLE(value, 0);
    parts.push(f);
  }
  return Buffer.concat(parts);
}

export function encodeError(code: number, message: string): Buffer {
  const head = Buffer.alloc(2);
  head.writeUInt16LE(code, 0);
  return Buffer.concat([head, stringBytes(message)]);
}
