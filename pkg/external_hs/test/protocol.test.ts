import { describe, expect, test } from "vitest";

import {
  Cursor,
  FrameParser,
  MSG_HELLO,
  MSG_SCORES,
  NULL_SCORE_BITS,
  ProtocolError,
  decodeHello,
  decodeSearch,
  decodeVerify,
  encodeHello,
  encodeRanked,
  encodeScores,
  frameBytes,
} from "../src/protocol.js";

describe("frame parser", () => {
  test("round-trips a frame", () => {
    const parser = new FrameParser();
    const frames = parser.feed(frameBytes(MSG_HELLO, Buffer.from([1, 0, 15])));
    expect(frames).toHaveLength(1);
    expect(frames[0].msgType).toBe(MSG_HELLO);
    expect([...frames[0].payload]).toEqual([1, 0, 15]);
    expect(parser.pending()).toBe(0);
  });

  test("reassembles frames across arbitrary chunk boundaries", () => {
    const whole = Buffer.concat([
      frameBytes(MSG_HELLO, Buffer.from([1, 0, 15])),
      frameBytes(MSG_SCORES, encodeScores([0.25, null])),
    ]);
    for (const cut of [1, 3, 5, 7, whole.length - 2]) {
      const parser = new FrameParser();
      const first = parser.feed(whole.subarray(0, cut));
      const rest = parser.feed(whole.subarray(cut));
      expect(first.length + rest.length).toBe(2);
      expect(parser.pending()).toBe(0);
    }
  });

  test("reports pending bytes on truncation", () => {
    const parser = new FrameParser();
    const frame = frameBytes(MSG_HELLO, Buffer.from([1, 0, 15]));
    parser.feed(frame.subarray(0, 6));
    expect(parser.pending()).toBeGreaterThan(0);
  });

  test("rejects implausible lengths", () => {
    const parser = new FrameParser();
    const bad = Buffer.alloc(5);
    bad.writeUInt32LE(0, 0);
    expect(() => parser.feed(bad)).toThrow(ProtocolError);
  });
});

describe("payload codecs", () => {
  test("hello", () => {
    const { version, modesBits } = decodeHello(encodeHello(1, 0b1111));
    expect(version).toBe(1);
    expect(modesBits).toBe(15);
  });

  test("verify", () => {
    // mirror the harness encoder: string-prefixed handles, mode bits, u32 count
    const payload = Buffer.concat([
      Buffer.from([7, 0, 0, 0]), Buffer.from("P000001"),
      Buffer.from([8]),
      Buffer.from([2, 0, 0, 0]),
      Buffer.from([7, 0, 0, 0]), Buffer.from("G000001"),
      Buffer.from([7, 0, 0, 0]), Buffer.from("G000002"),
    ]);
    const decoded = decodeVerify(payload);
    expect(decoded).toEqual({
      probeHandle: "P000001",
      galleryHandles: ["G000001", "G000002"],
      mode: "fusion",
    });
  });

  test("search", () => {
    const payload = Buffer.concat([
      Buffer.from([2, 0, 0, 0]), Buffer.from("P1"),
      Buffer.from([5, 0, 0, 0]),
      Buffer.from([1]),
    ]);
    expect(decodeSearch(payload)).toEqual({ probeHandle: "P1", k: 5, mode: "face" });
  });

  test("null score uses the canonical quiet NaN bits", () => {
    const encoded = encodeScores([null]);
    expect(encoded.readUInt32LE(4)).toBe(NULL_SCORE_BITS);
  });

  test("ranked encoding", () => {
    const encoded = encodeRanked([["G000002", 0.5]]);
    const c = new Cursor(encoded);
    expect(c.u32()).toBe(1);
    expect(c.string()).toBe("G000002");
    expect(c.f32()).toBeCloseTo(0.5, 6);
  });
});
