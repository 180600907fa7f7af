/**
 * BRF payload reader. Layout (little-endian, lengths u32-prefixed):
 * magic "SYNB", version u16, segment id string, frame count u32, frame
 * rate f32, then per frame: timestamp f64, head/body bboxes 4xf32 each,
 * yaw/pitch/roll 3xf32, modality count u32, and per modality a code u8
 * (1 face, 2 body, 4 gait), a u32-length f32 vector, and a quality f32
 * in (0, 1].
 */

import { Cursor } from "./protocol.js";

export class BrfError extends Error {}

export const MODALITY_NAMES: Record<number, string> = { 1: "face", 2: "body", 4: "gait" };

export interface Observation {
  /** float32 components widened to doubles, exactly */
  vector: Float64Array;
  quality: number;
}

export interface BrfFrame {
  timestamp: number;
  headBbox: [number, number, number, number];
  bodyBbox: [number, number, number, number];
  yawDeg: number;
  pitchDeg: number;
  rollDeg: number;
  observations: Map<string, Observation>;
}

export interface BrfPayload {
  segmentId: string;
  frameRate: number;
  frames: BrfFrame[];
}

class BrfCursor extends Cursor {
  // reuse the protocol cursor but raise BRF errors
  override take(n: number): Buffer {
    try {
      return super.take(n);
    } catch {
      throw new BrfError("truncated payload");
    }
  }
}

export function readBrf(data: Buffer): BrfPayload {
  const c = new BrfCursor(data);
  if (!c.take(4).equals(Buffer.from("SYNB", "ascii"))) {
    throw new BrfError("bad magic");
  }
  const version = c.u16();
  if (version !== 1) throw new BrfError(`unsupported version ${version}`);
  const segmentId = c.string();
  const frameCount = c.u32();
  if (frameCount < 1) throw new BrfError("frame_count must be >= 1");
  const frameRate = c.f32();

  const frames: BrfFrame[] = [];
  for (let f = 0; f < frameCount; f++) {
    const timestamp = c.f64();
    const headBbox: [number, number, number, number] = [c.f32(), c.f32(), c.f32(), c.f32()];
    const bodyBbox: [number, number, number, number] = [c.f32(), c.f32(), c.f32(), c.f32()];
    const yawDeg = c.f32();
    const pitchDeg = c.f32();
    const rollDeg = c.f32();
    const nModalities = c.u32();
    const observations = new Map<string, Observation>();
    for (let m = 0; m < nModalities; m++) {
      const code = c.u8();
      const name = MODALITY_NAMES[code];
      if (name === undefined) throw new BrfError(`unknown modality code ${code}`);
      const length = c.u32();
      const vector = new Float64Array(length);
      for (let j = 0; j < length; j++) vector[j] = c.f32();
      const quality = c.f32();
      if (!(quality > 0 && quality <= 1)) {
        throw new BrfError(`quality ${quality} outside (0, 1]`);
      }
      observations.set(name, { vector, quality });
    }
    frames.push({ timestamp, headBbox, bodyBbox, yawDeg, pitchDeg, rollDeg, observations });
  }
  try {
    c.done();
  } catch {
    throw new BrfError("trailing bytes");
  }
  return { segmentId, frameRate, frames };
}
