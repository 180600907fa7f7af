/**
 * Matching math, numerically identical to the harness's reference matcher:
 * templates are quality-weighted means of frame observations renormalized
 * to unit length, single-mode scores are cosine similarities, and fusion
 * min-max normalizes each mode over the gallery for the given probe before
 * a weighted mean over the modes present.
 *
 * Every reduction runs in sequential index order in IEEE double precision
 * and rounds to float32 (Math.fround) at the API boundary, which makes the
 * scores bit-equal to the in-process reference implementation.
 */

import { BrfFrame } from "./brf.js";

export const SINGLE_MODES = ["face", "body", "gait"] as const;

export interface Template {
  vectors: Map<string, Float64Array>; // float32 values widened to doubles
  qualities: Map<string, number>;
}

export function buildTemplate(frames: BrfFrame[]): Template {
  const vectors = new Map<string, Float64Array>();
  const qualities = new Map<string, number>();
  for (const modality of SINGLE_MODES) {
    let acc: Float64Array | null = null;
    let qSum = 0;
    let count = 0;
    for (const frame of frames) {
      const obs = frame.observations.get(modality);
      if (obs === undefined) continue;
      const q = obs.quality;
      if (acc === null) acc = new Float64Array(obs.vector.length);
      for (let j = 0; j < obs.vector.length; j++) {
        acc[j] += q * obs.vector[j];
      }
      qSum += q;
      count += 1;
    }
    if (acc === null) continue;
    let normSq = 0;
    for (let j = 0; j < acc.length; j++) normSq += acc[j] * acc[j];
    const norm = Math.sqrt(normSq);
    if (norm === 0) continue;
    const vector = new Float64Array(acc.length);
    for (let j = 0; j < acc.length; j++) vector[j] = Math.fround(acc[j] / norm);
    vectors.set(modality, vector);
    qualities.set(modality, Math.fround(qSum / count));
  }
  return { vectors, qualities };
}

export function score(a: Template, b: Template, mode: string): number | null {
  const va = a.vectors.get(mode);
  const vb = b.vectors.get(mode);
  if (va === undefined || vb === undefined) return null;
  let dot = 0;
  for (let j = 0; j < va.length; j++) dot += va[j] * vb[j];
  return Math.fround(dot);
}

export function minmaxNormalize(scores: Array<number | null>): Array<number | null> {
  const present = scores.filter((s): s is number => s !== null);
  if (present.length === 0) return [...scores];
  let lo = present[0];
  let hi = present[0];
  for (const s of present) {
    if (s < lo) lo = s;
    if (s > hi) hi = s;
  }
  if (hi === lo) return scores.map((s) => (s === null ? null : 0.5));
  return scores.map((s) => (s === null ? null : (s - lo) / (hi - lo)));
}

export function fuse(
  modeScores: Map<string, number | null>,
  weights?: Map<string, number>,
): number | null {
  let num = 0;
  let den = 0;
  for (const mode of SINGLE_MODES) {
    const value = modeScores.get(mode);
    if (value === null || value === undefined) continue;
    const w = weights?.get(mode) ?? 1.0;
    num += w * value;
    den += w;
  }
  if (den === 0) return null;
  return Math.fround(num / den);
}
