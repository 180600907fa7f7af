/**
 * Session state and message dispatch for the stdio matcher.
 *
 * One response per request, in order. Malformed messages yield an ERROR
 * frame and the session continues; a protocol version mismatch refuses the
 * session. All state is per-session and dropped at stream end.
 */

import { BrfFrame, BrfError, readBrf } from "./brf.js";
import * as p from "./protocol.js";
import { SINGLE_MODES, Template, buildTemplate, fuse, minmaxNormalize, score } from "./scoring.js";

const SUPPORTED_MODES_BITS = p.modesToBits(["face", "body", "gait", "fusion"]);

interface Entry {
  kind: "gallery" | "probe";
  trackletTemplates: Template[];
}

interface PendingMedia {
  entryId: string;
  kind: "gallery" | "probe";
  metadata: Buffer;
  chunks: Buffer[];
}

class MediaError extends Error {}

export class SessionState {
  private entries = new Map<string, Entry>();
  private counters = { gallery: 0, probe: 0 };
  private pending: PendingMedia | null = null;
  /** set when the session must stop (version refusal) */
  refused = false;

  /** Handle one frame; returns response frames to write, in order. */
  handle(frame: p.Frame): Buffer[] {
    try {
      switch (frame.msgType) {
        case p.MSG_HELLO:
          return this.onHello(frame.payload);
        case p.MSG_CONFIG:
          return [p.frameBytes(p.MSG_CONFIG, Buffer.alloc(0))];
        case p.MSG_MEDIA_BEGIN: {
          const { entryId, kind, metadata } = p.decodeMediaBegin(frame.payload);
          this.pending = { entryId, kind, metadata, chunks: [] };
          return [];
        }
        case p.MSG_MEDIA_CHUNK:
          if (this.pending === null) {
            throw new p.ProtocolError("MEDIA_CHUNK outside MEDIA_BEGIN");
          }
          this.pending.chunks.push(frame.payload);
          return [];
        case p.MSG_MEDIA_END:
          return this.onMediaEnd();
        case p.MSG_VERIFY:
          return this.onVerify(frame.payload);
        case p.MSG_SEARCH:
          return this.onSearch(frame.payload);
        default:
          throw new p.ProtocolError(
            `unknown message type 0x${frame.msgType.toString(16).padStart(2, "0")}`,
          );
      }
    } catch (err) {
      if (err instanceof p.ProtocolError) {
        return [p.frameBytes(p.MSG_ERROR, p.encodeError(p.ERR_BAD_MESSAGE, err.message))];
      }
      throw err;
    }
  }

  private onHello(payload: Buffer): Buffer[] {
    const { version, modesBits } = p.decodeHello(payload);
    if (version !== p.PROTOCOL_VERSION) {
      this.refused = true;
      return [p.frameBytes(
        p.MSG_ERROR,
        p.encodeError(p.ERR_VERSION, `protocol version ${version} unsupported`),
      )];
    }
    const supported = modesBits & SUPPORTED_MODES_BITS;
    return [p.frameBytes(p.MSG_HELLO, p.encodeHello(p.PROTOCOL_VERSION, supported))];
  }

  private onMediaEnd(): Buffer[] {
    if (this.pending === null) {
      throw new p.ProtocolError("MEDIA_END outside MEDIA_BEGIN");
    }
    const pending = this.pending;
    this.pending = null;
    try {
      const handle = this.ingest(pending);
      return [p.frameBytes(p.MSG_HANDLE, p.encodeHandle(handle))];
    } catch (err) {
      if (err instanceof MediaError) {
        return [p.frameBytes(p.MSG_ERROR, p.encodeError(p.ERR_BAD_MEDIA, err.message))];
      }
      throw err;
    }
  }

  private ingest(pending: PendingMedia): string {
    if (pending.chunks.length === 0) {
      throw new MediaError(`entry ${pending.entryId}: no media`);
    }
    const payloads = pending.chunks.map((raw) => {
      try {
        return readBrf(raw);
      } catch (err) {
        if (err instanceof BrfError) {
          throw new MediaError(`entry ${pending.entryId}: ${err.message}`);
        }
        throw err;
      }
    });
    let templates: Template[];
    if (pending.kind === "gallery") {
      // an enrollment produces a single template over all media
      const frames: BrfFrame[] = [];
      for (const payload of payloads) frames.push(...payload.frames);
      templates = [buildTemplate(frames)];
    } else {
      templates = payloads.map((payload) => buildTemplate(payload.frames));
    }
    this.counters[pending.kind] += 1;
    const prefix = pending.kind === "gallery" ? "G" : "P";
    const handle = `${prefix}${String(this.counters[pending.kind]).padStart(6, "0")}`;
    this.entries.set(handle, { kind: pending.kind, trackletTemplates: templates });
    return handle;
  }

  private entry(handle: string): Entry {
    const entry = this.entries.get(handle);
    if (entry === undefined) {
      throw new p.ProtocolError(`unknown handle ${handle}`);
    }
    return entry;
  }

  private pairModeScore(probe: Entry, gallery: Entry, mode: string): number | null {
    let best: number | null = null;
    for (const template of probe.trackletTemplates) {
      const value = score(template, gallery.trackletTemplates[0], mode);
      if (value !== null && (best === null || value > best)) best = value;
    }
    return best;
  }

  verifyScores(probeHandle: string, galleryHandles: string[], mode: string): Array<number | null> {
    const probe = this.entry(probeHandle);
    const galleries = galleryHandles.map((h) => this.entry(h));
    if ((SINGLE_MODES as readonly string[]).includes(mode)) {
      return galleries.map((g) => this.pairModeScore(probe, g, mode));
    }
    const perMode = new Map<string, Array<number | null>>();
    for (const m of SINGLE_MODES) {
      perMode.set(m, minmaxNormalize(galleries.map((g) => this.pairModeScore(probe, g, m))));
    }
    return galleries.map((_, i) =>
      fuse(new Map(SINGLE_MODES.map((m) => [m, perMode.get(m)![i]]))),
    );
  }

  private onVerify(payload: Buffer): Buffer[] {
    const { probeHandle, galleryHandles, mode } = p.decodeVerify(payload);
    try {
      const scores = this.verifyScores(probeHandle, galleryHandles, mode);
      return [p.frameBytes(p.MSG_SCORES, p.encodeScores(scores))];
    } catch (err) {
      if (err instanceof p.ProtocolError && err.message.startsWith("unknown handle")) {
        return [p.frameBytes(
          p.MSG_ERROR, p.encodeError(p.ERR_UNKNOWN_HANDLE, err.message))];
      }
      throw err;
    }
  }

  private onSearch(payload: Buffer): Buffer[] {
    const { probeHandle, k, mode } = p.decodeSearch(payload);
    try {
      const galleryHandles = [...this.entries.keys()]
        .filter((h) => this.entries.get(h)!.kind === "gallery")
        .sort();
      const scores = this.verifyScores(probeHandle, galleryHandles, mode);
      const ranked: Array<[string, number]> = [];
      galleryHandles.forEach((handle, i) => {
        const value = scores[i];
        if (value !== null) ranked.push([handle, value]);
      });
      // descending score; ties broken by ascending handle
      ranked.sort((a, b) => (a[1] !== b[1] ? b[1] - a[1] : a[0] < b[0] ? -1 : 1));
      return [p.frameBytes(p.MSG_RANKED, p.encodeRanked(ranked.slice(0, Math.min(k, ranked.length))))];
    } catch (err) {
      if (err instanceof p.ProtocolError && err.message.startsWith("unknown handle")) {
        return [p.frameBytes(
          p.MSG_ERROR, p.encodeError(p.ERR_UNKNOWN_HANDLE, err.message))];
      }
      throw err;
    }
  }
}
