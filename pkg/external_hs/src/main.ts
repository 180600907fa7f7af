/**
 * Serve one matcher session on stdio. Launched by the harness as
 * `--hs "exec:node dist/main.js"`.
 *
 * Clean end of stream exits 0; a truncated frame or a refused session
 * exits 1.
 */

import process from "node:process";

import { FrameParser, ProtocolError } from "./protocol.js";
import { SessionState } from "./session.js";

export function main(): void {
  const parser = new FrameParser();
  const session = new SessionState();

  process.stdin.on("data", (chunk: Buffer) => {
    let frames;
    try {
      frames = parser.feed(chunk);
    } catch (err) {
      if (err instanceof ProtocolError) process.exit(1);
      throw err;
    }
    for (const frame of frames) {
      for (const response of session.handle(frame)) {
        process.stdout.write(response);
      }
      if (session.refused) {
        process.exit(1);
      }
    }
  });

  process.stdin.on("end", () => {
    process.exit(parser.pending() === 0 ? 0 : 1);
  });
}

main();
