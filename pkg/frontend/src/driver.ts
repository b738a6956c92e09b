/** Headless scripted gizmo session (node).
 *
 * Drives the WebSocket bridge with a deterministic wrist/curl script and
 * simultaneously writes the identical frames as a stream-v1 file, so the
 * live path and file replay can be compared command-for-command.
 *
 *   node dist/driver.js --url ws://127.0.0.1:PORT/ws --frames 60 \
 *        --out /tmp/script.jsonl [--rate-ms 0]
 */

import * as fs from "node:fs";
import WebSocket from "ws";

import { quatFromAxisAngle, quatMul, Vec3 } from "./math.js";
import { makeTrackingRecord, validateTrackingRecord } from "./protocol.js";
import { synthLandmarks, WristPose } from "./synth.js";

function arg(name: string, fallback?: string): string {
  const i = process.argv.indexOf(`--${name}`);
  if (i >= 0 && i + 1 < process.argv.length) return process.argv[i + 1];
  if (fallback !== undefined) return fallback;
  throw new Error(`missing --${name}`);
}

export function scriptedFrame(k: number): { wrist: WristPose; curls: number[] } {
  const t = k / 30;
  const wrist: WristPose = {
    p: [
      0.10 + 0.03 * Math.sin((2 * Math.PI * t) / 1.5),
      1.20 + 0.02 * Math.sin((2 * Math.PI * t) / 2.1),
      -0.35 + 0.025 * (Math.cos((2 * Math.PI * t) / 1.7) - 1),
    ] as Vec3,
    q: quatMul(
      quatFromAxisAngle([0, 0, 1], 0.2 * Math.sin((2 * Math.PI * t) / 2.0)),
      quatFromAxisAngle([0, 1, 0], 0.3),
    ),
  };
  const base = 0.25 + 0.25 * Math.sin((2 * Math.PI * t) / 2.4);
  const curls = [0.3 * base, base, base, base, 0.8 * base];
  return { wrist, curls };
}

async function main() {
  const url = arg("url");
  const frames = parseInt(arg("frames", "60"), 10);
  const out = arg("out");
  const rateMs = parseInt(arg("rate-ms", "0"), 10);
  const schema = JSON.parse(
    fs.readFileSync(new URL("../../docs/stream-v1.schema.json", import.meta.url), "utf-8"));

  const lines: string[] = [JSON.stringify({
    format: "stream-v1", rate_hz: 30, landmark_convention: "mediapipe-21",
  })];

  const ws = new WebSocket(url);
  await new Promise<void>((resolve, reject) => {
    ws.on("open", () => resolve());
    ws.on("error", reject);
  });

  for (let k = 0; k < frames; k++) {
    const { wrist, curls } = scriptedFrame(k);
    const rec = makeTrackingRecord(k / 30, wrist, synthLandmarks(curls, wrist),
                                   k === 0);
    const errors = validateTrackingRecord(rec, schema);
    if (errors.length) throw new Error(`invalid frame ${k}: ${errors.join("; ")}`);
    const line = JSON.stringify(rec);
    lines.push(line);
    ws.send(JSON.stringify({ type: "tracking", ...JSON.parse(line) }));
    if (rateMs > 0) await new Promise((r) => setTimeout(r, rateMs));
  }
  ws.send(JSON.stringify({ type: "tracking_eof" }));
  fs.writeFileSync(out, lines.join("\n") + "\n");
  await new Promise((r) => setTimeout(r, 300));
  ws.close();
  console.log(JSON.stringify({ event: "driver-done", frames, out }));
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
