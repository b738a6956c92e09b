import * as fs from "node:fs";
import { describe, expect, it } from "vitest";

import { QUAT_IDENTITY } from "../src/math.js";
import { makeTrackingRecord, validateTrackingRecord } from "../src/protocol.js";
import { synthLandmarks } from "../src/synth.js";

const schema = JSON.parse(
  fs.readFileSync(new URL("../../docs/stream-v1.schema.json", import.meta.url), "utf-8"));

const wrist = { p: [0.1, 1.2, -0.3] as [number, number, number],
                q: { ...QUAT_IDENTITY } };

describe("validateTrackingRecord against the shared schema", () => {
  it("accepts a synthesized frame", () => {
    const rec = makeTrackingRecord(0.5, wrist, synthLandmarks([0, 0, 0, 0, 0], wrist));
    expect(validateTrackingRecord(rec, schema)).toEqual([]);
  });

  it("rejects 20 landmarks", () => {
    const rec = makeTrackingRecord(0.5, wrist, synthLandmarks([0, 0, 0, 0, 0], wrist));
    rec.landmarks = rec.landmarks.slice(0, 20);
    const errors = validateTrackingRecord(rec, schema);
    expect(errors.some((e) => e.includes("landmarks"))).toBe(true);
  });

  it("rejects a non-unit wrist quaternion", () => {
    const rec = makeTrackingRecord(0.5, wrist, synthLandmarks([0, 0, 0, 0, 0], wrist));
    rec.wrist.q = [1, 0.5, 0, 0];
    const errors = validateTrackingRecord(rec, schema);
    expect(errors.some((e) => e.includes("unit quaternion"))).toBe(true);
  });

  it("rejects missing fields and bad shapes", () => {
    expect(validateTrackingRecord({ t: 0 } as any, schema).length).toBeGreaterThan(0);
    const rec = makeTrackingRecord(0.5, wrist, synthLandmarks([0, 0, 0, 0, 0], wrist));
    (rec.landmarks[3] as number[]) = [1, 2];
    expect(validateTrackingRecord(rec, schema).length).toBeGreaterThan(0);
  });

  it("rejects non-finite numbers", () => {
    const rec = makeTrackingRecord(0.5, wrist, synthLandmarks([0, 0, 0, 0, 0], wrist));
    rec.landmarks[0][0] = Number.NaN;
    expect(validateTrackingRecord(rec, schema).length).toBeGreaterThan(0);
  });
});
