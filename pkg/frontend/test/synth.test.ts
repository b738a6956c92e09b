import * as fs from "node:fs";
import { describe, expect, it } from "vitest";

import { quatFromAxisAngle, quatRotate, vadd, vnorm, vsub } from "../src/math.js";
import { PALM_CENTER, synthCanonicalLandmarks, synthLandmarks } from "../src/synth.js";

const TIPS = [4, 8, 12, 16, 20];

describe("synthCanonicalLandmarks", () => {
  it("matches the committed flat-hand golden fixture", () => {
    const golden = JSON.parse(
      fs.readFileSync(new URL("../fixtures/flat_hand.json", import.meta.url), "utf-8"));
    const flat = synthCanonicalLandmarks([0, 0, 0, 0, 0]);
    expect(flat.length).toBe(21);
    for (let i = 0; i < 21; i++) {
      for (let k = 0; k < 3; k++) {
        expect(flat[i][k]).toBeCloseTo(golden[i][k], 12);
      }
    }
  });

  it("puts every fingertip within 0.04 m of the palm center at full fist", () => {
    const fist = synthCanonicalLandmarks([1, 1, 1, 1, 1]);
    for (const t of TIPS) {
      expect(vnorm(vsub(fist[t], PALM_CENTER))).toBeLessThan(0.04);
    }
  });

  it("keeps the open hand out of the pinch band", () => {
    const flat = synthCanonicalLandmarks([0, 0, 0, 0, 0]);
    for (let i = 0; i < TIPS.length; i++) {
      for (let j = i + 1; j < TIPS.length; j++) {
        expect(vnorm(vsub(flat[TIPS[i]], flat[TIPS[j]]))).toBeGreaterThan(0.032);
      }
    }
  });

  it("is deterministic", () => {
    const a = synthCanonicalLandmarks([0.3, 0.5, 0.7, 0.2, 0.9]);
    const b = synthCanonicalLandmarks([0.3, 0.5, 0.7, 0.2, 0.9]);
    expect(a).toEqual(b);
  });

  it("rejects out-of-range curls", () => {
    expect(() => synthCanonicalLandmarks([0, 0, 0, 0, 1.2])).toThrow();
    expect(() => synthCanonicalLandmarks([0, 0, 0])).toThrow();
  });
});

describe("synthLandmarks", () => {
  it("applies the wrist pose as a rigid transform", () => {
    const curls = [0.2, 0.4, 0.6, 0.1, 0.8];
    const wrist = { p: [0.3, -0.2, 1.1] as [number, number, number],
                    q: quatFromAxisAngle([0.2, 1.0, -0.4], 0.9) };
    const canonical = synthCanonicalLandmarks(curls);
    const world = synthLandmarks(curls, wrist);
    for (let i = 0; i < 21; i++) {
      const expected = vadd(quatRotate(wrist.q, canonical[i]), wrist.p);
      for (let k = 0; k < 3; k++) {
        expect(world[i][k]).toBeCloseTo(expected[k], 12);
      }
    }
    // rigid: pairwise distances preserved
    const d0 = vnorm(vsub(canonical[4], canonical[20]));
    const d1 = vnorm(vsub(world[4], world[20]));
    expect(d1).toBeCloseTo(d0, 12);
  });
});
