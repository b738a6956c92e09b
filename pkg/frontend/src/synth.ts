/** Deterministic toy-hand landmark synthesizer.
 *
 * Five curl values in [0, 1] flex each finger chain by curl * per-joint
 * maximum; curl 0 is the flat reference hand, curl 1 a full fist with every
 * fingertip near the palm center. Landmarks come out in the 21-point
 * MediaPipe-style ordering (0 wrist; 4/8/12/16/20 fingertips), expressed in
 * the canonical palm frame and then rigidly placed at the wrist pose.
 */

import { Quat, Vec3, quatRotate, vadd } from "./math.js";

interface FingerSpec {
  base: Vec3;              // MCP position in the palm frame
  dir: [number, number];   // unit direction in the x-y plane
  segments: [number, number, number];
  maxAngles: [number, number, number];
  converge: number;        // z-rotation toward the centerline at full curl
}

// the open hand mirrors the generic robot hand's spread (outside the
// pinch-projection band); fingers converge toward the palm centerline as
// they curl, like a real fist
const FINGERS: FingerSpec[] = [
  { base: [0.020, -0.040, 0], dir: [0.622, -0.783], segments: [0.035, 0.032, 0.030],
    maxAngles: [1.7, 1.7, 0.5], converge: 1.40 },                        // thumb
  { base: [0.090, -0.034, 0], dir: [1, 0], segments: [0.040, 0.025, 0.022],
    maxAngles: [1.7, 1.7, 0.5], converge: 0.78 },                        // index
  { base: [0.090, 0.000, 0], dir: [1, 0], segments: [0.043, 0.027, 0.024],
    maxAngles: [1.7, 1.7, 0.5], converge: 0.0 },                         // middle
  { base: [0.085, 0.034, 0], dir: [1, 0], segments: [0.040, 0.025, 0.022],
    maxAngles: [1.7, 1.7, 0.5], converge: -0.84 },                       // ring
  { base: [0.078, 0.068, 0], dir: [1, 0], segments: [0.034, 0.022, 0.020],
    maxAngles: [1.7, 1.7, 0.5], converge: -1.24 },                       // pinky
];

export const PALM_CENTER: Vec3 = [0.055, 0.0, 0.0];

export function synthCanonicalLandmarks(curls: number[]): Vec3[] {
  if (curls.length !== 5) throw new Error("need 5 curl values");
  for (const c of curls) {
    if (!(c >= 0 && c <= 1)) throw new Error(`curl ${c} outside [0, 1]`);
  }
  const out: Vec3[] = [[0, 0, 0]];
  FINGERS.forEach((f, fi) => {
    const curl = curls[fi];
    const conv = curl * f.converge;  // rotate the finger plane toward y = 0
    const cc = Math.cos(conv), sc = Math.sin(conv);
    const dir: [number, number] = [
      f.dir[0] * cc + f.dir[1] * sc,
      -f.dir[0] * sc + f.dir[1] * cc,
    ];
    let p: Vec3 = [...f.base];
    out.push([...p]);
    let angle = 0;
    for (let k = 0; k < 3; k++) {
      angle += curl * f.maxAngles[k];
      const c = Math.cos(angle), s = Math.sin(angle);
      // flexion folds the segment out of the palm plane toward -z
      const step: Vec3 = [
        dir[0] * f.segments[k] * c,
        dir[1] * f.segments[k] * c,
        -f.segments[k] * s,
      ];
      p = vadd(p, step);
      out.push([...p]);
    }
  });
  return out; // 1 wrist + 5 * (MCP + 3 joints) = 21
}

export interface WristPose { p: Vec3; q: Quat; }

export function synthLandmarks(curls: number[], wrist: WristPose): Vec3[] {
  return synthCanonicalLandmarks(curls).map(
    (lm) => vadd(quatRotate(wrist.q, lm), wrist.p));
}
