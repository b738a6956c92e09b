/** Tiny 3D-to-canvas projection: the console renders the robot purely from
 * server link poses (no client-side kinematics to drift). */

import { Vec3, vsub } from "./math.js";
import { LinkPosesMessage } from "./protocol.js";

export interface Camera {
  target: Vec3;
  distance: number;
  yaw: number;    // radians about +z
  pitch: number;  // radians above the horizon
  fov: number;    // vertical, radians
}

export const DEFAULT_CAMERA: Camera = {
  target: [0.3, 0, 0.4], distance: 1.6, yaw: 0.7, pitch: 0.35, fov: 0.9,
};

/** World point to normalized screen coordinates ([-1,1], y up); null when
 * behind the camera. */
export function project(p: Vec3, cam: Camera): [number, number] | null {
  const cy = Math.cos(cam.yaw), sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  const eye: Vec3 = [
    cam.target[0] + cam.distance * cp * cy,
    cam.target[1] + cam.distance * cp * sy,
    cam.target[2] + cam.distance * sp,
  ];
  const d = vsub(p, eye);
  // camera basis: forward toward target, right, up
  const f: Vec3 = [-cp * cy, -cp * sy, -sp];
  const r: Vec3 = [-sy, cy, 0];
  const u: Vec3 = [f[1] * r[2] - f[2] * r[1], f[2] * r[0] - f[0] * r[2],
                   f[0] * r[1] - f[1] * r[0]];
  const zc = d[0] * f[0] + d[1] * f[1] + d[2] * f[2];
  if (zc <= 1e-6) return null;
  const xc = d[0] * r[0] + d[1] * r[1] + d[2] * r[2];
  const yc = d[0] * u[0] + d[1] * u[1] + d[2] * u[2];
  const scale = 1 / Math.tan(cam.fov / 2);
  return [scale * xc / zc, scale * yc / zc];
}

const ARM_CHAIN = ["joint-base", "j1", "j2", "j3", "j4", "j5", "j6", "j7", "ee"];
const HAND_CHAINS = [
  ["wrist", "thumb_tip"],
  ["wrist", "index_mcp", "index_tip"],
  ["wrist", "middle_mcp", "middle_tip"],
  ["wrist", "ring_mcp", "ring_tip"],
  ["wrist", "pinky_mcp", "pinky_tip"],
];

export interface Canvas2DLike {
  canvasWidth: number;
  canvasHeight: number;
  line(x0: number, y0: number, x1: number, y1: number, color: string, width: number): void;
  dot(x: number, y: number, radius: number, color: string): void;
}

function toPixels(ndc: [number, number], ctx: Canvas2DLike): [number, number] {
  const s = Math.min(ctx.canvasWidth, ctx.canvasHeight) / 2;
  return [ctx.canvasWidth / 2 + ndc[0] * s, ctx.canvasHeight / 2 - ndc[1] * s];
}

export function drawRobot(ctx: Canvas2DLike, poses: LinkPosesMessage["poses"],
                          cam: Camera) {
  const find = (name: string): Vec3 | null => {
    const entry = poses[name];
    return entry ? [entry.p[0], entry.p[1], entry.p[2]] : null;
  };
  const polyline = (names: string[], color: string, width: number) => {
    let prev: [number, number] | null = null;
    for (const n of names) {
      const p = find(n);
      if (!p) { prev = null; continue; }
      const ndc = project(p, cam);
      if (!ndc) { prev = null; continue; }
      const px = toPixels(ndc, ctx);
      if (prev) ctx.line(prev[0], prev[1], px[0], px[1], color, width);
      ctx.dot(px[0], px[1], width + 1, color);
      prev = px;
    }
  };
  polyline(ARM_CHAIN.filter((n) => n in poses || n === "joint-base"), "#58a6ff", 3);
  for (const chain of HAND_CHAINS) polyline(chain, "#f0883e", 2);
}

export function drawGhostHand(ctx: Canvas2DLike, landmarks: Vec3[] | null,
                              cam: Camera) {
  if (!landmarks) return;
  for (const lm of landmarks) {
    const ndc = project(lm, cam);
    if (!ndc) continue;
    const [x, y] = toPixels(ndc, ctx);
    ctx.dot(x, y, 2, "rgba(139, 148, 158, 0.8)");
  }
}
