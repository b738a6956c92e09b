/** Message types for the wire-v1 JSON mirror plus stream-v1 validation.
 *
 * Outbound tracking frames are validated against the shared JSON schema
 * file (docs/stream-v1.schema.json); callers load the schema once and pass
 * it in, so browser and node consume the identical artifact.
 */

import { Quat, Vec3, quatToWxyz } from "./math.js";
import { WristPose } from "./synth.js";

export interface TrackingRecord {
  t: number;
  wrist: { p: number[]; q: number[] };
  landmarks: number[][];
  engage?: boolean;
}

export interface TrackingMessage extends TrackingRecord { type: "tracking"; }

export interface StateMessage {
  type: "state";
  timestamp_us: number;
  q: number[];
  dq: number[];
}

export interface LinkPosesMessage {
  type: "link_poses";
  timestamp_us: number;
  poses: Record<string, { p: number[]; q: number[] }>;
}

export type ServerMessage =
  | StateMessage
  | LinkPosesMessage
  | { type: "hello"; role: string; state_rate_hz: number }
  | { type: "error"; code: number; text: string }
  | { type: "heartbeat"; timestamp_us: number }
  | TrackingMessage
  | { type: "tracking_eof" };

export function makeTrackingRecord(
  t: number, wrist: WristPose, landmarks: Vec3[], engage = false,
): TrackingRecord {
  const rec: TrackingRecord = {
    t,
    wrist: { p: [...wrist.p], q: quatToWxyz(wrist.q) },
    landmarks: landmarks.map((l) => [...l]),
  };
  if (engage) rec.engage = true;
  return rec;
}

/** Interpreter for the JSON-schema subset the shared schemas use. */
export function validateAgainstSchema(
  value: unknown, schema: any, path = "$",
): string[] {
  const errors: string[] = [];
  const fail = (msg: string) => errors.push(`${path}: ${msg}`);

  if (schema.const !== undefined && value !== schema.const) {
    fail(`expected ${JSON.stringify(schema.const)}`);
    return errors;
  }
  if (schema.enum !== undefined && !schema.enum.includes(value)) {
    fail(`expected one of ${JSON.stringify(schema.enum)}`);
    return errors;
  }
  switch (schema.type) {
    case "number":
    case "integer":
      if (typeof value !== "number" || !Number.isFinite(value)) {
        fail("expected a finite number");
        return errors;
      }
      if (schema.type === "integer" && !Number.isInteger(value)) fail("expected an integer");
      if (schema.minimum !== undefined && value < schema.minimum) {
        fail(`below minimum ${schema.minimum}`);
      }
      break;
    case "boolean":
      if (typeof value !== "boolean") fail("expected a boolean");
      break;
    case "string":
      if (typeof value !== "string") fail("expected a string");
      break;
    case "array": {
      if (!Array.isArray(value)) {
        fail("expected an array");
        return errors;
      }
      if (schema.minItems !== undefined && value.length < schema.minItems) {
        fail(`expected ${schema.minItems}, got ${value.length}`);
      }
      if (schema.maxItems !== undefined && value.length > schema.maxItems) {
        fail(`expected ${schema.maxItems}, got ${value.length}`);
      }
      if (schema.items) {
        value.forEach((v, i) =>
          errors.push(...validateAgainstSchema(v, schema.items, `${path}[${i}]`)));
      }
      break;
    }
    case "object": {
      if (typeof value !== "object" || value === null || Array.isArray(value)) {
        fail("expected an object");
        return errors;
      }
      const obj = value as Record<string, unknown>;
      for (const req of schema.required ?? []) {
        if (!(req in obj)) fail(`missing required field ${req}`);
      }
      for (const [key, sub] of Object.entries(schema.properties ?? {})) {
        if (key in obj) {
          errors.push(...validateAgainstSchema(obj[key], sub, `${path}.${key}`));
        }
      }
      break;
    }
    default:
      break;
  }
  return errors;
}

/** Full outbound-frame check: shared schema plus the unit-quaternion rule. */
export function validateTrackingRecord(rec: TrackingRecord, schema: any): string[] {
  const errors = validateAgainstSchema(rec, schema);
  if (errors.length === 0) {
    const [w, x, y, z] = rec.wrist.q;
    const n = Math.hypot(w, x, y, z);
    if (Math.abs(n - 1) > 1e-6) {
      errors.push(`$.wrist.q: not a unit quaternion (norm ${n})`);
    }
  }
  return errors;
}
