/** 30 Hz tracking send loop, decoupled from rendering.
 *
 * Timers and transport are injected so tests can drive virtual time. Every
 * outbound frame is synthesized from the store's gizmo state, validated
 * against the shared stream-v1 schema, and dropped (loudly) rather than
 * sent when invalid. The loop pauses while disconnected and re-engages on
 * the first frame after a reconnect so the pipeline re-calibrates.
 */

import { makeTrackingRecord, validateTrackingRecord } from "./protocol.js";
import { ConsoleStore } from "./state.js";
import { synthLandmarks } from "./synth.js";

export const SEND_PERIOD_MS = 1000 / 30;

export interface LoopDeps {
  send: (json: string) => void;
  now: () => number;                     // milliseconds
  setInterval: (fn: () => void, ms: number) => unknown;
  clearInterval: (handle: unknown) => void;
  schema: any;
  onInvalid?: (errors: string[]) => void;
}

export class SendLoop {
  private handle: unknown = null;
  private t0: number | null = null;
  private needEngage = true;

  constructor(private store: ConsoleStore, private deps: LoopDeps) {}

  start() {
    if (this.handle !== null) return;
    this.handle = this.deps.setInterval(() => this.step(), SEND_PERIOD_MS);
  }

  stop() {
    if (this.handle !== null) {
      this.deps.clearInterval(this.handle);
      this.handle = null;
    }
  }

  /** One timer tick: synthesize, validate, send. */
  step() {
    const now = this.deps.now();
    this.store.tick(now);
    if (!this.store.connected) {
      this.needEngage = true;  // re-calibrate after reconnect
      return;
    }
    if (this.t0 === null) this.t0 = now;
    const t = (now - this.t0) / 1000;
    const landmarks = synthLandmarks(this.store.curls, this.store.wrist);
    const rec = makeTrackingRecord(t, this.store.wrist, landmarks, this.needEngage);
    const errors = validateTrackingRecord(rec, this.deps.schema);
    if (errors.length) {
      this.deps.onInvalid?.(errors);
      return;
    }
    this.deps.send(JSON.stringify({ type: "tracking", ...rec }));
    this.store.lastTracking = landmarks;
    this.store.noteSend(now);
    this.needEngage = false;
  }
}
