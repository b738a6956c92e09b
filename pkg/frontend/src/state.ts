/** Central console store: connection status, gizmo pose, curls, telemetry. */

import { Quat, QUAT_IDENTITY, Vec3, quatFromAxisAngle, quatMul } from "./math.js";
import { LinkPosesMessage, StateMessage } from "./protocol.js";
import { WristPose } from "./synth.js";

export interface Telemetry {
  sendRateHz: number;
  stateRateHz: number;
  roundTripMs: number | null;  // p50 over the recent window
}

const RATE_WINDOW_MS = 3000;
export const STALE_AFTER_MS = 2000;

export class ConsoleStore {
  connected = false;
  banner: string | null = "connecting";
  wrist: WristPose = { p: [0.1, 1.2, -0.35], q: { ...QUAT_IDENTITY } };
  curls: number[] = [0, 0, 0, 0, 0];
  linkPoses: LinkPosesMessage["poses"] | null = null;
  lastTracking: Vec3[] | null = null;   // ghost overlay of the last-sent hand
  framesSent = 0;

  private sendTimes: number[] = [];
  private recvTimes: number[] = [];
  private rtts: number[] = [];
  private lastServerMsgAt: number | null = null;

  onOpen(now: number) {
    this.connected = true;
    this.banner = null;
    this.lastServerMsgAt = now;
  }

  onClose() {
    this.connected = false;
    this.banner = "connection lost";
  }

  onServerMessage(msg: StateMessage | LinkPosesMessage, now: number) {
    this.lastServerMsgAt = now;
    this.recvTimes.push(now);
    this.trim(this.recvTimes, now);
    if (msg.type === "link_poses") {
      this.linkPoses = msg.poses;
    }
  }

  noteSend(now: number) {
    this.framesSent += 1;
    this.sendTimes.push(now);
    this.trim(this.sendTimes, now);
  }

  noteRoundTrip(ms: number) {
    this.rtts.push(ms);
    if (this.rtts.length > 128) this.rtts.shift();
  }

  /** Watchdog: raises the banner when the server goes quiet. */
  tick(now: number) {
    if (this.connected && this.lastServerMsgAt !== null
        && now - this.lastServerMsgAt > STALE_AFTER_MS) {
      this.banner = "connection lost";
      this.connected = false;
    }
  }

  nudgeWrist(dp: Vec3, axis: Vec3 | null = null, angle = 0) {
    this.wrist.p = [this.wrist.p[0] + dp[0], this.wrist.p[1] + dp[1],
                    this.wrist.p[2] + dp[2]];
    if (axis && angle !== 0) {
      this.wrist.q = quatMul(quatFromAxisAngle(axis, angle), this.wrist.q);
    }
  }

  setCurl(finger: number, value: number) {
    this.curls[finger] = Math.min(1, Math.max(0, value));
  }

  telemetry(now: number): Telemetry {
    const rate = (ts: number[]) =>
      ts.length < 2 ? 0 : (ts.length - 1) * 1000 / Math.max(now - ts[0], 1);
    let rtt: number | null = null;
    if (this.rtts.length) {
      const sorted = [...this.rtts].sort((a, b) => a - b);
      rtt = sorted[Math.floor(sorted.length / 2)];
    }
    return {
      sendRateHz: rate(this.sendTimes),
      stateRateHz: rate(this.recvTimes),
      roundTripMs: rtt,
    };
  }

  private trim(ts: number[], now: number) {
    while (ts.length && now - ts[0] > RATE_WINDOW_MS) ts.shift();
  }
}
