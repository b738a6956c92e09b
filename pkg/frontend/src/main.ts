/** Browser entry: wires the store, send loop, renderer, and WebSocket. */

import { DEFAULT_CAMERA, drawGhostHand, drawRobot, Canvas2DLike } from "./render.js";
import { SendLoop } from "./sendloop.js";
import { ConsoleStore } from "./state.js";

const WS_URL = new URLSearchParams(location.search).get("ws")
  ?? "ws://127.0.0.1:47854/ws";

async function boot() {
  const store = new ConsoleStore();
  const schema = await (await fetch("../docs/stream-v1.schema.json")).json();
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const g = canvas.getContext("2d")!;
  const banner = document.getElementById("banner")!;
  const telemetry = document.getElementById("telemetry")!;
  const cam = { ...DEFAULT_CAMERA };

  let ws: WebSocket | null = null;
  const connect = () => {
    ws = new WebSocket(WS_URL);
    ws.onopen = () => {
      store.onOpen(performance.now());
      ws!.send(JSON.stringify({ type: "hello", role: "observer",
                                state_rate_hz: 30 }));
    };
    ws.onclose = () => {
      store.onClose();
      setTimeout(connect, 1000);
    };
    ws.onmessage = (ev) => {
      const msg = JSON.parse(ev.data);
      if (msg.type === "state" || msg.type === "link_poses") {
        store.onServerMessage(msg, performance.now());
      }
    };
  };
  connect();

  const loop = new SendLoop(store, {
    send: (json) => { if (ws && ws.readyState === WebSocket.OPEN) ws.send(json); },
    now: () => performance.now(),
    setInterval: (fn, ms) => window.setInterval(fn, ms),
    clearInterval: (h) => window.clearInterval(h as number),
    schema,
    onInvalid: (errors) => console.error("invalid tracking frame", errors),
  });
  loop.start();

  // wrist gizmo: WASD + RF translate, QE yaw; sliders curl the fingers
  const STEP = 0.01;
  window.addEventListener("keydown", (ev) => {
    const k = ev.key.toLowerCase();
    if (k === "w") store.nudgeWrist([STEP, 0, 0]);
    if (k === "s") store.nudgeWrist([-STEP, 0, 0]);
    if (k === "a") store.nudgeWrist([0, STEP, 0]);
    if (k === "d") store.nudgeWrist([0, -STEP, 0]);
    if (k === "r") store.nudgeWrist([0, 0, STEP]);
    if (k === "f") store.nudgeWrist([0, 0, -STEP]);
    if (k === "q") store.nudgeWrist([0, 0, 0], [0, 0, 1], 0.05);
    if (k === "e") store.nudgeWrist([0, 0, 0], [0, 0, 1], -0.05);
  });
  document.querySelectorAll<HTMLInputElement>("input[data-finger]").forEach((el) => {
    el.addEventListener("input", () => {
      store.setCurl(parseInt(el.dataset.finger!, 10), parseFloat(el.value));
    });
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (ev.buttons & 1) {
      cam.yaw -= ev.movementX * 0.01;
      cam.pitch = Math.min(1.4, Math.max(-1.4, cam.pitch + ev.movementY * 0.01));
    }
  });

  const ctx: Canvas2DLike = {
    get canvasWidth() { return canvas.width; },
    get canvasHeight() { return canvas.height; },
    line(x0, y0, x1, y1, color, width) {
      g.strokeStyle = color;
      g.lineWidth = width;
      g.beginPath();
      g.moveTo(x0, y0);
      g.lineTo(x1, y1);
      g.stroke();
    },
    dot(x, y, radius, color) {
      g.fillStyle = color;
      g.beginPath();
      g.arc(x, y, radius, 0, 2 * Math.PI);
      g.fill();
    },
  };

  const render = () => {
    g.clearRect(0, 0, canvas.width, canvas.height);
    if (store.linkPoses) drawRobot(ctx, store.linkPoses, cam);
    drawGhostHand(ctx, store.lastTracking, cam);
    banner.textContent = store.banner ?? "";
    banner.style.display = store.banner ? "block" : "none";
    const t = store.telemetry(performance.now());
    telemetry.textContent =
      `send ${t.sendRateHz.toFixed(1)} Hz | state ${t.stateRateHz.toFixed(1)} Hz`
      + (t.roundTripMs !== null ? ` | rtt p50 ${t.roundTripMs.toFixed(1)} ms` : "");
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

boot();
