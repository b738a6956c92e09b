"""Command-line interface.

Every sub-command prints a single machine-readable JSON summary line on
standard output. Delimited per-sample outputs go to --out files; optional
figures render into --plot-dir. Exit codes: 0 success, 2 usage, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np

from . import arm_ik, episode, se3, wire
from .client import RobotClient
from .kinematics import load_named_model
from .retarget import RetargetSession
from .server import DEFAULT_PORT, DEFAULT_WS_PORT, Server
from .session import SessionConfig, run_offline, run_teleop
from .streams import ActionVector, ingest, ingest_live, ingest_openxr
from .trajgen import Limits


def _summary(obj):
    print(json.dumps(obj))


def cmd_serve(args):
    limits = Limits(args.v_max, args.a_max, args.j_max)
    model = load_named_model(args.model)
    mode = "deterministic" if args.deterministic else "realtime"
    server = Server(model, limits, port=args.port, mode=mode).start()
    bridge = None
    if args.ws_port is not None:
        from .wsbridge import WsBridge
        bridge = WsBridge(server, port=args.ws_port).start()
    _summary({"event": "ready", "port": server.port,
              "ws_port": bridge.port if bridge else None,
              "mode": mode, "model": model.name})
    sys.stdout.flush()
    if args.once:
        return 0
    stop = [False]
    signal.signal(signal.SIGINT, lambda *a: stop.__setitem__(0, True))
    signal.signal(signal.SIGTERM, lambda *a: stop.__setitem__(0, True))
    while not stop[0]:
        time.sleep(0.2)
    if bridge:
        bridge.stop()
    server.stop()
    return 0


def _open_tracking(args):
    if getattr(args, "live", None):
        return ingest_live(args.live)
    if args.input.endswith(".openxr26.jsonl") or getattr(args, "openxr", False):
        return ingest_openxr(args.input)
    return ingest(args.input)


def cmd_retarget(args):
    model = load_named_model(args.hand_model)
    sess = RetargetSession(model)
    times, rows = [], []
    samples = list(_open_tracking(args))
    t0 = time.perf_counter()
    with open(args.out, "w") as out:
        for s in samples:
            q = sess.step(s.frame)
            rows.append(q)
            times.append(s.frame.t)
            out.write(json.dumps({"t": s.frame.t, "q": [float(v) for v in q]}) + "\n")
    wall = time.perf_counter() - t0
    if args.plot_dir:
        from .report import save_joint_trajectories
        save_joint_trajectories(times, np.array(rows),
                                Path(args.plot_dir) / "retarget_joints.png",
                                title="retargeted hand joints",
                                labels=model.dof_names)
    _summary({"event": "retarget", "frames": len(rows), "out": args.out,
              "solves": sess.stats.solves, "max_iter_hits": sess.stats.max_iter_hits,
              "wall_s": round(wall, 3)})
    return 0


def cmd_ik(args):
    model = load_named_model(args.arm_model)
    w = arm_ik.RedundancyWeights.defaults_for(model)
    cfg = arm_ik.IkConfig.streaming()
    q_prev = model.neutral.copy()
    ee0 = model.fk(q_prev, "ee")
    fm = se3.FrameMap.named(args.frame_map)
    wrist0 = None
    times, qs, epos, eori, objs, failures = [], [], [], [], [], 0
    with open(args.out, "w") as out:
        for s in ingest(args.targets):
            if wrist0 is None or s.engage:
                wrist0 = s.frame.wrist
            intent = se3.compute_intent(wrist0, s.frame.wrist)
            target = se3.compose_target(ee0, se3.map_intent(intent, fm))
            req = arm_ik.IkRequest(target, q_prev, model.neutral)
            try:
                sol = arm_ik.resolve(model, req, w, cfg)
                q_prev = sol.q
                rec = {"t": s.frame.t, "q": [float(v) for v in sol.q],
                       "objective": sol.objective,
                       "position_err": sol.position_err,
                       "orientation_err": sol.orientation_err}
                times.append(s.frame.t)
                qs.append(sol.q)
                epos.append(sol.position_err)
                eori.append(sol.orientation_err)
                objs.append(sol.objective)
            except arm_ik.UnreachableTargetError:
                failures += 1
                rec = {"t": s.frame.t, "unreachable": True}
            out.write(json.dumps(rec) + "\n")
    if args.plot_dir and times:
        from .report import save_ik_report, save_joint_trajectories
        save_joint_trajectories(times, np.array(qs),
                                Path(args.plot_dir) / "ik_joints.png",
                                title="arm joint solutions")
        save_ik_report(times, epos, eori, objs,
                       Path(args.plot_dir) / "ik_quality.png")
    _summary({"event": "ik", "solved": len(times), "unreachable": failures,
              "out": args.out})
    return 0


def cmd_teleop(args):
    cfg = SessionConfig.load(args.config)
    session = cfg.build()
    samples = _open_tracking(args)
    if args.addr is None:
        actions = run_offline(session, samples)
        report = session.report()
        report["event"] = "teleop-offline"
        if args.out:
            with open(args.out, "w") as fh:
                for a in actions:
                    fh.write(json.dumps(
                        {"t": a.t, "targets": [float(v) for v in a.targets]}) + "\n")
            report["out"] = args.out
    else:
        host, port = args.addr.rsplit(":", 1)
        client = RobotClient.connect((host, int(port)), wire.ROLE_COMMANDER,
                                     state_rate_hz=args.state_rate)
        try:
            report = run_teleop(session, samples, client,
                                record_dir=args.record,
                                episode_id=args.episode_id,
                                deterministic=not args.realtime)
        finally:
            client.close()
        report["event"] = "teleop"
    if args.plot_dir:
        from .report import save_joint_trajectories
        if args.record:
            meta, steps = episode.read_episode(args.record)
            save_joint_trajectories([s.t for s in steps],
                                    np.array([s.action for s in steps]),
                                    Path(args.plot_dir) / "teleop_actions.png",
                                    title="commanded joints")
    _summary(report)
    return 0


def cmd_replay(args):
    host, port = args.to.rsplit(":", 1)
    meta, steps = episode.read_episode(args.episode)
    client = RobotClient.connect((host, int(port)), wire.ROLE_COMMANDER,
                                 state_rate_hz=args.state_rate)
    sent = 0
    try:
        client.next_state()
        for s in steps:
            client.send_command(int(round(s.t * 1e6)), s.action)
            client.next_state()
            sent += 1
    finally:
        client.close()
    _summary({"event": "replay", "episode": args.episode, "steps": sent,
              "duration_s": meta.get("duration_s")})
    return 0


def cmd_bench_latency(args):
    host, port = args.addr.rsplit(":", 1)
    client = RobotClient.connect((host, int(port)), wire.ROLE_COMMANDER,
                                 state_rate_hz=30)
    neutral = np.array(client.next_state().q)
    lat_ms = []
    try:
        for k in range(1, args.n + 1):
            t0 = time.perf_counter()
            client.send_command(int(k * 1e6 / 30), neutral)
            client.next_state()
            lat_ms.append((time.perf_counter() - t0) * 1e3)
    finally:
        client.close()
    lat = np.array(lat_ms)
    stats = {"event": "bench-latency", "n": len(lat),
             "p50_us": round(float(np.percentile(lat, 50)) * 1e3, 1),
             "p99_us": round(float(np.percentile(lat, 99)) * 1e3, 1),
             "max_us": round(float(lat.max()) * 1e3, 1)}
    if args.plot_dir:
        from .report import save_latency_histogram
        save_latency_histogram(lat, Path(args.plot_dir) / "latency_hist.png")
    _summary(stats)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teleopkit",
                                description="hardware-free teleoperation pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the simulated robot I/O server")
    s.add_argument("--model", default="builtin:arm7-hand12")
    s.add_argument("--port", type=int, default=DEFAULT_PORT)
    s.add_argument("--ws-port", type=int, nargs="?", const=DEFAULT_WS_PORT,
                   default=None)
    s.add_argument("--deterministic", action="store_true")
    s.add_argument("--v-max", type=float, default=2.0)
    s.add_argument("--a-max", type=float, default=10.0)
    s.add_argument("--j-max", type=float, default=1000.0)
    s.add_argument("--once", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(fn=cmd_serve)

    s = sub.add_parser("retarget", help="offline hand retargeting over a stream")
    s.add_argument("--hand-model", default="builtin:hand12-generic")
    s.add_argument("--input", required=True)
    s.add_argument("--openxr", action="store_true",
                   help="input uses the openxr26-v1 fixture schema")
    s.add_argument("--out", required=True)
    s.add_argument("--plot-dir")
    s.set_defaults(fn=cmd_retarget)

    s = sub.add_parser("ik", help="offline arm IK over a target stream")
    s.add_argument("--arm-model", default="builtin:arm7-generic")
    s.add_argument("--targets", required=True,
                   help="stream-v1 file; wrist poses drive the end effector")
    s.add_argument("--frame-map", default="vr-to-robot-default")
    s.add_argument("--out", required=True)
    s.add_argument("--plot-dir")
    s.set_defaults(fn=cmd_ik)

    s = sub.add_parser("teleop", help="run the two-branch pipeline")
    s.add_argument("--config", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="stream-v1 tracking file")
    g.add_argument("--live", help="websocket bridge URL for live tracking")
    s.add_argument("--addr", help="robot server host:port (omit for offline)")
    s.add_argument("--record", help="episode output directory")
    s.add_argument("--episode-id", default="episode-0")
    s.add_argument("--out", help="action log (offline mode)")
    s.add_argument("--state-rate", type=int, default=30)
    s.add_argument("--realtime", action="store_true")
    s.add_argument("--plot-dir")
    s.set_defaults(fn=cmd_teleop)

    s = sub.add_parser("replay", help="replay a recorded episode to a server")
    s.add_argument("--episode", required=True)
    s.add_argument("--to", required=True, help="robot server host:port")
    s.add_argument("--state-rate", type=int, default=30)
    s.set_defaults(fn=cmd_replay)

    s = sub.add_parser("bench-latency", help="commander round-trip benchmark")
    s.add_argument("--addr", required=True)
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--plot-dir")
    s.set_defaults(fn=cmd_bench_latency)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(json.dumps({"event": "error", "error": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
