#!/usr/bin/env python3
"""Regenerate the committed tracking fixtures under fixtures/.

stream_wave_3s.jsonl: 90 frames (3 s at 30 Hz) of a synthetic hand waving
through a few centimeters of wrist motion with finger curls that pinch the
thumb against the index mid-stream, then settle to rest for the last half
second. openxr26_wave.jsonl carries the same motion as 26-joint records.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from teleopkit.retarget import HandFrame  # noqa: E402
from teleopkit.se3 import Pose, Quat, quat_mul  # noqa: E402
from teleopkit.streams import (  # noqa: E402
    LANDMARK_CONVENTION,
    OPENXR26_FORMAT,
    STREAM_FORMAT,
    TrackingSample,
    write_stream,
)

OUT = Path(__file__).resolve().parents[1] / "fixtures"

# canonical flat hand (wrist at origin, fingers along +x, palm normal +z)
CANON = np.array([
    [0.000, 0.000, 0.0],
    [0.020, -0.030, 0.0], [0.045, -0.050, 0.0], [0.065, -0.060, 0.0], [0.085, -0.070, 0.0],
    [0.085, -0.025, 0.0], [0.125, -0.025, 0.0], [0.150, -0.025, 0.0], [0.172, -0.025, 0.0],
    [0.090, 0.000, 0.0], [0.133, 0.000, 0.0], [0.160, 0.000, 0.0], [0.184, 0.000, 0.0],
    [0.085, 0.022, 0.0], [0.125, 0.022, 0.0], [0.150, 0.022, 0.0], [0.170, 0.022, 0.0],
    [0.078, 0.042, 0.0], [0.112, 0.042, 0.0], [0.132, 0.042, 0.0], [0.152, 0.042, 0.0],
])

FINGER_CHAINS = [(1, 2, 3, 4), (5, 6, 7, 8), (9, 10, 11, 12),
                 (13, 14, 15, 16), (17, 18, 19, 20)]


def curled_landmarks(curl: float, pinch: float) -> np.ndarray:
    """Curl fingers toward the palm; pinch pulls the thumb to the index tip."""
    lm = CANON.copy()
    for chain in FINGER_CHAINS:
        base = lm[chain[0]].copy()
        for depth, idx in enumerate(chain[1:], start=1):
            ang = curl * 0.5 * depth
            rel = CANON[idx] - CANON[chain[0]]
            c, s = np.cos(ang), np.sin(ang)
            lm[idx] = base + [rel[0] * c, rel[1], -rel[0] * s]
    if pinch > 0:
        lm[4] = lm[4] + pinch * (lm[8] - lm[4])
    return lm


def envelope(t: float, duration: float = 3.0, settle: float = 0.5) -> float:
    """Smooth motion envelope that reaches zero slope before the rest tail."""
    active = duration - settle
    if t >= active:
        return 0.0
    return float(np.sin(np.pi * t / active) ** 2)


def make_samples(n=90, rate=30.0):
    samples = []
    p0 = np.array([0.10, 1.20, -0.35])
    q0 = Quat.from_axis_angle([0, 1, 0], 0.3)
    for k in range(n):
        t = k / rate
        env = envelope(t)
        dp = env * np.array([0.03 * np.sin(2 * np.pi * t / 1.5),
                             0.02 * np.sin(2 * np.pi * t / 2.1),
                             0.025 * np.cos(2 * np.pi * t / 1.7) - 0.025])
        dq = quat_mul(
            Quat.from_axis_angle([0, 0, 1], env * 0.20 * np.sin(2 * np.pi * t / 2.0)),
            Quat.from_axis_angle([1, 0, 0], env * 0.15 * np.sin(2 * np.pi * t / 1.3)))
        wrist = Pose(p0 + dp, quat_mul(dq, q0))
        curl = env * (0.45 + 0.35 * np.sin(2 * np.pi * t / 2.4))
        pinch = env * max(0.0, np.sin(2 * np.pi * (t - 0.8) / 2.0)) * 0.95
        canon = curled_landmarks(max(curl, 0.0), pinch)
        world = canon @ wrist.q.to_matrix().T + wrist.p
        samples.append(TrackingSample(HandFrame(t, wrist, world), engage=(k == 0)))
    return samples


def write_openxr(path, samples):
    """The same frames in the 26-joint naming (extra metacarpals synthesized)."""
    from teleopkit.streams import DEFAULT_OPENXR26_MAP
    inv = {v: k for k, v in DEFAULT_OPENXR26_MAP.items()}
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": OPENXR26_FORMAT}) + "\n")
        for s in samples:
            lm = s.frame.landmarks
            joints = {}
            for name, idx in inv.items():
                joints[name] = [float(v) for v in lm[idx]]
            joints["palm"] = [float(v) for v in lm[[0, 5, 9, 13, 17]].mean(axis=0)]
            for finger, mcp in (("index", 5), ("middle", 9), ("ring", 13), ("little", 17)):
                joints[f"{finger}_metacarpal"] = [
                    float(v) for v in (0.4 * lm[mcp] + 0.6 * lm[0])]
            rec = {"t": s.frame.t,
                   "wrist": {"p": [float(v) for v in s.frame.wrist.p],
                             "q": [s.frame.wrist.q.w, s.frame.wrist.q.x,
                                   s.frame.wrist.q.y, s.frame.wrist.q.z]},
                   "joints": joints}
            if s.engage:
                rec["engage"] = True
            fh.write(json.dumps(rec) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    samples = make_samples()
    write_stream(OUT / "stream_wave_3s.jsonl", samples)
    write_openxr(OUT / "openxr26_wave.jsonl", samples)
    (OUT / "session.json").write_text(json.dumps({
        "arm_model": "builtin:arm7-generic",
        "hand_model": "builtin:hand12-generic",
        "frame_map": "vr-to-robot-default",
        "weights": {"w_m": 1.0, "w_n": 0.5, "w_c": 2.0},
        "retarget": {"ema_alpha": 0.6},
        "task": "wave-demo",
    }, indent=1) + "\n")
    print("wrote", OUT / "stream_wave_3s.jsonl")
    print("wrote", OUT / "openxr26_wave.jsonl")
    print("wrote", OUT / "session.json")


if __name__ == "__main__":
    main()
