"""Tracking stream ingestion: the stream-v1 file format, the openxr-26
fixture converter, and the live WebSocket tracking source.

stream-v1 is newline-delimited JSON. The first line is a header
``{"format": "stream-v1", "rate_hz": 30, "landmark_convention":
"mediapipe-21"}``; every following line is one sample
``{"t": seconds, "wrist": {"p": [x,y,z], "q": [w,x,y,z]}, "landmarks":
[[x,y,z] * 21]}`` with an optional ``"engage": true`` flag marking a
calibration instant (the first record engages implicitly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .retarget import HandFrame
from .se3 import Pose, Quat

STREAM_FORMAT = "stream-v1"
LANDMARK_CONVENTION = "mediapipe-21"


@dataclass
class ActionVector:
    """One 19-dimensional joint target (7 arm + 12 hand) with its timestamp."""
    t: float
    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float).reshape(19)


class SchemaError(ValueError):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"SCHEMA at line {line}: {detail}")


class NonMonotoneTimeError(ValueError):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"NON_MONOTONE_TIME at line {line}: {detail}")


@dataclass
class TrackingSample:
    frame: HandFrame
    engage: bool = False


def parse_record(obj, line: int) -> TrackingSample:
    """Validate one stream-v1 record object."""
    try:
        t = float(obj["t"])
        wrist = obj["wrist"]
        p = np.asarray(wrist["p"], dtype=float)
        qv = np.asarray(wrist["q"], dtype=float)
        lms = np.asarray(obj["landmarks"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(line, f"bad record: {exc}") from None
    if p.shape != (3,):
        raise SchemaError(line, f"wrist.p: expected 3 floats, got shape {p.shape}")
    if qv.shape != (4,):
        raise SchemaError(line, f"wrist.q: expected 4 floats (wxyz), got shape {qv.shape}")
    if abs(float(np.linalg.norm(qv)) - 1.0) > 1e-6:
        raise SchemaError(line, f"wrist.q: not a unit quaternion (norm {np.linalg.norm(qv):.8f})")
    if lms.shape != (21, 3):
        raise SchemaError(line, f"landmarks: expected 21, got "
                                f"{lms.shape[0] if lms.ndim == 2 else lms.shape}")
    try:
        frame = HandFrame(t, Pose(p, Quat.from_wxyz(qv)), lms)
    except ValueError as exc:
        raise SchemaError(line, str(exc)) from None
    return TrackingSample(frame, bool(obj.get("engage", False)))


def ingest(path):
    """Validated stream of TrackingSamples from a stream-v1 file."""
    with open(path) as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise SchemaError(1, f"header is not JSON: {exc}") from None
        if header.get("format") != STREAM_FORMAT:
            raise SchemaError(1, f"unsupported format {header.get('format')!r}")
        if header.get("landmark_convention", LANDMARK_CONVENTION) != LANDMARK_CONVENTION:
            raise SchemaError(1, f"unsupported landmark convention "
                                 f"{header.get('landmark_convention')!r}")
        last_t = -np.inf
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(line_no, f"not JSON: {exc}") from None
            sample = parse_record(obj, line_no)
            if sample.frame.t < last_t:
                raise NonMonotoneTimeError(
                    line_no, f"t={sample.frame.t} after t={last_t}")
            last_t = sample.frame.t
            yield sample


def write_stream(path, samples, rate_hz: int = 30):
    """Write TrackingSamples (or HandFrames) as a stream-v1 file."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": STREAM_FORMAT, "rate_hz": rate_hz,
                             "landmark_convention": LANDMARK_CONVENTION}) + "\n")
        for s in samples:
            frame = s.frame if isinstance(s, TrackingSample) else s
            engage = s.engage if isinstance(s, TrackingSample) else False
            rec = {
                "t": frame.t,
                "wrist": {"p": [float(v) for v in frame.wrist.p],
                          "q": [frame.wrist.q.w, frame.wrist.q.x,
                                frame.wrist.q.y, frame.wrist.q.z]},
                "landmarks": [[float(v) for v in row] for row in frame.landmarks],
            }
            if engage:
                rec["engage"] = True
            fh.write(json.dumps(rec) + "\n")


def ingest_live(ws_url: str, timeout: float = 30.0):
    """TrackingSamples from a WebSocket bridge, identical downstream to file
    input. Subscribes to the bridge's tracking topic and yields until the
    connection closes."""
    from websockets.sync.client import connect as ws_connect

    with ws_connect(ws_url) as ws:
        ws.send(json.dumps({"type": "subscribe", "topics": ["tracking"]}))
        line_no = 0
        last_t = -np.inf
        while True:
            try:
                raw = ws.recv(timeout=timeout)
            except TimeoutError:
                return
            except Exception:
                return
            msg = json.loads(raw)
            if msg.get("type") == "tracking_eof":
                return
            if msg.get("type") != "tracking":
                continue
            line_no += 1
            sample = parse_record(msg, line_no)
            if sample.frame.t < last_t:
                raise NonMonotoneTimeError(line_no, f"t={sample.frame.t}")
            last_t = sample.frame.t
            yield sample


# -- openxr-26 fixture conversion ---------------------------------------------

OPENXR26_FORMAT = "openxr26-v1"

OPENXR26_JOINTS = [
    "palm", "wrist",
    "thumb_metacarpal", "thumb_proximal", "thumb_distal", "thumb_tip",
    "index_metacarpal", "index_proximal", "index_intermediate", "index_distal", "index_tip",
    "middle_metacarpal", "middle_proximal", "middle_intermediate", "middle_distal", "middle_tip",
    "ring_metacarpal", "ring_proximal", "ring_intermediate", "ring_distal", "ring_tip",
    "little_metacarpal", "little_proximal", "little_intermediate", "little_distal", "little_tip",
]

# mediapipe-21 index -> source joint name; metacarpals are dropped except the
# thumb's, which stands in for the thumb CMC landmark
DEFAULT_OPENXR26_MAP = {
    0: "wrist",
    1: "thumb_metacarpal", 2: "thumb_proximal", 3: "thumb_distal", 4: "thumb_tip",
    5: "index_proximal", 6: "index_intermediate", 7: "index_distal", 8: "index_tip",
    9: "middle_proximal", 10: "middle_intermediate", 11: "middle_distal", 12: "middle_tip",
    13: "ring_proximal", 14: "ring_intermediate", 15: "ring_distal", 16: "ring_tip",
    17: "little_proximal", 18: "little_intermediate", 19: "little_distal", 20: "little_tip",
}


class MissingJointError(KeyError):
    def __init__(self, name: str):
        self.joint = name
        super().__init__(f"MISSING_JOINT: {name}")


def convert_openxr(record: dict, mapping: dict | None = None) -> TrackingSample:
    """One openxr-26 fixture record into a 21-landmark TrackingSample.

    The mapping table (mediapipe index -> joint name) is configuration, so
    alternative skeleton enumerations only need a different table.
    """
    mapping = mapping or DEFAULT_OPENXR26_MAP
    joints = record.get("joints", {})
    lms = np.zeros((21, 3))
    for idx in range(21):
        name = mapping[idx]
        if name not in joints:
            raise MissingJointError(name)
        lms[idx] = np.asarray(joints[name], dtype=float)
    wrist = record.get("wrist")
    if wrist is not None:
        pose = Pose(np.asarray(wrist["p"], dtype=float),
                    Quat.from_wxyz(wrist["q"]))
    else:
        pose = Pose(lms[0].copy(), Quat.identity())
    frame = HandFrame(float(record.get("t", 0.0)), pose, lms)
    return TrackingSample(frame, bool(record.get("engage", False)))


def ingest_openxr(path, mapping: dict | None = None):
    """TrackingSamples from an openxr26-v1 fixture file."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != OPENXR26_FORMAT:
            raise SchemaError(1, f"unsupported format {header.get('format')!r}")
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            yield convert_openxr(json.loads(line), mapping)
