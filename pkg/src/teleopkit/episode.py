"""episode-v1 on-disk demonstration format.

An episode is a directory holding ``meta.json`` and ``records.jsonl``. Every
record line is one synchronized 30 Hz step::

    {"t": <hex>, "observation": {"q": [<hex> * 19], "dq": [<hex> * 19]},
     "action": {"targets": [<hex> * 19]}}

Floats are hex-encoded (``float.hex()``), which round-trips all 64 bits
identically on every platform; episodes written from the same command stream
are byte-identical. ``meta.json`` reserves an ``attachments`` list so future
camera sidecars can be referenced without a schema change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA = "episode-v1"
ACTION_DIM = 19


class VersionMismatchError(ValueError):
    pass


class CorruptEpisodeError(ValueError):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"CORRUPT at line {line}: {detail}")


@dataclass
class EpisodeStep:
    t: float
    obs_q: np.ndarray
    obs_dq: np.ndarray
    action: np.ndarray

    def __post_init__(self):
        self.obs_q = np.asarray(self.obs_q, dtype=float).reshape(ACTION_DIM)
        self.obs_dq = np.asarray(self.obs_dq, dtype=float).reshape(ACTION_DIM)
        self.action = np.asarray(self.action, dtype=float).reshape(ACTION_DIM)


def _hex(values) -> list[str]:
    return [float(v).hex() for v in np.asarray(values, dtype=float)]


def _unhex(values, line: int, what: str) -> np.ndarray:
    try:
        out = np.array([float.fromhex(v) for v in values])
    except (TypeError, ValueError) as exc:
        raise CorruptEpisodeError(line, f"{what}: {exc}") from None
    if out.shape != (ACTION_DIM,):
        raise CorruptEpisodeError(line, f"{what}: expected {ACTION_DIM} values")
    return out


class EpisodeWriter:
    """Streaming writer; each step is flushed so interrupted sessions keep a
    readable partial episode."""

    def __init__(self, directory, episode_id: str, task: str = "",
                 rate_hz: int = 30):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.episode_id = episode_id
        self.task = task
        self.rate_hz = rate_hz
        self.steps = 0
        self._t_first: float | None = None
        self._t_last: float | None = None
        self._fh = open(self.dir / "records.jsonl", "w")
        self._write_meta()

    def add_step(self, t: float, obs_q, obs_dq, action):
        rec = {
            "t": float(t).hex(),
            "observation": {"q": _hex(obs_q), "dq": _hex(obs_dq)},
            "action": {"targets": _hex(action)},
        }
        self._fh.write(json.dumps(rec) + "\n")
        self._fh.flush()
        self.steps += 1
        if self._t_first is None:
            self._t_first = float(t)
        self._t_last = float(t)

    def _write_meta(self):
        duration = (self._t_last - self._t_first) if self.steps else 0.0
        meta = {
            "schema": SCHEMA,
            "episode_id": self.episode_id,
            "task": self.task,
            "rate_hz": self.rate_hz,
            "action_dim": ACTION_DIM,
            "steps": self.steps,
            "duration_s": round(duration, 6),
            "attachments": [],
        }
        (self.dir / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")

    def close(self):
        self._fh.close()
        self._write_meta()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_episode(directory):
    """(meta, steps) from an episode directory; loss-free numeric round trip."""
    directory = Path(directory)
    try:
        meta = json.loads((directory / "meta.json").read_text())
    except FileNotFoundError:
        raise VersionMismatchError(f"{directory} has no meta.json") from None
    if meta.get("schema") != SCHEMA:
        raise VersionMismatchError(
            f"episode schema {meta.get('schema')!r}, expected {SCHEMA!r}")
    steps = []
    with open(directory / "records.jsonl") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptEpisodeError(line_no, f"not JSON: {exc}") from None
            try:
                t = float.fromhex(obj["t"])
                obs = obj["observation"]
                act = obj["action"]
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptEpisodeError(line_no, str(exc)) from None
            steps.append(EpisodeStep(
                t,
                _unhex(obs.get("q", []), line_no, "observation.q"),
                _unhex(obs.get("dq", []), line_no, "observation.dq"),
                _unhex(act.get("targets", []), line_no, "action.targets"),
            ))
    return meta, steps


def replay(directory):
    """Stream of (t, action) pairs from a stored episode."""
    _, steps = read_episode(directory)
    for s in steps:
        yield s.t, s.action
