"""Teleoperation session orchestration: tracking in, 19-DOF actions out.

Per frame, the arm branch turns the wrist's differential intent into an
end-effector target and resolves it through the redundancy-aware IK; the hand
branch retargets the 21-point skeleton onto the 12-DOF hand. The two branches
are independent computations joined only when the action vector is assembled,
so disabling one cannot perturb the other.

Calibration: the first sample (or any sample flagged engage) records the
operator wrist pose; the first state message from the robot fixes the
end-effector reference pose via forward kinematics.

Unreachable IK frames hold the previous arm command (the 30 Hz cadence is
preserved for the recorder) and are counted in the report.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arm_ik, se3
from .episode import EpisodeWriter
from .kinematics import KinematicModel, load_named_model
from .retarget import RetargetConfig, RetargetSession
from .streams import ActionVector, TrackingSample


@dataclass
class SessionConfig:
    arm_model: str = "builtin:arm7-generic"
    hand_model: str = "builtin:hand12-generic"
    frame_map: str | list = "vr-to-robot-default"
    weights: dict = field(default_factory=dict)
    retarget: dict = field(default_factory=dict)
    ik: dict = field(default_factory=dict)
    task: str = "demo"
    disable_arm: bool = False
    disable_hand: bool = False

    @staticmethod
    def load(path) -> "SessionConfig":
        obj = json.loads(Path(path).read_text())
        known = set(SessionConfig.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown session config keys: {sorted(unknown)}")
        return SessionConfig(**obj)

    def build(self) -> "Session":
        return Session(self)


class Session:
    """Loaded models and per-stream state for one teleoperation run."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.arm: KinematicModel = load_named_model(cfg.arm_model)
        self.hand: KinematicModel = load_named_model(cfg.hand_model)
        if isinstance(cfg.frame_map, str):
            self.frame_map = se3.FrameMap.named(cfg.frame_map)
        else:
            self.frame_map = se3.FrameMap(np.asarray(cfg.frame_map, dtype=float))
        base = arm_ik.RedundancyWeights.defaults_for(self.arm)
        self.weights = arm_ik.RedundancyWeights(
            w_m=cfg.weights.get("w_m", base.w_m),
            w_n=cfg.weights.get("w_n", base.w_n),
            w_c=cfg.weights.get("w_c", base.w_c),
            W_n=base.W_n, W_c=base.W_c)
        self.ik_cfg = arm_ik.IkConfig.streaming()
        for k, v in cfg.ik.items():
            setattr(self.ik_cfg, k, v)
        stream_defaults = RetargetConfig.streaming()
        self.retarget_cfg = RetargetConfig(**{
            "tol": stream_defaults.tol, "max_iters": stream_defaults.max_iters,
            **cfg.retarget})
        self.hand_session = RetargetSession(self.hand, self.retarget_cfg)

        self.wrist_0 = None
        self.ee_0 = None
        self.q_arm_cmd = self.arm.neutral.copy()
        self.q_hand_cmd = self.hand.neutral.copy()
        self.ik_failures = 0
        self.frames = 0
        self.compute_s = 0.0

    def engage(self, sample: TrackingSample, q_state_arm):
        self.wrist_0 = sample.frame.wrist
        self.ee_0 = self.arm.fk(np.asarray(q_state_arm, dtype=float), "ee")
        self.q_arm_cmd = np.asarray(q_state_arm, dtype=float).copy()

    def step(self, sample: TrackingSample) -> ActionVector:
        """One 30 Hz tracking sample into one 19-DOF action."""
        t0 = time.perf_counter()
        frame = sample.frame
        if not self.cfg.disable_arm:
            intent = se3.compute_intent(self.wrist_0, frame.wrist)
            mapped = se3.map_intent(intent, self.frame_map)
            target = se3.compose_target(self.ee_0, mapped)
            req = arm_ik.IkRequest(target, self.q_arm_cmd, self.arm.neutral)
            try:
                sol = arm_ik.resolve(self.arm, req, self.weights, self.ik_cfg)
                self.q_arm_cmd = sol.q
            except arm_ik.UnreachableTargetError:
                self.ik_failures += 1  # hold the previous command
        if not self.cfg.disable_hand:
            self.q_hand_cmd = self.hand_session.step(frame)
        self.frames += 1
        self.compute_s += time.perf_counter() - t0
        return ActionVector(frame.t, np.concatenate([self.q_arm_cmd, self.q_hand_cmd]))

    def report(self) -> dict:
        stats = self.hand_session.stats
        return {
            "frames": self.frames,
            "ik_failures": self.ik_failures,
            "hand_solves": stats.solves,
            "hand_solver_iterations": stats.iterations,
            "hand_max_iter_hits": stats.max_iter_hits,
            "mean_frame_compute_ms": round(
                1e3 * self.compute_s / max(self.frames, 1), 3),
        }


def run_teleop(session: Session, samples, io_client, record_dir=None,
               episode_id: str = "episode", deterministic: bool = True) -> dict:
    """Drive a tracking stream through both branches into a robot connection.

    `io_client` must be connected as commander. In deterministic mode every
    command gets a lockstep state reply (the plant state at the command's
    timestamp, before the command applies), which becomes the recorded
    observation for that step.
    """
    writer = None
    if record_dir is not None:
        writer = EpisodeWriter(record_dir, episode_id, task=session.cfg.task)
    actions = []
    status = "complete"
    try:
        state = io_client.next_state()
        for sample in samples:
            if session.wrist_0 is None or sample.engage:
                session.engage(sample, np.asarray(state.q[:7]))
            action = session.step(sample)
            t_us = int(round(action.t * 1e6))
            io_client.send_command(t_us, action.targets)
            if deterministic:
                state = io_client.next_state()
            else:
                latest = io_client.drain_states()
                if latest:
                    state = latest[-1]
            actions.append(action)
            if writer is not None:
                writer.add_step(action.t, np.asarray(state.q),
                                np.asarray(state.dq), action.targets)
    except (ConnectionError, TimeoutError, OSError) as exc:
        status = f"io_error: {exc}"
    finally:
        if writer is not None:
            writer.close()
    report = session.report()
    report["status"] = status
    report["commands_sent"] = len(actions)
    if writer is not None:
        report["episode_dir"] = str(writer.dir)
        report["episode_steps"] = writer.steps
    return report


def run_offline(session: Session, samples) -> list[ActionVector]:
    """Branches only, no robot connection: actions from a tracking stream.

    The arm engages against the model's neutral FK pose.
    """
    out = []
    for sample in samples:
        if session.wrist_0 is None or sample.engage:
            session.engage(sample, session.arm.neutral)
        out.append(session.step(sample))
    return out
