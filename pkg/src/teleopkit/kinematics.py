"""Kinematic model loading, forward kinematics, Jacobians, manipulability.

Models are trees of revolute / prismatic / fixed joints described by a flat
JSON document (schema ``model-v1``, see ``docs/model-v1.md``). Parents must be
declared before children, so a single forward pass computes every frame.
Mimic joints track an actuated source as ``multiplier * q_source + offset``
and are excluded from the DOF count.

A joint's frame is ``T_parent * origin * motion(q)``; the motion axis is a
unit vector in the post-origin frame. Named frames give stable handles for
end-effectors and fingertips independent of joint ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .se3 import Pose, Quat

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"
_JOINT_TYPES = (REVOLUTE, PRISMATIC, FIXED)

FORMAT = "model-v1"


class ModelError(ValueError):
    """Model document fails schema or structural validation."""


class UnknownFrameError(KeyError):
    """Requested frame name is not defined by the model."""


@dataclass(frozen=True)
class Joint:
    name: str
    jtype: str
    parent: int  # joint index, -1 for root
    axis: np.ndarray  # unit, in the post-origin frame
    origin_R: np.ndarray
    origin_p: np.ndarray
    limit_lo: float
    limit_hi: float
    mimic_source: int  # joint index, -1 if not a mimic
    mimic_mult: float
    mimic_offset: float

    @property
    def moving(self) -> bool:
        return self.jtype != FIXED

    @property
    def is_mimic(self) -> bool:
        return self.mimic_source >= 0


def _rpy_matrix(r: float, p: float, y: float) -> np.ndarray:
    """Fixed-axis XYZ roll-pitch-yaw: R = Rz(y) Ry(p) Rx(r)."""
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


class KinematicModel:
    """Immutable joint tree with cached index structures for FK and Jacobians."""

    def __init__(self, name: str, joints: list[Joint], frames: dict[str, int],
                 neutral: np.ndarray | None = None):
        self.name = name
        self.joints = joints
        self.frames = dict(frames)
        self.n_joints = len(joints)

        # actuated joints define the DOF vector, in document order
        self.dof_joints = [i for i, j in enumerate(joints)
                           if j.moving and not j.is_mimic]
        self.dof = len(self.dof_joints)
        self.dof_names = [joints[i].name for i in self.dof_joints]
        self._dof_pos = {ji: k for k, ji in enumerate(self.dof_joints)}

        self.limits_lo = np.array([joints[i].limit_lo for i in self.dof_joints])
        self.limits_hi = np.array([joints[i].limit_hi for i in self.dof_joints])

        if neutral is None:
            neutral = np.clip(np.zeros(self.dof), self.limits_lo, self.limits_hi)
        self.neutral = np.asarray(neutral, dtype=float).reshape(self.dof)

        # per-joint (dof index, scale, offset) applied when expanding q
        self._expand_dof = np.full(self.n_joints, -1, dtype=int)
        self._expand_mult = np.zeros(self.n_joints)
        self._expand_off = np.zeros(self.n_joints)
        for i, j in enumerate(joints):
            if not j.moving:
                continue
            if j.is_mimic:
                src = j.mimic_source
                self._expand_dof[i] = self._dof_pos[src]
                self._expand_mult[i] = j.mimic_mult
                self._expand_off[i] = j.mimic_offset
            else:
                self._expand_dof[i] = self._dof_pos[i]
                self._expand_mult[i] = 1.0

        self._ancestors = []
        for i in range(self.n_joints):
            chain = []
            k = i
            while k >= 0:
                chain.append(k)
                k = joints[k].parent
            self._ancestors.append(chain[::-1])

        # flat per-joint arrays for the FK hot path
        self._origin_R = np.array([j.origin_R for j in joints])
        self._origin_p = np.array([j.origin_p for j in joints])
        self._axis = np.array([j.axis for j in joints])
        self._parent = np.array([j.parent for j in joints])
        self._revolute = np.array([j.jtype == REVOLUTE for j in joints])
        self._prismatic = np.array([j.jtype == PRISMATIC for j in joints])

    # -- queries ------------------------------------------------------------

    def frame_index(self, frame: str) -> int:
        try:
            return self.frames[frame]
        except KeyError:
            raise UnknownFrameError(
                f"model {self.name!r} has no frame {frame!r}; "
                f"known: {sorted(self.frames)}"
            ) from None

    def clip(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.limits_lo, self.limits_hi)

    def within_limits(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.limits_lo - tol) and np.all(q <= self.limits_hi + tol))

    def expand(self, q) -> np.ndarray:
        """Per-joint motion values from the DOF vector (mimics applied)."""
        q = np.asarray(q, dtype=float).reshape(self.dof)
        vals = np.zeros(self.n_joints)
        act = self._expand_dof >= 0
        vals[act] = q[self._expand_dof[act]] * self._expand_mult[act] + self._expand_off[act]
        return vals

    # -- kinematics ---------------------------------------------------------

    def fk_full(self, q):
        """World transforms plus per-joint world axes and pre-motion origins.

        Returns (T, z, porg): T is (n_joints, 4, 4) post-motion frames,
        z is (n_joints, 3) world motion axes, porg is (n_joints, 3) world
        positions of the joint origins (rotation centers).
        """
        vals = self.expand(q)
        T = np.zeros((self.n_joints, 4, 4))
        z = np.zeros((self.n_joints, 3))
        porg = np.zeros((self.n_joints, 3))
        eye = np.eye(3)
        zero3 = np.zeros(3)
        parent = self._parent
        for i in range(self.n_joints):
            pi = parent[i]
            if pi >= 0:
                Rp = T[pi, :3, :3]
                pp = T[pi, :3, 3]
            else:
                Rp = eye
                pp = zero3
            R_pre = Rp @ self._origin_R[i]
            p_pre = pp + Rp @ self._origin_p[i]
            porg[i] = p_pre
            zi = R_pre @ self._axis[i]
            z[i] = zi
            if self._revolute[i]:
                R_i = R_pre @ _axis_angle_matrix(self._axis[i], vals[i])
                p_i = p_pre
            elif self._prismatic[i]:
                R_i = R_pre
                p_i = p_pre + zi * vals[i]
            else:
                R_i = R_pre
                p_i = p_pre
            T[i, :3, :3] = R_i
            T[i, :3, 3] = p_i
            T[i, 3, 3] = 1.0
        return T, z, porg

    def fk(self, q, frame: str) -> Pose:
        """Pose of a named frame in base coordinates."""
        fi = self.frame_index(frame)
        T, _, _ = self.fk_full(q)
        return Pose(T[fi, :3, 3].copy(), Quat.from_matrix(T[fi, :3, :3]))

    def fk_matrix(self, q, frame: str) -> np.ndarray:
        fi = self.frame_index(frame)
        T, _, _ = self.fk_full(q)
        return T[fi].copy()

    def jacobian(self, q, frame: str, fk_cache=None) -> np.ndarray:
        """Geometric Jacobian (linear rows above angular rows), base frame.

        Mimic joints fold into their source column scaled by the multiplier;
        fixed joints contribute no column.
        """
        fi = self.frame_index(frame)
        T, z, porg = fk_cache if fk_cache is not None else self.fk_full(q)
        p_f = T[fi, :3, 3]
        J = np.zeros((6, self.dof))
        for k in self._ancestors[fi]:
            j = self.joints[k]
            if not j.moving:
                continue
            col = self._expand_dof[k]
            scale = self._expand_mult[k]
            if j.jtype == REVOLUTE:
                zx, zy, zz = z[k]
                ax, ay, az = p_f[0] - porg[k, 0], p_f[1] - porg[k, 1], p_f[2] - porg[k, 2]
                J[0, col] += scale * (zy * az - zz * ay)
                J[1, col] += scale * (zz * ax - zx * az)
                J[2, col] += scale * (zx * ay - zy * ax)
                J[3:, col] += scale * z[k]
            else:
                J[:3, col] += scale * z[k]
        return J

    def manipulability(self, q, frame: str, rows=None) -> float:
        """Yoshikawa measure sqrt(det(J J^T)); round-off negatives clamp to 0."""
        J = self.jacobian(q, frame)
        if rows is not None:
            J = J[list(rows), :]
        det = float(np.linalg.det(J @ J.T))
        return math.sqrt(max(det, 0.0))


def _axis_angle_matrix(axis, angle: float) -> np.ndarray:
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


# -- document loading -------------------------------------------------------


def load_model(doc) -> KinematicModel:
    """Validate a model-v1 document (dict or JSON text) into a KinematicModel."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    if doc.get("format") != FORMAT:
        raise ModelError(f"unsupported model format {doc.get('format')!r}, expected {FORMAT!r}")
    name = doc.get("name", "unnamed")
    raw_joints = doc.get("joints")
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ModelError("model document needs a non-empty 'joints' list")

    index: dict[str, int] = {}
    joints: list[Joint] = []
    for i, rj in enumerate(raw_joints):
        jname = rj.get("name")
        if not jname or not isinstance(jname, str):
            raise ModelError(f"joint #{i} has no valid name")
        if jname in index:
            raise ModelError(f"duplicate joint name {jname!r}")
        jtype = rj.get("type")
        if jtype not in _JOINT_TYPES:
            raise ModelError(f"joint {jname!r}: unknown type {jtype!r}")

        parent_name = rj.get("parent")
        if parent_name is None:
            parent = -1
        else:
            if parent_name not in index:
                raise ModelError(
                    f"joint {jname!r}: parent {parent_name!r} unknown or declared later"
                )
            parent = index[parent_name]

        origin = rj.get("origin", {})
        xyz = np.asarray(origin.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
        rpy = origin.get("rpy", [0.0, 0.0, 0.0])
        if xyz.shape != (3,) or len(rpy) != 3:
            raise ModelError(f"joint {jname!r}: origin xyz/rpy must each have 3 entries")
        origin_R = _rpy_matrix(*[float(v) for v in rpy])

        if jtype == FIXED:
            axis = np.array([0.0, 0.0, 1.0])
            lo = hi = 0.0
        else:
            axis = np.asarray(rj.get("axis", [0, 0, 1]), dtype=float)
            if axis.shape != (3,) or np.linalg.norm(axis) < 1e-9:
                raise ModelError(f"joint {jname!r}: axis must be a nonzero 3-vector")
            axis = axis / np.linalg.norm(axis)
            limits = rj.get("limits")
            if limits is None or len(limits) != 2:
                raise ModelError(f"joint {jname!r}: moving joints need 'limits': [lo, hi]")
            lo, hi = float(limits[0]), float(limits[1])
            if lo > hi:
                raise ModelError(f"joint {jname!r}: limit_lo {lo} > limit_hi {hi}")

        mimic = rj.get("mimic")
        if mimic is not None:
            if jtype == FIXED:
                raise ModelError(f"joint {jname!r}: fixed joints cannot mimic")
            src_name = mimic.get("joint")
            if src_name not in index:
                raise ModelError(
                    f"joint {jname!r}: mimic source {src_name!r} unknown or declared later"
                )
            src = index[src_name]
            if joints[src].is_mimic:
                raise ModelError(
                    f"joint {jname!r}: mimic source {src_name!r} is itself a mimic (chain/cycle)"
                )
            if not joints[src].moving:
                raise ModelError(f"joint {jname!r}: mimic source {src_name!r} is fixed")
            msrc, mmult, moff = src, float(mimic.get("multiplier", 1.0)), float(mimic.get("offset", 0.0))
        else:
            msrc, mmult, moff = -1, 1.0, 0.0

        index[jname] = i
        joints.append(Joint(jname, jtype, parent, axis, origin_R, xyz, lo, hi, msrc, mmult, moff))

    frames = {}
    for fname, jname in (doc.get("frames") or {}).items():
        if jname not in index:
            raise ModelError(f"frame {fname!r} references unknown joint {jname!r}")
        frames[fname] = index[jname]
    # every joint is addressable as joint:<name> without an explicit entry
    for jname, ji in index.items():
        frames.setdefault(f"joint:{jname}", ji)

    model = KinematicModel(name, joints, frames)
    neutral = doc.get("neutral")
    if neutral is not None:
        neutral = np.asarray(neutral, dtype=float)
        if neutral.shape != (model.dof,):
            raise ModelError(f"neutral must have {model.dof} entries, got {neutral.shape}")
        if not model.within_limits(neutral):
            raise ModelError("neutral configuration violates joint limits")
        model = KinematicModel(name, joints, frames, neutral)
    return model


def load_model_file(path) -> KinematicModel:
    p = Path(path)
    return load_model(p.read_text())


_BUILTIN_DIR = Path(__file__).parent / "models"


def builtin_model_path(name: str) -> Path:
    """Resolve 'builtin:<name>' or a filesystem path to a model file."""
    if name.startswith("builtin:"):
        p = _BUILTIN_DIR / f"{name.split(':', 1)[1].replace('-', '_')}.json"
        if not p.exists():
            known = sorted(f.stem for f in _BUILTIN_DIR.glob("*.json"))
            raise FileNotFoundError(f"no builtin model {name!r}; known: {known}")
        return p
    return Path(name)


def load_named_model(name: str) -> KinematicModel:
    return load_model_file(builtin_model_path(name))
