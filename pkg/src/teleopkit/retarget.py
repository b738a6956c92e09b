"""Hand branch: landmark normalization, adaptive reference vectors, and
box-constrained retargeting of 21-point hand skeletons onto a 12-DOF hand.

The optimizer matches 15 geometric vectors (5 wrist-to-fingertip plus 10
fingertip pairs) between the tracked hand and the robot hand's forward
kinematics:

    min_q  sum_i w_i * huber(||v_i_robot(q) - v_i_ref||) + lam * ||q - q_prev||^2
    s.t.   q_min <= q <= q_max

Reference vectors adapt to landmark proximity: inside the projection
threshold they collapse to a tiny pinch vector with a high weight (forcing
contact), outside the escape threshold they follow the human vector at unit
scale with weight 1, and between the two thresholds the previous state is
retained (hysteresis; with equal thresholds that band is a single point).
The wrist-to-pinky reference is additionally scaled by an extension-dependent
factor compensating a disproportionately long robot pinky.

Landmark indices follow the 21-point MediaPipe-style ordering: 0 wrist,
then thumb 1-4, index 5-8, middle 9-12, ring 13-16, pinky 17-20 with
fingertips at 4, 8, 12, 16, 20.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .kinematics import KinematicModel
from .se3 import Pose

WRIST = 0
THUMB_TIP, INDEX_TIP, MIDDLE_TIP, RING_TIP, PINKY_TIP = 4, 8, 12, 16, 20
FINGERTIPS = (THUMB_TIP, INDEX_TIP, MIDDLE_TIP, RING_TIP, PINKY_TIP)
INDEX_MCP, MIDDLE_MCP = 5, 9
PINKY_MCP, PINKY_PIP, PINKY_DIP = 17, 18, 19

WRIST_FINGER = "wrist-finger"
FINGER_FINGER = "finger-finger"

# human landmark pair -> robot frame names, in deterministic spec order
TIP_FRAMES = {
    WRIST: "wrist",
    THUMB_TIP: "thumb_tip",
    INDEX_TIP: "index_tip",
    MIDDLE_TIP: "middle_tip",
    RING_TIP: "ring_tip",
    PINKY_TIP: "pinky_tip",
}
REF_PAIRS = [(WRIST, t) for t in FINGERTIPS] + [
    (a, b) for k, a in enumerate(FINGERTIPS) for b in FINGERTIPS[k + 1:]
]


class DegenerateHandError(ValueError):
    """Landmark geometry does not define a palm frame."""


@dataclass
class HandFrame:
    t: float
    wrist: Pose
    landmarks: np.ndarray  # (21, 3) meters

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=float)
        if lm.shape != (21, 3):
            raise ValueError(f"expected 21 landmarks, got {lm.shape}")
        if not np.isfinite(lm).all():
            raise ValueError("landmarks must be finite")
        rel = np.linalg.norm(lm - lm[0], axis=1)
        if rel.max() > 0.35:
            raise ValueError(f"wrist-relative landmark magnitude {rel.max():.3f} m "
                             "exceeds the 0.35 m sanity bound")
        self.landmarks = lm


@dataclass
class RefVectorSpec:
    kind: str                      # WRIST_FINGER or FINGER_FINGER
    human: tuple[int, int]         # landmark indices (from, to)
    robot: tuple[str, str]         # frame names (from, to)
    state: str                     # "projected" or "free"
    weight: float
    ref: np.ndarray                # meters


@dataclass
class RetargetConfig:
    d_proj: float = 0.03           # m, project references inside this distance
    d_esc: float = 0.03            # m, free references beyond this distance
    eta_ff: float = 1e-4           # m, projected length for fingertip pairs
    eta_wf: float = 3e-2           # m, projected length for wrist-finger
    scale: float = 1.0             # free-reference scale
    weight_ff_proj: float = 400.0
    weight_wf_proj: float = 200.0
    weight_free: float = 1.0
    huber_delta: float = 0.02      # m
    lam: float = 1e-2              # temporal regularization
    ema_alpha: float = 0.6
    gamma_lo: float = 1.2          # pinky scaling range
    gamma_hi: float = 2.2
    ratio_lo: float = 0.3          # extension ratio mapped onto the gamma range
    ratio_hi: float = 0.95
    tol: float = 1e-6              # projected-gradient tolerance
    max_iters: int = 200
    hand_scale: float = 1.0

    @staticmethod
    def streaming() -> "RetargetConfig":
        """Per-frame streaming preset: the projected-gradient tolerance is
        relaxed to 1e-4 and the iteration cap to 30 (the warm-started
        best-iterate is within EMA smoothing noise of the optimum) so a
        30 Hz session fits its compute budget. Offline solves keep the tight
        defaults."""
        return RetargetConfig(tol=1e-4, max_iters=24)

    def __post_init__(self):
        if self.d_proj > self.d_esc:
            raise ValueError("d_proj must not exceed d_esc")
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValueError("ema_alpha must be in (0, 1]")
        if self.gamma_lo > self.gamma_hi:
            raise ValueError("gamma_lo must not exceed gamma_hi")


@dataclass
class SolveStats:
    solves: int = 0
    iterations: int = 0
    max_iter_hits: int = 0
    last_converged: bool = True


def huber(r: float, delta: float) -> float:
    """Quadratic inside delta, linear outside; C1 at the joint."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = float(r)
    if r <= delta:
        return 0.5 * r * r
    return delta * (r - 0.5 * delta)


def huber_slope_over_r(r: float, delta: float) -> float:
    """d/dr huber(r) divided by r, finite at r = 0."""
    if r <= delta:
        return 1.0
    return delta / r


def ema_filter(q_new, q_smoothed_prev, alpha: float) -> np.ndarray:
    q_new = np.asarray(q_new, dtype=float)
    q_prev = np.asarray(q_smoothed_prev, dtype=float)
    if q_new.shape != q_prev.shape:
        raise ValueError("ema inputs must have equal length")
    return alpha * q_new + (1.0 - alpha) * q_prev


def normalize_frame(raw: HandFrame, cfg: RetargetConfig | None = None) -> HandFrame:
    """Express landmarks wrist-relative in the canonical hand frame.

    x runs from the wrist to the middle MCP, z is the palm normal
    (wrist->index-MCP cross wrist->middle-MCP), y completes the right-handed
    basis. The overall scale is multiplied by the configured hand scale.
    """
    cfg = cfg or RetargetConfig()
    lm = raw.landmarks
    rel = lm - lm[WRIST]
    v_index = rel[INDEX_MCP]
    v_middle = rel[MIDDLE_MCP]
    n_i, n_m = np.linalg.norm(v_index), np.linalg.norm(v_middle)
    if n_i < 1e-12 or n_m < 1e-12:
        raise DegenerateHandError("MCP landmarks coincide with the wrist")
    cross = np.cross(v_index, v_middle)
    sin_angle = np.linalg.norm(cross) / (n_i * n_m)
    if sin_angle < 1e-6:
        raise DegenerateHandError(
            "index and middle MCP directions are parallel; palm frame undefined")
    x = v_middle / n_m
    z = cross / np.linalg.norm(cross)
    y = np.cross(z, x)
    basis = np.stack([x, y, z], axis=0)  # rows, so basis @ v projects
    canon = (rel @ basis.T) * cfg.hand_scale
    return HandFrame(raw.t, Pose.identity(), canon)


def extension_ratio(frame: HandFrame, finger_mcp: int = PINKY_MCP) -> float:
    """Straight-line MCP-to-tip distance over the segment path length."""
    lm = frame.landmarks
    a, b, c, d = lm[finger_mcp], lm[finger_mcp + 1], lm[finger_mcp + 2], lm[finger_mcp + 3]
    path = (np.linalg.norm(b - a) + np.linalg.norm(c - b) + np.linalg.norm(d - c))
    if path < 1e-12:
        return 0.0
    return float(np.linalg.norm(d - a) / path)


def gamma_from_ratio(r: float, cfg: RetargetConfig) -> float:
    t = (r - cfg.ratio_lo) / max(cfg.ratio_hi - cfg.ratio_lo, 1e-12)
    t = min(max(t, 0.0), 1.0)
    return cfg.gamma_lo + (cfg.gamma_hi - cfg.gamma_lo) * t


def pinky_gamma(frame: HandFrame, cfg: RetargetConfig | None = None) -> float:
    """Pinky reference scaling, nondecreasing in the extension ratio."""
    cfg = cfg or RetargetConfig()
    return gamma_from_ratio(extension_ratio(frame), cfg)


def build_references(frame: HandFrame, prev: list[RefVectorSpec] | None,
                     cfg: RetargetConfig | None = None,
                     pairs: list[tuple[int, int]] | None = None) -> list[RefVectorSpec]:
    """Adaptive reference vectors for one canonical frame.

    Inside d_proj the reference collapses to the projected pinch length;
    beyond d_esc it follows the human vector; in between, the previous spec
    is retained verbatim. The wrist-to-pinky reference is then scaled by the
    extension-dependent pinky factor. `pairs` defaults to the 15 saliency
    pairs (5 wrist-fingertip plus 10 fingertip pairs).
    """
    cfg = cfg or RetargetConfig()
    prev_map = {(s.kind, s.human): s for s in (prev or [])}
    lm = frame.landmarks
    gamma = pinky_gamma(frame, cfg)
    out = []
    for (i, j) in (pairs if pairs is not None else REF_PAIRS):
        kind = WRIST_FINGER if i == WRIST else FINGER_FINGER
        v = lm[j] - lm[i]
        d = float(np.linalg.norm(v))
        if d < cfg.d_proj:
            eta = cfg.eta_ff if kind == FINGER_FINGER else cfg.eta_wf
            if d > 1e-12:
                ref = (v / d) * eta
            else:
                old = prev_map.get((kind, (i, j)))
                direction = old.ref / max(np.linalg.norm(old.ref), 1e-12) \
                    if old is not None else np.array([1.0, 0.0, 0.0])
                ref = direction * eta
            weight = cfg.weight_ff_proj if kind == FINGER_FINGER else cfg.weight_wf_proj
            spec = RefVectorSpec(kind, (i, j), (TIP_FRAMES[i], TIP_FRAMES[j]),
                                 "projected", weight, ref)
        elif d > cfg.d_esc:
            spec = RefVectorSpec(kind, (i, j), (TIP_FRAMES[i], TIP_FRAMES[j]),
                                 "free", cfg.weight_free, v * cfg.scale)
        else:
            old = prev_map.get((kind, (i, j)))
            if old is not None:
                spec = replace(old, ref=old.ref.copy())
            else:
                spec = RefVectorSpec(kind, (i, j), (TIP_FRAMES[i], TIP_FRAMES[j]),
                                     "free", cfg.weight_free, v * cfg.scale)
        if kind == WRIST_FINGER and j == PINKY_TIP:
            spec = replace(spec, ref=spec.ref * gamma)
        out.append(spec)
    return out


class _RefBundle:
    """Vectorized view of a reference list against one model: frame rows,
    endpoint index arrays, weights, and stacked reference vectors."""

    def __init__(self, model: KinematicModel, refs):
        self.frames = sorted({f for s in refs for f in s.robot})
        row = {f: k for k, f in enumerate(self.frames)}
        self.ia = np.array([row[s.robot[0]] for s in refs])
        self.ib = np.array([row[s.robot[1]] for s in refs])
        self.weights = np.array([s.weight for s in refs])
        self.refs = np.array([s.ref for s in refs])
        self.frame_idx = [model.frame_index(f) for f in self.frames]


def objective_and_gradient(model: KinematicModel, q, q_prev, refs,
                           cfg: RetargetConfig, bundle: _RefBundle | None = None):
    """Retargeting objective with its analytic gradient.

    The whole objective is scaled by 1/delta^2, the standard dimensionless
    Huber form rho_delta(r)/delta^2 = rho_1(r/delta) (the temporal term
    scales identically, so minimizers are untouched). Residuals live at the
    centimeter scale; without the scaling, the projected-gradient stopping
    tolerance would trigger while flat directions of the finger chains are
    still ~1e-2 rad from the optimum. The huber slope is expressed as
    slope/r so the r -> 0 limit stays finite.
    """
    q = np.asarray(q, dtype=float)
    b = bundle if bundle is not None else _RefBundle(model, refs)
    cache = model.fk_full(q)
    T = cache[0]
    P = np.stack([T[fi, :3, 3] for fi in b.frame_idx])
    JP = np.stack([model.jacobian(q, f, fk_cache=cache)[:3, :] for f in b.frames])

    E = (P[b.ib] - P[b.ia]) - b.refs
    r = np.linalg.norm(E, axis=1)
    delta = cfg.huber_delta
    quad = r <= delta
    loss = np.where(quad, 0.5 * r * r, delta * (r - 0.5 * delta))
    slope_over_r = np.where(quad, 1.0, delta / np.where(r > 0, r, 1.0))
    total = float(np.dot(b.weights, loss))
    coefE = (b.weights * slope_over_r)[:, None] * E
    grad = np.einsum("ij,ijk->k", coefE, JP[b.ib] - JP[b.ia])

    dq = q - np.asarray(q_prev, dtype=float)
    total += cfg.lam * float(dq @ dq)
    grad = grad + 2.0 * cfg.lam * dq
    inv_scale = 1.0 / delta**2
    return total * inv_scale, grad * inv_scale


def solve(frame: HandFrame, q_prev, refs: list[RefVectorSpec],
          model: KinematicModel, cfg: RetargetConfig | None = None,
          stats: SolveStats | None = None) -> np.ndarray:
    """Joint angles matching the reference vectors, warm-started at q_prev.

    Box constraints are exact; hitting the iteration cap returns the best
    iterate (flagged in stats) rather than failing, so a streaming session
    never aborts.
    """
    cfg = cfg or RetargetConfig()
    q0 = np.clip(np.asarray(q_prev, dtype=float), model.limits_lo, model.limits_hi)
    bundle = _RefBundle(model, refs)

    def fun(q):
        return objective_and_gradient(model, q, q0, refs, cfg, bundle)

    res = minimize(fun, q0, jac=True, method="L-BFGS-B",
                   bounds=list(zip(model.limits_lo, model.limits_hi)),
                   options={"maxiter": cfg.max_iters, "gtol": cfg.tol,
                            "ftol": 1e-15, "maxls": 40})
    if stats is not None:
        stats.solves += 1
        stats.iterations += int(res.nit)
        converged = res.status != 1
        stats.last_converged = converged
        if not converged:
            stats.max_iter_hits += 1
    return np.clip(res.x, model.limits_lo, model.limits_hi)


class RetargetSession:
    """Streaming retargeting state: reference hysteresis, the raw solution
    chain for temporal regularization, and the EMA output memory."""

    def __init__(self, model: KinematicModel, cfg: RetargetConfig | None = None):
        self.model = model
        self.cfg = cfg or RetargetConfig()
        self.refs: list[RefVectorSpec] = []
        self.q_prev = model.neutral.copy()
        self.q_smoothed: np.ndarray | None = None
        self.stats = SolveStats()

    def step(self, raw: HandFrame) -> np.ndarray:
        canon = normalize_frame(raw, self.cfg)
        self.refs = build_references(canon, self.refs, self.cfg)
        q = solve(canon, self.q_prev, self.refs, self.model, self.cfg, self.stats)
        self.q_prev = q
        if self.q_smoothed is None:
            self.q_smoothed = q.copy()
        else:
            self.q_smoothed = ema_filter(q, self.q_smoothed, self.cfg.ema_alpha)
        return self.q_smoothed.copy()
