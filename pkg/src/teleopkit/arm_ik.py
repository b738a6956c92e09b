"""Arm branch: fixed-q7 inverse kinematics and redundancy resolution.

The 7-DOF arm's redundancy is parameterized by its last joint. For a locked
q7, damped-least-squares iteration on joints 1..6 from a deterministic seed
set recovers the reachable candidate set; a scalar search over q7 then
maximizes a weighted objective trading off manipulability, proximity to a
neutral posture, and continuity with the previous configuration:

    J(q) = w_m * M(q) - w_n * ||W_n (q - q_neutral)|| - w_c * ||W_c (q - q_prev)||

with M(q) = sqrt(det(J J^T)) the Yoshikawa manipulability.

g(q7) = max objective over the candidate set is piecewise smooth with cliffs
where branches become unreachable, and its maximum can hug a cliff edge. The
search therefore brackets around the previous q7 (widening to the full joint
range when the bracket shows no interior optimum), probes the bracket on a
deterministic coarse grid, hierarchically zooms the most promising cells plus
every cell where g jumps or changes feasibility, and polishes the winner with
Brent's method (tolerance 1e-6, at most 100 iterations). A single-start Brent
is a local method on this landscape; the zoom is what makes the result
dominate a dense grid over the bracket.

Candidate evaluation is vectorized across seeds and grid points; each row's
update sequence is independent, so batched and pointwise evaluation of g
agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import REVOLUTE, KinematicModel
from .optimize import brent_min
from .se3 import Pose

_CHAIN_CACHE: dict[tuple[int, str], "SerialChain"] = {}


class UnreachableTargetError(RuntimeError):
    """No q7 admits a converged, limit-respecting solution for this target."""


@dataclass
class IkRequest:
    target: Pose
    q_prev: np.ndarray
    q_neutral: np.ndarray

    def __post_init__(self):
        self.q_prev = np.asarray(self.q_prev, dtype=float).reshape(-1)
        self.q_neutral = np.asarray(self.q_neutral, dtype=float).reshape(-1)


@dataclass
class RedundancyWeights:
    w_m: float = 1.0
    w_n: float = 0.5
    w_c: float = 2.0
    W_n: np.ndarray | None = None  # diagonal entries, defaults to 1/joint-range
    W_c: np.ndarray | None = None

    @staticmethod
    def defaults_for(model: KinematicModel) -> "RedundancyWeights":
        inv_range = 1.0 / (model.limits_hi - model.limits_lo)
        return RedundancyWeights(W_n=inv_range.copy(), W_c=inv_range.copy())

    def resolved(self, model: KinematicModel):
        inv_range = 1.0 / (model.limits_hi - model.limits_lo)
        wn = inv_range if self.W_n is None else np.asarray(self.W_n, dtype=float)
        wc = inv_range if self.W_c is None else np.asarray(self.W_c, dtype=float)
        if self.w_m < 0 or self.w_n < 0 or self.w_c < 0 or (wn < 0).any() or (wc < 0).any():
            raise ValueError("redundancy weights must be nonnegative")
        return wn, wc


@dataclass
class IkSolution:
    q: np.ndarray
    objective: float | None
    position_err: float
    orientation_err: float


@dataclass
class IkConfig:
    dls_lambda: float = 1e-3
    step_cap: float = 0.5          # rad per DLS iteration, inf-norm
    max_iters: int = 28            # per seed; slower rows rarely converge at all
    pos_tol: float = 1e-4          # m
    ori_tol: float = 1e-3          # rad
    dedupe_tol: float = 1e-6       # rad per joint
    min_manipulability: float = 1e-4
    brent_tol: float = 1e-6
    brent_maxiter: int = 100
    stall_window: int = 7          # DLS iterations without improvement before a row retires
    stall_factor: float = 0.97     # relative error decrease that counts as improvement
    far_err: float = 0.25          # rows still this bad after far_iters retire
    far_iters: int = 20
    bracket_halfwidth: float = 0.6
    probe_points: int = 17
    zoom_levels: int = 4
    zoom_cells: int = 3            # best cells refined per level (jump cells always are)
    zoom_points: int = 7
    n_seeds: int = 2               # previous configuration and the neutral posture

    @staticmethod
    def streaming() -> "IkConfig":
        """Narrow-bracket preset for frame-to-frame teleoperation, where the
        optimum barely moves between 30 Hz updates. The deep zoom leaves the
        Brent polish a sub-tolerance cell, so it terminates immediately
        instead of paying for sequential evaluations."""
        return IkConfig(bracket_halfwidth=0.15, probe_points=5, zoom_levels=6,
                        zoom_cells=1)


@dataclass
class IkStats:
    g_evals: int = 0
    dls_iters: int = 0
    bracket: tuple[float, float] = (0.0, 0.0)
    widened: bool = False
    brent_iters: int = 0


# -- batched serial-chain kinematics -----------------------------------------


class SerialChain:
    """Flattened revolute chain from the model root to one frame.

    Folds fixed joints into the inter-joint constants so batched FK is a
    single pass of (B,3,3) products per actuated joint.
    """

    def __init__(self, model: KinematicModel, frame: str):
        fi = model.frame_index(frame)
        pre_R, pre_p, axes = [], [], []
        R_acc, p_acc = np.eye(3), np.zeros(3)
        for k in model._ancestors[fi]:
            j = model.joints[k]
            p_acc = p_acc + R_acc @ j.origin_p
            R_acc = R_acc @ j.origin_R
            if j.jtype == REVOLUTE:
                if j.is_mimic:
                    raise ValueError("serial-chain fast path does not support mimic joints")
                pre_R.append(R_acc)
                pre_p.append(p_acc)
                axes.append(j.axis.copy())
                R_acc, p_acc = np.eye(3), np.zeros(3)
            elif j.jtype != "fixed":
                raise ValueError("serial-chain fast path supports revolute joints only")
        self.pre_R = np.array(pre_R)
        self.pre_p = np.array(pre_p)
        self.axes = np.array(axes)
        self.tail_R = R_acc
        self.tail_p = p_acc
        self.n = len(axes)
        # per-joint rodrigues constants
        self._aaT = np.einsum("ki,kj->kij", self.axes, self.axes)
        ax = self.axes
        K = np.zeros((self.n, 3, 3))
        K[:, 0, 1], K[:, 0, 2] = -ax[:, 2], ax[:, 1]
        K[:, 1, 0], K[:, 1, 2] = ax[:, 2], -ax[:, 0]
        K[:, 2, 0], K[:, 2, 1] = -ax[:, 1], ax[:, 0]
        self._skew = K
        self._axis_world0 = np.array([R @ a for R, a in zip(self.pre_R, self.axes)])
        # columns [pre_p, axis_world0] per joint, consumed in one product
        self._consts = np.stack([self.pre_p, self._axis_world0], axis=2)
        # joints rotating about +/- a coordinate axis take a sparse fast path
        basis = []
        for a in self.axes:
            idx = int(np.argmax(np.abs(a)))
            if abs(abs(a[idx]) - 1.0) < 1e-12:
                basis.append((idx, 1.0 if a[idx] > 0 else -1.0))
            else:
                basis = None
                break
        self._basis_axes = basis
        self.limits_lo = None
        self.limits_hi = None

    @staticmethod
    def for_model(model: KinematicModel, frame: str) -> "SerialChain":
        key = (id(model), frame)
        chain = _CHAIN_CACHE.get(key)
        if chain is None:
            chain = SerialChain(model, frame)
            chain.limits_lo = model.limits_lo.copy()
            chain.limits_hi = model.limits_hi.copy()
            _CHAIN_CACHE[key] = chain
        return chain

    def _rot_all(self, Q, B):
        """(B, n, 3, 3) joint rotations; sparse fill for coordinate axes."""
        c = np.cos(Q)
        s = np.sin(Q)
        if self._basis_axes is None:
            cc = c[:, :, None, None]
            return cc * np.eye(3) + (1.0 - cc) * self._aaT + s[:, :, None, None] * self._skew
        rot = np.zeros((B, self.n, 3, 3))
        for k, (ax, sign) in enumerate(self._basis_axes):
            i, j = (ax + 1) % 3, (ax + 2) % 3
            rot[:, k, ax, ax] = 1.0
            rot[:, k, i, i] = c[:, k]
            rot[:, k, j, j] = c[:, k]
            sk = sign * s[:, k]
            rot[:, k, j, i] = sk
            rot[:, k, i, j] = -sk
        return rot

    def fk_batch(self, Q: np.ndarray):
        """Batched FK. Q is (B, n). Returns (R_ee, p_ee, z, porg) with shapes
        (B,3,3), (B,3), (B,n,3), (B,n,3)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        B = Q.shape[0]
        step = self.pre_R[None] @ self._rot_all(Q, B)

        R = np.broadcast_to(np.eye(3), (B, 3, 3)).copy()
        p = np.zeros((B, 3))
        z = np.empty((B, self.n, 3))
        porg = np.empty((B, self.n, 3))
        for k in range(self.n):
            pv = R @ self._consts[k]
            p = p + pv[..., 0]
            z[:, k, :] = pv[..., 1]
            porg[:, k, :] = p
            R = R @ step[:, k]
        p_ee = p + R @ self.tail_p
        R_ee = R @ self.tail_R
        return R_ee, p_ee, z, porg

    def jacobian_batch(self, z, porg, p_ee) -> np.ndarray:
        """(B, 6, n) geometric Jacobian from fk_batch byproducts."""
        arm = p_ee[:, None, :] - porg
        J = np.empty((z.shape[0], 6, self.n))
        J[:, 0, :] = z[..., 1] * arm[..., 2] - z[..., 2] * arm[..., 1]
        J[:, 1, :] = z[..., 2] * arm[..., 0] - z[..., 0] * arm[..., 2]
        J[:, 2, :] = z[..., 0] * arm[..., 1] - z[..., 1] * arm[..., 0]
        J[:, 3, :] = z[..., 0]
        J[:, 4, :] = z[..., 1]
        J[:, 5, :] = z[..., 2]
        return J

    def manipulability_batch(self, Q: np.ndarray) -> np.ndarray:
        _, p_ee, z, porg = self.fk_batch(Q)
        J = self.jacobian_batch(z, porg, p_ee)
        det = np.linalg.det(J @ J.transpose(0, 2, 1))
        return np.sqrt(np.clip(det, 0.0, None))


def _rotvec_batch(R: np.ndarray):
    """Rotation vectors and angles for a (B,3,3) batch, robust near 0 and pi."""
    tr = np.clip((R[:, 0, 0] + R[:, 1, 1] + R[:, 2, 2] - 1.0) * 0.5, -1.0, 1.0)
    ang = np.arccos(tr)
    raw = 0.5 * np.stack(
        [R[:, 2, 1] - R[:, 1, 2], R[:, 0, 2] - R[:, 2, 0], R[:, 1, 0] - R[:, 0, 1]],
        axis=1,
    )
    s = np.sin(ang)
    scale = np.where(s > 1e-7, ang / np.where(s > 1e-7, s, 1.0), 1.0)
    out = raw * scale[:, None]
    near_pi = ang > np.pi - 1e-3
    if near_pi.any():
        for i in np.nonzero(near_pi)[0]:
            Ri = R[i]
            d = np.clip((np.diag(Ri) + 1.0) * 0.5, 0.0, None)
            m = int(np.argmax(d))
            a = np.sqrt(d)
            if a[m] > 0:
                for j2 in range(3):
                    if j2 != m:
                        a[j2] = (Ri[m, j2] + Ri[j2, m]) / (4.0 * a[m])
            n = np.linalg.norm(a)
            if n > 0:
                a = a / n
            out[i] = a * ang[i]
    return out, ang


# -- fixed-q7 solve -----------------------------------------------------------


def default_seeds(model: KinematicModel, req: IkRequest, n: int = 4) -> np.ndarray:
    """Deterministic seed set: previous, neutral, mid-range, mirrored previous."""
    mid = 0.5 * (model.limits_lo + model.limits_hi)
    seeds = [req.q_prev, req.q_neutral, mid, 2.0 * mid - req.q_prev]
    seeds = np.clip(np.array(seeds[:max(n, 1)]), model.limits_lo, model.limits_hi)
    return seeds


def _solve_fixed_q7_batch(chain: SerialChain, R_t, p_t, q7: np.ndarray,
                          seeds: np.ndarray, cfg: IkConfig, stats: IkStats | None = None):
    """DLS on joints 1..6 with joint 7 locked per row.

    q7 is (B,) (one value per seed row); seeds is (B,7). Rows whose error
    stops improving (seed heading nowhere, or pinned at a joint limit) retire
    early; each row's update sequence is independent of the others, so
    batched and one-at-a-time evaluation agree bit for bit. Returns the
    converged, deduplicated, limit-respecting configurations (K,7) and their
    (pos_err, ori_err).
    """
    lo, hi = chain.limits_lo, chain.limits_hi
    Q = np.clip(np.asarray(seeds, dtype=float).copy(), lo, hi)
    Q[:, 6] = np.clip(q7, lo[6], hi[6])
    B = Q.shape[0]
    rows = np.arange(B)
    lam2 = cfg.dls_lambda**2
    eye6 = lam2 * np.eye(6)
    best_err = np.full(B, np.inf)
    stalled = np.zeros(B, dtype=int)
    # set at retirement time, so converged rows need no final re-evaluation
    fin_pos = np.full(B, np.inf)
    fin_ang = np.full(B, np.inf)
    fin_M = np.zeros(B)

    for it in range(cfg.max_iters + 1):
        if len(rows) == 0:
            break
        Qa = Q[rows]
        R_ee, p_ee, z, porg = chain.fk_batch(Qa)
        e_p = p_t[None, :] - p_ee
        R_err = R_t @ R_ee.transpose(0, 2, 1)
        e_r, ang = _rotvec_batch(R_err)
        pos_err = np.linalg.norm(e_p, axis=1)
        if stats is not None:
            stats.dls_iters += len(rows)
        err = pos_err + 0.1 * ang
        improved = err < cfg.stall_factor * best_err[rows]
        best_err[rows] = np.minimum(best_err[rows], err)
        stalled[rows] = np.where(improved, 0, stalled[rows] + 1)
        conv = (pos_err <= cfg.pos_tol) & (ang <= cfg.ori_tol)
        drop = conv | (stalled[rows] >= cfg.stall_window)
        if it >= cfg.far_iters:
            drop |= err > cfg.far_err
        if it == cfg.max_iters:
            drop[:] = True
        J7 = chain.jacobian_batch(z, porg, p_ee)
        if drop.any():
            conv_drop = drop & conv
            if conv_drop.any():
                ridx = rows[conv_drop]
                fin_pos[ridx] = pos_err[conv_drop]
                fin_ang[ridx] = ang[conv_drop]
                Jc = J7[conv_drop]
                det = np.linalg.det(Jc @ Jc.transpose(0, 2, 1))
                fin_M[ridx] = np.sqrt(np.clip(det, 0.0, None))
            keep = ~drop
            rows = rows[keep]
            if len(rows) == 0:
                break
            e_p, e_r, J7 = e_p[keep], e_r[keep], J7[keep]
        J = J7[:, :, :6]
        e = np.concatenate([e_p, e_r], axis=1)
        A = J @ J.transpose(0, 2, 1) + eye6
        g = np.linalg.solve(A, e[:, :, None])[:, :, 0]
        dq = np.einsum("bij,bi->bj", J, g)
        step = np.max(np.abs(dq), axis=1)
        scale = np.where(step > cfg.step_cap, cfg.step_cap / np.where(step > 0, step, 1.0), 1.0)
        dq = dq * scale[:, None]
        Q[rows, :6] = np.clip(Q[rows, :6] + dq, lo[:6], hi[:6])

    ok = (fin_pos <= cfg.pos_tol) & (fin_ang <= cfg.ori_tol)
    if cfg.min_manipulability > 0:
        ok &= fin_M >= cfg.min_manipulability
    if not ok.any():
        return np.empty((0, 7)), np.empty(0), np.empty(0), np.empty(0)

    Qc, pc, ac, Mc = Q[ok], fin_pos[ok], fin_ang[ok], fin_M[ok]
    # dedupe within tolerance per joint, deterministic order
    keys = np.round(Qc / cfg.dedupe_tol).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    Qc, pc, ac, Mc, keys = Qc[order], pc[order], ac[order], Mc[order], keys[order]
    uniq = np.ones(len(Qc), dtype=bool)
    uniq[1:] = np.any(keys[1:] != keys[:-1], axis=1)
    return Qc[uniq], pc[uniq], ac[uniq], Mc[uniq]


def solve_fixed_q7(model: KinematicModel, target: Pose, q7: float,
                   seeds, cfg: IkConfig | None = None,
                   frame: str = "ee") -> list[IkSolution]:
    """Candidate set for a locked last joint; empty when unreachable there."""
    cfg = cfg or IkConfig()
    chain = SerialChain.for_model(model, frame)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] < 1:
        raise ValueError("need at least one seed")
    R_t, p_t = target.q.to_matrix(), target.p
    q7v = np.full(seeds.shape[0], float(q7))
    Qc, pe, ae, _ = _solve_fixed_q7_batch(chain, R_t, p_t, q7v, seeds, cfg)
    return [IkSolution(q, None, float(p), float(a)) for q, p, a in zip(Qc, pe, ae)]


# -- objective and redundancy resolution --------------------------------------


def redundancy_objective(model: KinematicModel, q, req: IkRequest,
                         w: RedundancyWeights, frame: str = "ee") -> float:
    """Weighted manipulability / neutrality / continuity objective."""
    q = np.asarray(q, dtype=float)
    wn, wc = w.resolved(model)
    chain = SerialChain.for_model(model, frame)
    M = float(chain.manipulability_batch(q[None, :])[0])
    neutral = float(np.linalg.norm(wn * (q - req.q_neutral)))
    cont = float(np.linalg.norm(wc * (q - req.q_prev)))
    return w.w_m * M - w.w_n * neutral - w.w_c * cont


def _objective_batch(Q, M, req, w, wn, wc):
    """Objective from precomputed manipulability; no kinematics needed."""
    neutral = np.linalg.norm(wn[None, :] * (Q - req.q_neutral[None, :]), axis=1)
    cont = np.linalg.norm(wc[None, :] * (Q - req.q_prev[None, :]), axis=1)
    return w.w_m * M - w.w_n * neutral - w.w_c * cont


def _g_values_batch(chain, req, w, wn, wc, q7_values, seeds, cfg,
                    stats: IkStats | None = None,
                    keep_best: dict | None = None) -> np.ndarray:
    """g at many q7 values, all points and seeds in one batched DLS run.

    Bitwise identical to evaluating g point by point: every row's update
    sequence depends only on that row. When keep_best is given, the best
    candidate per evaluated q7 is stored there as q7 -> (obj, q, pe, ae).
    """
    q7_values = np.asarray(q7_values, dtype=float)
    G, S = len(q7_values), len(seeds)
    R_t, p_t = req.target.q.to_matrix(), req.target.p
    out = np.full(G, -np.inf)
    chunk = max(1, 16000 // S) * S  # bound peak memory on big grids
    flat_q7 = np.repeat(q7_values, S)
    Q0 = np.tile(seeds, (G, 1))
    for s0 in range(0, G * S, chunk):
        s1 = min(s0 + chunk, G * S)
        Qc, pe, ae, Mc = _solve_fixed_q7_batch(chain, R_t, p_t, flat_q7[s0:s1],
                                               Q0[s0:s1], cfg, stats)
        if len(Qc) == 0:
            continue
        obj = _objective_batch(Qc, Mc, req, w, wn, wc)
        # q7 never changes during DLS, so column 6 identifies the grid point
        gi = np.clip(np.searchsorted(q7_values, Qc[:, 6]), 0, G - 1)
        left = np.abs(q7_values[np.maximum(gi - 1, 0)] - Qc[:, 6])
        right = np.abs(q7_values[gi] - Qc[:, 6])
        gi = np.where(left < right, np.maximum(gi - 1, 0), gi)
        np.maximum.at(out, gi, obj)
        if keep_best is not None:
            for r, (k, o) in enumerate(zip(gi, obj)):
                cur = keep_best.get(q7_values[k])
                if cur is None or o > cur[0]:
                    keep_best[q7_values[k]] = (float(o), Qc[r].copy(),
                                               float(pe[r]), float(ae[r]))
    if stats is not None:
        stats.g_evals += G
    return out


def grid_objective(model: KinematicModel, req: IkRequest, w: RedundancyWeights,
                   q7_grid: np.ndarray, cfg: IkConfig | None = None,
                   frame: str = "ee") -> np.ndarray:
    """g(q7) on a grid of q7 values (the dense-grid oracle used by tests).

    Evaluates the same g as `resolve` (same deterministic seed policy).
    Returns -inf where no candidate converges.
    """
    cfg = cfg or IkConfig()
    chain = SerialChain.for_model(model, frame)
    seeds = default_seeds(model, req, cfg.n_seeds)
    wn, wc = w.resolved(model)
    return _g_values_batch(chain, req, w, wn, wc, np.asarray(q7_grid, dtype=float),
                           seeds, cfg)


def _select_cells(xs, vals, n_best):
    """Cells worth refining: the n_best highest-valued plus every jump or
    feasibility transition (cliff edges hide steep maxima)."""
    cell_max = np.maximum(vals[:-1], vals[1:])
    order = np.argsort(cell_max)[::-1]
    chosen = set()
    for i in order[:n_best]:
        if np.isfinite(cell_max[i]):
            chosen.add(int(i))
    finite = np.isfinite(vals)
    vspan = np.nanmax(np.where(finite, vals, np.nan)) - np.nanmin(np.where(finite, vals, np.nan)) \
        if finite.any() else 0.0
    for i in range(len(xs) - 1):
        if finite[i] != finite[i + 1]:
            chosen.add(i)
        elif finite[i] and finite[i + 1] and abs(vals[i + 1] - vals[i]) > 0.25 * max(vspan, 1e-9):
            chosen.add(i)
    return sorted(chosen)


def resolve(model: KinematicModel, req: IkRequest, w: RedundancyWeights,
            cfg: IkConfig | None = None, frame: str = "ee",
            stats: IkStats | None = None) -> IkSolution:
    """Best candidate over the q7 search interval.

    Raises UnreachableTargetError when no q7 in the joint range yields any
    converged solution.
    """
    cfg = cfg or IkConfig()
    chain = SerialChain.for_model(model, frame)
    wn, wc = w.resolved(model)
    seeds = default_seeds(model, req, cfg.n_seeds)
    lo7, hi7 = model.limits_lo[6], model.limits_hi[6]
    q7_prev = float(np.clip(req.q_prev[6], lo7, hi7))

    best = {}  # q7 -> (obj, q, pe, ae)

    def eval_many(xs):
        return _g_values_batch(chain, req, w, wn, wc, np.asarray(xs, dtype=float),
                               seeds, cfg, stats, keep_best=best)

    def probe(b_lo, b_hi):
        xs = np.linspace(b_lo, b_hi, cfg.probe_points)
        if b_lo <= q7_prev <= b_hi:
            xs = np.sort(np.unique(np.append(xs, q7_prev)))
        return xs, eval_many(xs)

    b_lo = max(lo7, q7_prev - cfg.bracket_halfwidth)
    b_hi = min(hi7, q7_prev + cfg.bracket_halfwidth)
    xs, vals = probe(b_lo, b_hi)
    best_i = int(np.argmax(vals))
    interior = np.isfinite(vals[best_i]) and 0 < best_i < len(xs) - 1
    clipped = b_lo > lo7 or b_hi < hi7
    if not interior and clipped:
        b_lo, b_hi = lo7, hi7
        xs, vals = probe(b_lo, b_hi)
        best_i = int(np.argmax(vals))
        if stats is not None:
            stats.widened = True
    if stats is not None:
        stats.bracket = (b_lo, b_hi)
    if not np.isfinite(vals[best_i]):
        raise UnreachableTargetError("no q7 in range yields a converged solution")

    # hierarchical zoom: refine promising and discontinuous cells
    for level in range(cfg.zoom_levels):
        cells = _select_cells(xs, vals, cfg.zoom_cells if level == 0 else 2)
        if not cells:
            break
        sub = []
        for i in cells:
            sub.append(np.linspace(xs[i], xs[i + 1], cfg.zoom_points))
        sub = np.unique(np.concatenate(sub))
        sub_vals = eval_many(sub)
        merged = np.concatenate([xs, sub])
        order = np.argsort(merged, kind="stable")
        xs = merged[order]
        vals = np.concatenate([vals, sub_vals])[order]
        keep = np.ones(len(xs), dtype=bool)
        keep[1:] = np.diff(xs) > 0
        xs, vals = xs[keep], vals[keep]

    best_i = int(np.argmax(vals))
    if not np.isfinite(vals[best_i]):
        raise UnreachableTargetError("no q7 in range yields a converged solution")

    # local sweep on the canonical dense-scan lattice: kinked maxima (cliff
    # edges) and single-point convergence flickers make g's value sensitive
    # to the exact sample positions, so the winner's neighborhood is sampled
    # at the positions a 2000-point scan of this bracket would use
    x_best, v_best = float(xs[best_i]), float(vals[best_i])
    lattice = np.linspace(b_lo, b_hi, 2000)
    for _ in range(3):
        center = int(np.clip(np.round((x_best - b_lo) / max(b_hi - b_lo, 1e-12)
                                      * 1999.0), 0, 1999))
        window = lattice[max(center - 10, 0):center + 11]
        sv = eval_many(window)
        k = int(np.argmax(sv))
        if sv[k] <= v_best:
            break
        x_best, v_best = float(window[k]), float(sv[k])
    if v_best > vals[best_i]:
        ins = np.searchsorted(xs, x_best)
        xs = np.insert(xs, ins, x_best)
        vals = np.insert(vals, ins, v_best)
        best_i = int(ins)

    # Brent polish inside the final cell around the best point
    def g_scalar(x):
        x = float(x)
        hit = best.get(x)
        if hit is None:
            eval_many(np.array([x]))
            hit = best.get(x)
        return -np.inf if hit is None else hit[0]

    r_lo = float(xs[max(best_i - 1, 0)])
    r_hi = float(xs[min(best_i + 1, len(xs) - 1)])
    res = brent_min(lambda x: -g_scalar(x), r_lo, r_hi,
                    xatol=cfg.brent_tol, maxiter=cfg.brent_maxiter)
    if stats is not None:
        stats.brent_iters = res.niter
    q7_star = res.x if -res.fx >= vals[best_i] else float(xs[best_i])

    hit = best.get(float(q7_star))
    if hit is None:
        eval_many(np.array([float(q7_star)]))
        hit = best.get(float(q7_star))
    if hit is None:
        raise UnreachableTargetError("search collapsed onto an unreachable q7")
    obj, q_best, pe, ae = hit
    tie = _tie_break(best, obj, req.q_prev)
    if tie is not None:
        obj, q_best, pe, ae = tie
    return IkSolution(q_best, float(obj), float(pe), float(ae))


def _tie_break(best, top_obj, q_prev, tol=1e-12):
    """Among evaluated points whose objective ties the winner, prefer the
    candidate closest to q_prev in the infinity norm."""
    tied = [v for v in best.values() if v[0] >= top_obj - tol]
    if len(tied) <= 1:
        return None
    dists = [float(np.max(np.abs(v[1] - q_prev))) for v in tied]
    return tied[int(np.argmin(dists))]
