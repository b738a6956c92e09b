"""Hand retargeting tests.

Adaptive-reference branch behavior and weights follow the published pinch
thresholds exactly; solver correctness is checked with self-consistent
targets generated from the robot hand's own forward kinematics (zero
retargeting gap), so ground truth exists without human mocap."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleopkit.retarget import (
    FINGERTIPS,
    REF_PAIRS,
    TIP_FRAMES,
    DegenerateHandError,
    HandFrame,
    RefVectorSpec,
    RetargetConfig,
    RetargetSession,
    build_references,
    ema_filter,
    extension_ratio,
    huber,
    normalize_frame,
    objective_and_gradient,
    pinky_gamma,
    solve,
)
from teleopkit.se3 import Pose, Quat
from tests.conftest import random_q

FLAT_HAND = np.array([
    [0.000, 0.000, 0.0],                                       # wrist
    [0.020, -0.030, 0.0], [0.045, -0.050, 0.0],
    [0.065, -0.060, 0.0], [0.085, -0.070, 0.0],                # thumb
    [0.085, -0.025, 0.0], [0.125, -0.025, 0.0],
    [0.150, -0.025, 0.0], [0.172, -0.025, 0.0],                # index
    [0.090, 0.000, 0.0], [0.133, 0.000, 0.0],
    [0.160, 0.000, 0.0], [0.184, 0.000, 0.0],                  # middle
    [0.085, 0.022, 0.0], [0.125, 0.022, 0.0],
    [0.150, 0.022, 0.0], [0.170, 0.022, 0.0],                  # ring
    [0.078, 0.042, 0.0], [0.112, 0.042, 0.0],
    [0.132, 0.042, 0.0], [0.152, 0.042, 0.0],                  # pinky
])


def hand_frame(landmarks, t=0.0):
    return HandFrame(t, Pose.identity(), np.asarray(landmarks, dtype=float))


def refs_from_fk(model, q, weight=1.0):
    """Self-consistent references: the robot hand's own vector geometry."""
    frames = sorted(set(TIP_FRAMES.values()))
    pos = {f: model.fk(q, f).p for f in frames}
    out = []
    for (i, j) in REF_PAIRS:
        fa, fb = TIP_FRAMES[i], TIP_FRAMES[j]
        kind = "wrist-finger" if i == 0 else "finger-finger"
        out.append(RefVectorSpec(kind, (i, j), (fa, fb), "free", weight,
                                 pos[fb] - pos[fa]))
    return out


class TestHandFrame:
    def test_rejects_wrong_count(self):
        with pytest.raises(ValueError):
            hand_frame(np.zeros((20, 3)))

    def test_rejects_oversized_hand(self):
        lm = FLAT_HAND.copy()
        lm[20] = [0.5, 0, 0]
        with pytest.raises(ValueError, match="0.35"):
            hand_frame(lm)


class TestNormalize:
    def test_canonical_frame_is_fixed_point(self):
        out = normalize_frame(hand_frame(FLAT_HAND))
        np.testing.assert_allclose(out.landmarks, FLAT_HAND, atol=1e-12)

    def test_rigid_motion_invariance(self, rng):
        base = normalize_frame(hand_frame(FLAT_HAND)).landmarks
        for _ in range(10):
            R = Quat.from_axis_angle(rng.standard_normal(3), rng.uniform(0, 3)).to_matrix()
            t = rng.uniform(-1, 1, 3)
            moved = FLAT_HAND @ R.T + t
            out = normalize_frame(hand_frame(moved)).landmarks
            np.testing.assert_allclose(out, base, atol=1e-9)

    def test_change_of_basis_oracle(self, rng):
        R = Quat.from_axis_angle([0.2, 0.5, -1.0], 0.9).to_matrix()
        t = np.array([0.3, -0.2, 0.5])
        lm = FLAT_HAND @ R.T + t
        out = normalize_frame(hand_frame(lm)).landmarks
        # independent dense change-of-basis computation
        rel = lm - lm[0]
        vi, vm = rel[5], rel[9]
        x = vm / np.linalg.norm(vm)
        z = np.cross(vi, vm)
        z = z / np.linalg.norm(z)
        y = np.cross(z, x)
        B = np.stack([x, y, z])
        np.testing.assert_allclose(out, rel @ B.T, atol=1e-12)

    def test_degenerate_palm(self):
        lm = FLAT_HAND.copy()
        lm[5] = lm[9] * 0.5  # index MCP collinear with middle MCP
        with pytest.raises(DegenerateHandError):
            normalize_frame(hand_frame(lm))

    def test_hand_scale_applied(self):
        cfg = RetargetConfig(hand_scale=0.5)
        out = normalize_frame(hand_frame(FLAT_HAND), cfg)
        np.testing.assert_allclose(out.landmarks, 0.5 * FLAT_HAND, atol=1e-12)


class TestBuildReferences:
    def test_projected_finger_pair(self):
        lm = FLAT_HAND.copy()
        lm[4] = lm[8] + [0.005, 0, 0]  # thumb tip 5 mm from index tip
        refs = build_references(hand_frame(lm), None)
        spec = next(s for s in refs if s.human == (4, 8))
        assert spec.state == "projected"
        assert spec.weight == 400.0
        assert np.linalg.norm(spec.ref) == pytest.approx(1e-4, rel=1e-9)

    def test_free_wrist_finger_unit_scale(self):
        lm = FLAT_HAND.copy()
        lm[8] = [0.15, 0, 0]
        refs = build_references(hand_frame(lm), None)
        spec = next(s for s in refs if s.human == (0, 8))
        assert spec.state == "free"
        assert spec.weight == 1.0
        np.testing.assert_array_equal(spec.ref, lm[8] - lm[0])

    def test_projected_wrist_finger_weight_and_length(self):
        lm = FLAT_HAND.copy()
        lm[8] = [0.02, 0, 0]
        refs = build_references(hand_frame(lm), None)
        spec = next(s for s in refs if s.human == (0, 8))
        assert spec.state == "projected"
        assert spec.weight == 200.0
        assert np.linalg.norm(spec.ref) == pytest.approx(3e-2, rel=1e-9)

    def test_boundary_retains_previous(self):
        lm = FLAT_HAND.copy()
        lm[4] = lm[8] + [0.03, 0, 0]  # exactly at both thresholds
        marker = RefVectorSpec("finger-finger", (4, 8),
                               ("thumb_tip", "index_tip"), "projected",
                               123.0, np.array([9.0, 9.0, 9.0]))
        refs = build_references(hand_frame(lm), [marker])
        spec = next(s for s in refs if s.human == (4, 8))
        assert spec.weight == 123.0
        assert spec.state == "projected"
        np.testing.assert_array_equal(spec.ref, [9.0, 9.0, 9.0])

    def test_hysteresis_band(self):
        cfg = RetargetConfig(d_proj=0.02, d_esc=0.04)

        def frame_with_gap(d):
            lm = FLAT_HAND.copy()
            lm[4] = lm[8] + [d, 0, 0]
            return hand_frame(lm)

        refs = build_references(frame_with_gap(0.05), None, cfg)
        states = [next(s for s in refs if s.human == (4, 8)).state]
        for d in (0.03, 0.015, 0.03, 0.05):
            refs = build_references(frame_with_gap(d), refs, cfg)
            states.append(next(s for s in refs if s.human == (4, 8)).state)
        assert states == ["free", "free", "projected", "projected", "free"]

    def test_fifteen_specs_in_order(self):
        refs = build_references(hand_frame(FLAT_HAND), None)
        assert len(refs) == 15
        assert [s.human for s in refs] == REF_PAIRS
        assert sum(s.kind == "wrist-finger" for s in refs) == 5

    def test_pinky_reference_scaled_by_gamma(self):
        frame = hand_frame(FLAT_HAND)
        gamma = pinky_gamma(frame)
        refs = build_references(frame, None)
        spec = next(s for s in refs if s.human == (0, 20))
        np.testing.assert_allclose(spec.ref, (FLAT_HAND[20] - FLAT_HAND[0]) * gamma,
                                   atol=1e-15)


class TestPinkyGamma:
    def test_fully_extended(self):
        assert pinky_gamma(hand_frame(FLAT_HAND)) == pytest.approx(2.2)

    def test_fully_curled(self):
        lm = FLAT_HAND.copy()
        base = lm[17]
        lm[18] = base + [0.040, 0, 0]
        lm[19] = base + [0.005, 0, 0]
        lm[20] = base + [0.011, 0, 0]
        f = hand_frame(lm)
        assert extension_ratio(f) < 0.3
        assert pinky_gamma(f) == pytest.approx(1.2)

    def test_midpoint_zigzag(self):
        # three equal segments with a bend chosen so the straight-line
        # distance is exactly 0.625 of the path length
        L = 0.03
        c = -0.37109375  # makes |2u + v| = 1.875 with unit u, v
        u = np.array([1.0, 0.0, 0.0])
        v = np.array([c, np.sqrt(1 - c * c), 0.0])
        lm = FLAT_HAND.copy()
        lm[18] = lm[17] + L * u
        lm[19] = lm[18] + L * v
        lm[20] = lm[19] + L * u
        f = hand_frame(lm)
        assert extension_ratio(f) == pytest.approx(0.625, abs=1e-12)
        assert pinky_gamma(f) == pytest.approx(1.7, abs=1e-12)

    def test_monotone_in_ratio(self):
        cfg = RetargetConfig()
        from teleopkit.retarget import gamma_from_ratio
        rs = np.linspace(0, 1, 50)
        gs = [gamma_from_ratio(r, cfg) for r in rs]
        assert all(b >= a for a, b in zip(gs, gs[1:]))


class TestHuber:
    def test_zero(self):
        assert huber(0.0, 0.02) == 0.0

    def test_c1_at_delta(self):
        d = 0.037
        assert huber(d, d) == pytest.approx(d * d / 2, abs=1e-18)
        # both branch formulas agree at the joint
        assert d * (d - d / 2) == pytest.approx(d * d / 2)

    def test_linear_branch_value(self):
        assert huber(0.1, 0.02) == pytest.approx(0.0018, abs=1e-18)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            huber(1.0, 0.0)


class TestEma:
    def test_step_response(self):
        out = ema_filter(np.ones(3), np.zeros(3), 0.6)
        np.testing.assert_allclose(out, 0.6)

    def test_identity_cases(self):
        q = np.array([0.2, -0.4])
        np.testing.assert_array_equal(ema_filter(q, q, 0.6), q)
        np.testing.assert_array_equal(ema_filter(q, np.zeros(2), 1.0), q)

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=6),
           st.floats(0.01, 1.0))
    @settings(max_examples=100)
    def test_bounded_by_input_hull(self, vals, alpha):
        q_new = np.array(vals)
        q_prev = q_new[::-1].copy()
        out = ema_filter(q_new, q_prev, alpha)
        lo = np.minimum(q_new, q_prev) - 1e-12
        hi = np.maximum(q_new, q_prev) + 1e-12
        assert np.all(out >= lo) and np.all(out <= hi)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ema_filter(np.zeros(3), np.zeros(2), 0.5)


class TestSolve:
    def test_fixed_point_self_consistent(self, hand12):
        q_star = hand12.neutral.copy()
        refs = refs_from_fk(hand12, q_star)
        frame = hand_frame(FLAT_HAND)
        out = solve(frame, q_star, refs, hand12)
        np.testing.assert_allclose(out, q_star, atol=1e-6)

    def test_recovery_from_random_warm_start(self, hand12, rng):
        # spot check; the 50-fixture budgeted run lives in acceptance
        cfg = RetargetConfig(lam=0.0)
        hits = 0
        for _ in range(10):
            q_star = random_q(hand12, rng, margin=0.1)
            refs = refs_from_fk(hand12, q_star)
            q0 = random_q(hand12, rng, margin=0.05)
            out = solve(hand_frame(FLAT_HAND), q0, refs, hand12, cfg)
            if np.max(np.abs(out - q_star)) <= 1e-3:
                hits += 1
        assert hits >= 9

    def test_large_lambda_pins_previous(self, hand12, rng):
        cfg = RetargetConfig(lam=1e6)
        q_prev = random_q(hand12, rng, margin=0.2)
        refs = refs_from_fk(hand12, random_q(hand12, rng, margin=0.2))
        out = solve(hand_frame(FLAT_HAND), q_prev, refs, hand12, cfg)
        np.testing.assert_allclose(out, q_prev, atol=1e-4)

    def test_output_within_limits_exactly(self, hand12, rng):
        for _ in range(5):
            refs = refs_from_fk(hand12, random_q(hand12, rng))
            out = solve(hand_frame(FLAT_HAND), random_q(hand12, rng), refs, hand12)
            assert np.all(out >= hand12.limits_lo)
            assert np.all(out <= hand12.limits_hi)

    def test_gradient_matches_central_differences(self, hand12, rng):
        # spot check; the 100-configuration run lives in acceptance
        cfg = RetargetConfig()
        h = 1e-6
        worst = 0.0
        for _ in range(20):
            q = random_q(hand12, rng, margin=0.05)
            q_prev = random_q(hand12, rng, margin=0.05)
            refs = refs_from_fk(hand12, random_q(hand12, rng, margin=0.05))
            for s in refs:
                s.ref = s.ref + rng.normal(0, 0.01, 3)
                s.weight = float(rng.choice([1.0, 200.0, 400.0]))
            _, g = objective_and_gradient(hand12, q, q_prev, refs, cfg)
            g_fd = np.zeros_like(g)
            for k in range(hand12.dof):
                qp, qm = q.copy(), q.copy()
                qp[k] += h
                qm[k] -= h
                fp, _ = objective_and_gradient(hand12, qp, q_prev, refs, cfg)
                fm, _ = objective_and_gradient(hand12, qm, q_prev, refs, cfg)
                g_fd[k] = (fp - fm) / (2 * h)
            worst = max(worst, float(np.max(np.abs(g - g_fd))))
        assert worst <= 1e-5


class TestSession:
    def _stream(self, n=12):
        frames = []
        for k in range(n):
            lm = FLAT_HAND.copy()
            curl = 0.4 + 0.4 * np.sin(k / 3.0)
            lm[8] = lm[8] * (1 - 0.3 * curl)
            lm[12] = lm[12] * (1 - 0.3 * curl)
            frames.append(HandFrame(k / 30.0, Pose.identity(), lm))
        return frames

    def test_deterministic_replay(self, hand12):
        def run():
            sess = RetargetSession(hand12)
            return [sess.step(f).tobytes() for f in self._stream()]

        assert run() == run()

    def test_outputs_within_limits(self, hand12):
        sess = RetargetSession(hand12)
        for f in self._stream():
            q = sess.step(f)
            assert np.all(q >= hand12.limits_lo - 1e-12)
            assert np.all(q <= hand12.limits_hi + 1e-12)
        assert sess.stats.solves == 12
