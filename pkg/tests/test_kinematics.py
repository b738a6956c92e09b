"""Kinematics tests: FK against a dense 4x4 chain oracle, Jacobians against
central differences, manipulability against an SVD product oracle."""

import json
import math

import numpy as np
import pytest

from teleopkit.kinematics import (
    ModelError,
    UnknownFrameError,
    builtin_model_path,
    load_model,
    load_named_model,
)
from tests.conftest import PLANAR2_DOC, random_q


def builtin_doc(name):
    return json.loads(builtin_model_path(name).read_text())


# -- independent dense-matrix oracle, written against the raw document ------

def _oracle_rpy(r, p, y):
    cr, sr, cp, sp, cy, sy = (
        math.cos(r), math.sin(r), math.cos(p), math.sin(p), math.cos(y), math.sin(y),
    )
    return (
        np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1.0]])
        @ np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        @ np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    )


def oracle_fk(doc, values_by_name, frame_joint):
    """Dense 4x4 chain multiplication straight off the raw document."""
    world = {}
    for j in doc["joints"]:
        T = np.eye(4)
        origin = j.get("origin", {})
        T[:3, :3] = _oracle_rpy(*origin.get("rpy", [0, 0, 0]))
        T[:3, 3] = origin.get("xyz", [0, 0, 0])
        if j["type"] == "revolute":
            a = np.asarray(j["axis"], float)
            a = a / np.linalg.norm(a)
            th = values_by_name.get(j["name"], 0.0)
            K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
            Rm = np.eye(3) + math.sin(th) * K + (1 - math.cos(th)) * (K @ K)
            M = np.eye(4)
            M[:3, :3] = Rm
            T = T @ M
        elif j["type"] == "prismatic":
            a = np.asarray(j["axis"], float)
            a = a / np.linalg.norm(a)
            M = np.eye(4)
            M[:3, 3] = a * values_by_name.get(j["name"], 0.0)
            T = T @ M
        parent = j.get("parent")
        world[j["name"]] = (world[parent] if parent else np.eye(4)) @ T
    return world[frame_joint]


def doc_values(model, doc, q):
    vals = model.expand(q)
    return {j.name: vals[i] for i, j in enumerate(model.joints)}


class TestLoad:
    def test_arm_dof_hand_count(self, arm7):
        # hand count of the shipped document: 7 revolute + 1 fixed
        assert arm7.dof == 7
        assert arm7.n_joints == 8

    def test_hand_dof_and_moving_frames(self, hand12):
        assert hand12.dof == 12
        assert sum(1 for j in hand12.joints if j.moving) == 14

    def test_bad_limits_names_joint(self):
        doc = json.loads(json.dumps(PLANAR2_DOC))
        doc["joints"][1]["limits"] = [1.0, -1.0]
        with pytest.raises(ModelError, match="j2"):
            load_model(json.dumps(doc))

    def test_mimic_cycle_rejected(self):
        doc = json.loads(json.dumps(PLANAR2_DOC))
        doc["joints"][1]["mimic"] = {"joint": "j2", "multiplier": 1.0}
        with pytest.raises(ModelError, match="j2"):
            load_model(json.dumps(doc))

    def test_mimic_of_mimic_rejected(self, hand12):
        doc = builtin_doc("builtin:hand12-generic")
        for j in doc["joints"]:
            if j["name"] == "index_tip":
                j["type"] = "revolute"
                j["axis"] = [0, 1, 0]
                j["limits"] = [0, 1]
                j["mimic"] = {"joint": "index_dip", "multiplier": 1.0}
        with pytest.raises(ModelError, match="index_dip"):
            load_model(json.dumps(doc))

    def test_unknown_frame_reference(self):
        doc = json.loads(json.dumps(PLANAR2_DOC))
        doc["frames"]["ghost"] = "nonexistent"
        with pytest.raises(ModelError, match="ghost"):
            load_model(json.dumps(doc))

    def test_unknown_frame_query(self, planar2):
        with pytest.raises(UnknownFrameError):
            planar2.fk(np.zeros(2), "elbow")

    def test_unsupported_format(self):
        with pytest.raises(ModelError, match="format"):
            load_model(json.dumps({"format": "model-v2", "joints": []}))


class TestFk:
    def test_zero_config_matches_dense_chain_oracle(self, arm7):
        doc = builtin_doc("builtin:arm7-generic")
        q = np.zeros(7)
        expect = oracle_fk(doc, doc_values(arm7, doc, q), "ee_fixed")
        np.testing.assert_allclose(arm7.fk_matrix(q, "ee"), expect, atol=1e-12)

    def test_random_configs_match_oracle(self, arm7, hand12, rng):
        arm_doc = builtin_doc("builtin:arm7-generic")
        hand_doc = builtin_doc("builtin:hand12-generic")
        for _ in range(20):
            q = random_q(arm7, rng)
            expect = oracle_fk(arm_doc, doc_values(arm7, arm_doc, q), "j5")
            np.testing.assert_allclose(arm7.fk_matrix(q, "joint:j5"), expect, atol=1e-10)
            qh = random_q(hand12, rng)
            expect = oracle_fk(hand_doc, doc_values(hand12, hand_doc, qh), "pinky_tip")
            np.testing.assert_allclose(hand12.fk_matrix(qh, "pinky_tip"), expect, atol=1e-10)

    def test_joint1_rotation_is_rigid_rotation(self, arm7, rng):
        q = random_q(arm7, rng)
        theta = 0.6
        p0 = arm7.fk(q, "ee").p
        q2 = q.copy()
        q2[0] += theta
        p1 = arm7.fk(q2, "ee").p
        c, s = math.cos(theta), math.sin(theta)
        Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        np.testing.assert_allclose(p1, Rz @ p0, atol=1e-12)

    def test_planar_two_link_trig(self, planar2):
        pose = planar2.fk(np.array([0.0, math.pi / 2]), "tip")
        np.testing.assert_allclose(pose.p, [1.0, 1.0, 0.0], atol=1e-12)

    def test_mimic_expansion_consistency(self, hand12):
        # dip angle must equal 0.7 * pip regardless of how q is assembled
        q = hand12.neutral.copy()
        i_pip = hand12.dof_names.index("index_pip")
        q[i_pip] = 1.1
        vals = hand12.expand(q)
        names = [j.name for j in hand12.joints]
        assert vals[names.index("index_dip")] == pytest.approx(0.7 * 1.1, abs=1e-15)

        # equivalent explicit model: mimic replaced by a fixed-value revolute
        doc = builtin_doc("builtin:hand12-generic")
        explicit = {j.name: v for j, v in zip(hand12.joints, vals)}
        pose_a = hand12.fk_matrix(q, "index_tip")
        pose_b = oracle_fk(doc, explicit, "index_tip")
        np.testing.assert_allclose(pose_a, pose_b, atol=1e-12)


class TestJacobian:
    def test_shape_excludes_fixed_and_mimic(self, hand12):
        J = hand12.jacobian(hand12.neutral, "index_tip")
        assert J.shape == (6, 12)

    def test_mimic_column_folding(self, hand12):
        # index_tip depends on index_pip directly and through the mimic dip
        q = hand12.neutral
        J = hand12.jacobian(q, "index_tip")
        i_pip = hand12.dof_names.index("index_pip")
        h = 1e-7
        qp, qm = q.copy(), q.copy()
        qp[i_pip] += h
        qm[i_pip] -= h
        fd = (hand12.fk(qp, "index_tip").p - hand12.fk(qm, "index_tip").p) / (2 * h)
        np.testing.assert_allclose(J[:3, i_pip], fd, atol=1e-7)

    @pytest.mark.parametrize("model_name,frame", [
        ("builtin:arm7-generic", "ee"),
        ("builtin:hand12-generic", "index_tip"),
        ("builtin:hand12-generic", "thumb_tip"),
    ])
    def test_central_difference_oracle(self, model_name, frame, rng):
        model = load_named_model(model_name)
        h = 1e-7
        worst = 0.0
        for _ in range(100):
            q = random_q(model, rng, margin=0.05)
            J = model.jacobian(q, frame)
            J_fd = np.zeros_like(J)
            for k in range(model.dof):
                qp, qm = q.copy(), q.copy()
                qp[k] += h
                qm[k] -= h
                Tp = model.fk_matrix(qp, frame)
                Tm = model.fk_matrix(qm, frame)
                J_fd[:3, k] = (Tp[:3, 3] - Tm[:3, 3]) / (2 * h)
                dR = (Tp[:3, :3] - Tm[:3, :3]) / (2 * h) @ model.fk_matrix(q, frame)[:3, :3].T
                J_fd[3:, k] = [dR[2, 1], dR[0, 2], dR[1, 0]]
            worst = max(worst, float(np.max(np.abs(J - J_fd))))
        assert worst <= 1e-6

    def test_planar_stretched_linear_rank_one(self, planar2):
        J = planar2.jacobian(np.array([0.3, 0.0]), "tip")
        rank = np.linalg.matrix_rank(J[:2, :], tol=1e-9)
        assert rank == 1

    def test_consistency_richardson(self, arm7, rng):
        # ||twist(fk(q+d), fk(q)) - J d|| should shrink ~4x when d halves
        for _ in range(5):
            q = random_q(arm7, rng, margin=0.1)
            d = rng.standard_normal(7)
            d /= np.linalg.norm(d)
            J = arm7.jacobian(q, "ee")

            def err(scale):
                T0 = arm7.fk_matrix(q, "ee")
                T1 = arm7.fk_matrix(q + scale * d, "ee")
                dp = T1[:3, 3] - T0[:3, 3]
                dR = T1[:3, :3] @ T0[:3, :3].T
                ang = np.array([dR[2, 1] - dR[1, 2], dR[0, 2] - dR[2, 0], dR[1, 0] - dR[0, 1]]) / 2
                tw = np.concatenate([dp, ang])
                return np.linalg.norm(tw - J @ (scale * d))

            e1, e2 = err(1e-3), err(5e-4)
            assert e1 / max(e2, 1e-300) > 3.0 or e1 < 1e-12


class TestManipulability:
    def test_singular_is_zero(self, planar2):
        # fully stretched planar arm, reduced to its planar rows
        m = planar2.manipulability(np.array([0.2, 0.0]), "tip", rows=(0, 1))
        assert m == pytest.approx(0.0, abs=1e-9)

    def test_planar_symbolic_det(self, planar2):
        # |det J| = L1 L2 |sin q2| with L1 = L2 = 1
        m = planar2.manipulability(np.array([0.4, math.pi / 2]), "tip", rows=(0, 1))
        assert m == pytest.approx(1.0, abs=1e-12)
        m2 = planar2.manipulability(np.array([-0.7, 0.6]), "tip", rows=(0, 1))
        assert m2 == pytest.approx(abs(math.sin(0.6)), abs=1e-12)

    def test_svd_product_oracle(self, arm7, rng):
        for _ in range(10):
            q = random_q(arm7, rng, margin=0.1)
            J = arm7.jacobian(q, "ee")
            sv = np.linalg.svd(J, compute_uv=False)
            assert arm7.manipulability(q, "ee") == pytest.approx(
                float(np.prod(sv)), abs=1e-9
            )

    def test_invariant_under_base_displacement(self, rng):
        doc = builtin_doc("builtin:arm7-generic")
        moved = json.loads(json.dumps(doc))
        moved["joints"][0]["origin"] = {"xyz": [0.7, -0.2, 0.1], "rpy": [0.3, -0.5, 1.1]}
        a = load_model(json.dumps(doc))
        b = load_model(json.dumps(moved))
        for _ in range(5):
            q = random_q(a, rng)
            assert a.manipulability(q, "ee") == pytest.approx(
                b.manipulability(q, "ee"), abs=1e-9
            )
