#!/usr/bin/env python3
"""Regenerate the built-in model documents under src/teleopkit/models/.

The numbers are repo fixtures chosen for a human-scale generic 7-DOF arm and
a 12-DOF five-finger hand; they are not calibrated to any physical robot.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "teleopkit" / "models"

ARM_NEUTRAL = [0.0, 0.5, 0.0, 1.2, 0.0, 0.6, 0.0]


def arm_joints(parent_of_first=None, prefix=""):
    j = [
        {"name": "j1", "type": "revolute", "parent": parent_of_first,
         "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0.20]}, "limits": [-2.9, 2.9]},
        {"name": "j2", "type": "revolute", "parent": "j1",
         "axis": [0, 1, 0], "origin": {"xyz": [0, 0, 0.05]}, "limits": [-1.9, 1.9]},
        {"name": "j3", "type": "revolute", "parent": "j2",
         "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0.25]}, "limits": [-2.9, 2.9]},
        {"name": "j4", "type": "revolute", "parent": "j3",
         "axis": [0, 1, 0], "origin": {"xyz": [0, 0, 0.05]}, "limits": [-2.2, 2.2]},
        {"name": "j5", "type": "revolute", "parent": "j4",
         "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0.25]}, "limits": [-2.9, 2.9]},
        {"name": "j6", "type": "revolute", "parent": "j5",
         "axis": [0, 1, 0], "origin": {"xyz": [0, 0, 0.05]}, "limits": [-2.0, 2.0]},
        {"name": "j7", "type": "revolute", "parent": "j6",
         "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0.07]}, "limits": [-2.9, 2.9]},
        {"name": "ee_fixed", "type": "fixed", "parent": "j7",
         "origin": {"xyz": [0, 0, 0.06]}},
    ]
    if parent_of_first is None:
        j[0].pop("parent")
        j[0]["parent"] = None
    return j


def hand_joints(parent="palm_mount", mount_origin=None):
    """Five fingers: thumb 3 DOF, index 3 DOF + mimic DIP, middle 2 DOF +
    mimic DIP, ring 2 DOF, pinky 2 DOF. 12 actuated, 14 moving joints."""
    joints = [
        {"name": "palm", "type": "fixed", "parent": parent,
         "origin": {"xyz": mount_origin or [0, 0, 0]}},
        # thumb, rotated toward opposition on the index side (-y)
        {"name": "thumb_abd", "type": "revolute", "parent": "palm",
         "axis": [0, 0, 1], "origin": {"xyz": [0.020, -0.040, 0], "rpy": [0, 0, -0.9]},
         "limits": [0.1, 1.3]},
        {"name": "thumb_mcp", "type": "revolute", "parent": "thumb_abd",
         "axis": [0, 1, 0], "origin": {"xyz": [0.035, 0, 0]}, "limits": [0.0, 1.3]},
        {"name": "thumb_ip", "type": "revolute", "parent": "thumb_mcp",
         "axis": [0, 1, 0], "origin": {"xyz": [0.032, 0, 0]}, "limits": [0.0, 1.2]},
        {"name": "thumb_tip", "type": "fixed", "parent": "thumb_ip",
         "origin": {"xyz": [0.030, 0, 0]}},
        # index (has abduction; DIP mimics PIP)
        {"name": "index_abd", "type": "revolute", "parent": "palm",
         "axis": [0, 0, 1], "origin": {"xyz": [0.085, -0.034, 0]}, "limits": [-0.25, 0.25]},
        {"name": "index_mcp", "type": "revolute", "parent": "index_abd",
         "axis": [0, 1, 0], "origin": {"xyz": [0.005, 0, 0]}, "limits": [0.0, 1.6]},
        {"name": "index_pip", "type": "revolute", "parent": "index_mcp",
         "axis": [0, 1, 0], "origin": {"xyz": [0.040, 0, 0]}, "limits": [0.0, 1.8]},
        {"name": "index_dip", "type": "revolute", "parent": "index_pip",
         "axis": [0, 1, 0], "origin": {"xyz": [0.025, 0, 0]}, "limits": [0.0, 1.26],
         "mimic": {"joint": "index_pip", "multiplier": 0.7, "offset": 0.0}},
        {"name": "index_tip", "type": "fixed", "parent": "index_dip",
         "origin": {"xyz": [0.022, 0, 0]}},
        # middle (DIP mimics PIP)
        {"name": "middle_mcp", "type": "revolute", "parent": "palm",
         "axis": [0, 1, 0], "origin": {"xyz": [0.090, 0, 0]}, "limits": [0.0, 1.6]},
        {"name": "middle_pip", "type": "revolute", "parent": "middle_mcp",
         "axis": [0, 1, 0], "origin": {"xyz": [0.043, 0, 0]}, "limits": [0.0, 1.8]},
        {"name": "middle_dip", "type": "revolute", "parent": "middle_pip",
         "axis": [0, 1, 0], "origin": {"xyz": [0.027, 0, 0]}, "limits": [0.0, 1.26],
         "mimic": {"joint": "middle_pip", "multiplier": 0.7, "offset": 0.0}},
        {"name": "middle_tip", "type": "fixed", "parent": "middle_dip",
         "origin": {"xyz": [0.024, 0, 0]}},
        # ring (merged distal segment)
        {"name": "ring_mcp", "type": "revolute", "parent": "palm",
         "axis": [0, 1, 0], "origin": {"xyz": [0.085, 0.034, 0]}, "limits": [0.0, 1.6]},
        {"name": "ring_pip", "type": "revolute", "parent": "ring_mcp",
         "axis": [0, 1, 0], "origin": {"xyz": [0.040, 0, 0]}, "limits": [0.0, 1.8]},
        {"name": "ring_tip", "type": "fixed", "parent": "ring_pip",
         "origin": {"xyz": [0.045, 0, 0]}},
        # pinky (merged distal segment)
        {"name": "pinky_mcp", "type": "revolute", "parent": "palm",
         "axis": [0, 1, 0], "origin": {"xyz": [0.078, 0.068, 0]}, "limits": [0.0, 1.6]},
        {"name": "pinky_pip", "type": "revolute", "parent": "pinky_mcp",
         "axis": [0, 1, 0], "origin": {"xyz": [0.034, 0, 0]}, "limits": [0.0, 1.8]},
        {"name": "pinky_tip", "type": "fixed", "parent": "pinky_pip",
         "origin": {"xyz": [0.040, 0, 0]}},
    ]
    return joints


HAND_FRAMES = {
    "wrist": "palm",
    "palm": "palm",
    "thumb_tip": "thumb_tip",
    "index_tip": "index_tip",
    "middle_tip": "middle_tip",
    "ring_tip": "ring_tip",
    "pinky_tip": "pinky_tip",
    "index_mcp": "index_mcp",
    "middle_mcp": "middle_mcp",
    "ring_mcp": "ring_mcp",
    "pinky_mcp": "pinky_mcp",
}

HAND_NEUTRAL = [0.3, 0.2, 0.2,  # thumb
                0.0, 0.2, 0.2,  # index
                0.2, 0.2,       # middle
                0.2, 0.2,       # ring
                0.2, 0.2]       # pinky


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    arm = {
        "format": "model-v1",
        "name": "arm7-generic",
        "joints": arm_joints(),
        "frames": {"ee": "ee_fixed", "wrist": "j7",
                   **{f"j{i}": f"j{i}" for i in range(1, 8)}},
        "neutral": ARM_NEUTRAL,
    }

    hand = {
        "format": "model-v1",
        "name": "hand12-generic",
        "joints": [dict(j, parent=None) if j["name"] == "palm" else j
                   for j in hand_joints(parent=None)],
        "frames": HAND_FRAMES,
        "neutral": HAND_NEUTRAL,
    }

    composite = {
        "format": "model-v1",
        "name": "arm7-hand12",
        "joints": arm_joints() + hand_joints(parent="ee_fixed",
                                             mount_origin=[0, 0, 0.02]),
        "frames": {"ee": "ee_fixed", **{f"j{i}": f"j{i}" for i in range(1, 8)},
                   **HAND_FRAMES},
        "neutral": ARM_NEUTRAL + HAND_NEUTRAL,
    }

    for doc in (arm, hand, composite):
        path = OUT / (doc["name"].replace("-", "_") + ".json")
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
