"""Pedestrian and scene geometry assembly.

A pedestrian is a rigid-piece rig of oriented boxes (head, torso, pelvis,
2x2 arm segments, 2x2 leg segments, feet, accessory prims) articulated by
sagittal swing angles.  Scenes contribute label-0 boxes: ground slab,
obstacles, and for indoor scenes walls plus a ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .identities import SKIN_PALETTE, IdentitySpec
from .world import SceneSpec

SHOE_COLOR = (0.12, 0.10, 0.10)
ACCESSORY_COLORS = {
    "mask": (0.92, 0.92, 0.94),
    "glasses": (0.06, 0.06, 0.07),
    "hat": (0.25, 0.20, 0.18),
    "earphones": (0.05, 0.05, 0.05),
    "scarf": (0.65, 0.12, 0.12),
    "bag": (0.45, 0.30, 0.18),
    "backpack": (0.15, 0.25, 0.50),
    "handbag": (0.72, 0.60, 0.40),
    "umbrella": (0.40, 0.15, 0.45),
}


@dataclass
class Prim:
    """Oriented box: world center, rotation, half extents, label, texture."""

    center: np.ndarray  # (3,)
    rotation: np.ndarray  # (3, 3)
    half: np.ndarray  # (3,)
    label: int  # 0 = scenery, else identity id
    tex: int  # index into the frame's texture pool
    part: str = ""


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _swing(a: float) -> np.ndarray:
    """Rotation about the lateral (y) axis; positive swings the limb tip forward (+x)."""
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _part_texture_role(part: str, kind: str) -> str:
    if part in ("head", "hand_l", "hand_r"):
        return "skin"
    if part in ("foot_l", "foot_r"):
        return "shoe"
    if part in ("torso",):
        return "upper"
    if part in ("upper_arm_l", "upper_arm_r"):
        return "upper"
    if part in ("lower_arm_l", "lower_arm_r"):
        return "upper" if kind == "jacket" else "skin"
    if part == "pelvis":
        return "upper" if kind == "dress" else "lower"
    if part in ("upper_leg_l", "upper_leg_r"):
        return "upper" if kind == "dress" else "lower"
    if part in ("lower_leg_l", "lower_leg_r"):
        return "lower" if kind in ("trousers", "tshirt", "jacket") else "skin"
    raise KeyError(part)


CLOTHING_PARTS = ("torso", "pelvis", "upper_arm_l", "upper_arm_r", "lower_arm_l",
                  "lower_arm_r", "upper_leg_l", "upper_leg_r", "lower_leg_l", "lower_leg_r")


def is_clothing_part(part: str, kind: str) -> bool:
    return part in CLOTHING_PARTS and _part_texture_role(part, kind) in ("upper", "lower")


def build_pedestrian(
    spec: IdentitySpec,
    position,
    heading: float,
    joint_angles: np.ndarray,
    tex_index,
) -> list:
    """Assemble the prim list for one pedestrian at one pose.

    `tex_index(role)` resolves "upper" / "lower" / "skin" / "shoe" /
    accessory kinds to texture-pool indices.
    """
    h = spec.height
    b = spec.build
    l_sh, r_sh, l_el, r_el, l_hip, r_hip, l_knee, r_knee = (float(a) for a in joint_angles)

    width = 0.26 * h * (0.85 + 0.35 * b)  # shoulder width
    depth = 0.15 * h * (0.80 + 0.50 * b)
    arm_r = 0.032 * h * (0.8 + 0.5 * b)
    leg_r = 0.045 * h * (0.8 + 0.5 * b)
    up_arm, low_arm = 0.17 * h, 0.16 * h
    up_leg, low_leg = 0.24 * h, 0.22 * h
    hip_z, shoulder_z = 0.50 * h, 0.78 * h

    yaw = _rot_z(heading)
    base = np.array([position[0], position[1], 0.0])
    eye = np.eye(3)
    prims = []

    def add(part, center, rot, half):
        role = _part_texture_role(part, spec.clothing_kind)
        prims.append(
            Prim(
                center=base + yaw @ np.asarray(center, dtype=np.float64),
                rotation=yaw @ rot,
                half=np.asarray(half, dtype=np.float64),
                label=spec.id,
                tex=tex_index(role),
                part=part,
            )
        )

    def add_accessory(kind, center, half, rot=None):
        prims.append(
            Prim(
                center=base + yaw @ np.asarray(center, dtype=np.float64),
                rotation=yaw @ (rot if rot is not None else eye),
                half=np.asarray(half, dtype=np.float64),
                label=spec.id,
                tex=tex_index(kind),
                part=kind,
            )
        )

    def limb(part, pivot, length, radius, rot):
        center = np.asarray(pivot) + rot @ np.array([0.0, 0.0, -length / 2.0])
        add(part, center, rot, (radius, radius, length / 2.0))
        return np.asarray(pivot) + rot @ np.array([0.0, 0.0, -length])

    # Torso block spans hip to shoulder; pelvis sits just below.
    add("torso", (0.0, 0.0, (hip_z + shoulder_z) / 2.0 + 0.02 * h), eye,
        (depth / 2.0, width / 2.0, (shoulder_z - hip_z) / 2.0))
    add("pelvis", (0.0, 0.0, hip_z - 0.03 * h), eye,
        (depth / 2.0 * 0.95, width / 2.0 * 0.92, 0.055 * h))
    add("head", (0.01 * h, 0.0, 0.905 * h), eye, (0.055 * h, 0.058 * h, 0.068 * h))

    for side, sh, el, hp, kn in (
        (1.0, l_sh, l_el, l_hip, l_knee),
        (-1.0, r_sh, r_el, r_hip, r_knee),
    ):
        tag = "l" if side > 0 else "r"
        sh_rot = _swing(sh)
        elbow = limb(f"upper_arm_{tag}", (0.0, side * (width / 2.0 + arm_r), shoulder_z), up_arm, arm_r, sh_rot)
        limb(f"lower_arm_{tag}", elbow, low_arm, arm_r * 0.9, sh_rot @ _swing(el))
        hip_rot = _swing(hp)
        knee = limb(f"upper_leg_{tag}", (0.0, side * width / 4.0, hip_z), up_leg, leg_r, hip_rot)
        ankle_rot = hip_rot @ _swing(-kn)
        ankle = limb(f"lower_leg_{tag}", knee, low_leg, leg_r * 0.85, ankle_rot)
        add(f"foot_{tag}", ankle + np.array([0.03 * h, 0.0, 0.015 * h]), eye,
            (0.055 * h, 0.028 * h, 0.018 * h))

    face_x = 0.055 * h
    for kind in sorted(spec.accessories):
        if kind == "hat":
            add_accessory(kind, (0.005 * h, 0.0, 0.985 * h), (0.062 * h, 0.066 * h, 0.016 * h))
        elif kind == "glasses":
            add_accessory(kind, (face_x + 0.012 * h, 0.0, 0.925 * h), (0.008 * h, 0.052 * h, 0.011 * h))
        elif kind == "mask":
            add_accessory(kind, (face_x + 0.010 * h, 0.0, 0.885 * h), (0.010 * h, 0.045 * h, 0.024 * h))
        elif kind == "earphones":
            for side in (1.0, -1.0):
                add_accessory(kind, (0.01 * h, side * 0.068 * h, 0.915 * h),
                              (0.012 * h, 0.010 * h, 0.012 * h))
        elif kind == "scarf":
            add_accessory(kind, (0.0, 0.0, 0.815 * h), (depth / 2.0 + 0.012 * h, width / 2.0 * 0.6, 0.020 * h))
        elif kind == "backpack":
            add_accessory(kind, (-(depth / 2.0 + 0.05 * h), 0.0, 0.665 * h),
                          (0.050 * h, width / 2.0 * 0.8, 0.105 * h))
        elif kind == "bag":
            add_accessory(kind, (0.0, width / 2.0 + 0.035 * h, 0.52 * h),
                          (0.045 * h, 0.020 * h, 0.055 * h))
        elif kind == "handbag":
            add_accessory(kind, (0.02 * h, -(width / 2.0 + arm_r * 2 + 0.01 * h), 0.40 * h),
                          (0.035 * h, 0.024 * h, 0.046 * h))
        elif kind == "umbrella":
            add_accessory(kind, (0.06 * h, width / 2.0 + 0.03 * h, 0.80 * h),
                          (0.008 * h, 0.008 * h, 0.30 * h))
            add_accessory(kind, (0.06 * h, width / 2.0 + 0.03 * h, 1.10 * h),
                          (0.115 * h, 0.115 * h, 0.014 * h))
    return prims


def scene_prims(scene: SceneSpec, tex_index) -> list:
    """Label-0 scenery boxes: ground slab, obstacles, indoor shell."""
    w, d = scene.extent
    prims = [
        Prim(
            center=np.array([w / 2.0, d / 2.0, -0.05]),
            rotation=np.eye(3),
            half=np.array([w / 2.0 + 3.0, d / 2.0 + 3.0, 0.05]),
            label=0,
            tex=tex_index(("ground", scene.scene_id)),
            part="ground",
        )
    ]
    for ob in scene.obstacles:
        prims.append(
            Prim(
                center=np.array([(ob.x0 + ob.x1) / 2.0, (ob.y0 + ob.y1) / 2.0, (ob.z0 + ob.z1) / 2.0]),
                rotation=np.eye(3),
                half=np.array([(ob.x1 - ob.x0) / 2.0, (ob.y1 - ob.y0) / 2.0, (ob.z1 - ob.z0) / 2.0]),
                label=0,
                tex=tex_index(("wall", scene.scene_id)),
                part="obstacle",
            )
        )
    if scene.kind == "indoor":
        ch = scene.ceiling_height
        prims.append(
            Prim(
                center=np.array([w / 2.0, d / 2.0, ch + 0.05]),
                rotation=np.eye(3),
                half=np.array([w / 2.0 + 0.3, d / 2.0 + 0.3, 0.05]),
                label=0,
                tex=tex_index(("wall", scene.scene_id)),
                part="ceiling",
            )
        )
        t = 0.15
        walls = (
            ((w / 2.0, -t / 2.0), (w / 2.0 + t, t / 2.0)),
            ((w / 2.0, d + t / 2.0), (w / 2.0 + t, t / 2.0)),
            ((-t / 2.0, d / 2.0), (t / 2.0, d / 2.0 + t)),
            ((w + t / 2.0, d / 2.0), (t / 2.0, d / 2.0 + t)),
        )
        for (cx, cy), (hx, hy) in walls:
            prims.append(
                Prim(
                    center=np.array([cx, cy, ch / 2.0]),
                    rotation=np.eye(3),
                    half=np.array([hx, hy, ch / 2.0]),
                    label=0,
                    tex=tex_index(("wall", scene.scene_id)),
                    part="wall",
                )
            )
    return prims


def skin_color(spec: IdentitySpec):
    return SKIN_PALETTE[spec.skin_tone]
