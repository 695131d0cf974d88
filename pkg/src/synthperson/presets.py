"""Shipped presets: scenes, the camera network, illumination, and run configs.

The default world is 4 scenes (3 outdoor + 1 indoor) watched by 34 cameras;
camera presets are prefixes of one fixed ordering so camera-count sweeps
nest: cam6 covers scene 1 only, cam16 scenes 1-2, cam22 scenes 1-3, cam28
all four, cam34 adds a second ring.  "+indoor6" appends six extra
high-angle cameras (ids 35-40) in the indoor scene.

Camera placement: each camera sits 0.8 m inside the scene boundary at a
perimeter fraction, at a cycling height/pitch/fov pattern, aimed at an
offset from the scene center.  All values below are the single source of
truth and are echoed into every run's header.json.
"""

from __future__ import annotations

import copy
import math

from .errors import ConfigurationError
from .world import CameraSpec, Obstacle, SceneSpec, day_schedule, night_schedule

SCENES = {
    1: SceneSpec(
        scene_id=1,
        kind="outdoor",
        extent=(30.0, 20.0),
        obstacles=(
            Obstacle(8.0, 4.0, 10.5, 6.5, 0.0, 2.4),
            Obstacle(18.0, 12.0, 21.0, 13.0, 0.0, 0.9),
            Obstacle(25.0, 7.0, 26.0, 8.0, 0.0, 3.0),
        ),
        ground_albedo=(0.35, 0.35, 0.36),
    ),
    2: SceneSpec(
        scene_id=2,
        kind="outdoor",
        extent=(36.0, 36.0),
        obstacles=(
            Obstacle(8.0, 8.0, 11.0, 11.0, 0.0, 1.1),
            Obstacle(24.0, 7.0, 27.0, 10.0, 0.0, 1.1),
            Obstacle(16.0, 16.0, 20.0, 20.0, 0.0, 1.4),
            Obstacle(9.0, 25.0, 12.0, 28.0, 0.0, 1.1),
        ),
        ground_albedo=(0.52, 0.50, 0.47),
    ),
    3: SceneSpec(
        scene_id=3,
        kind="outdoor",
        extent=(28.0, 24.0),
        obstacles=(
            Obstacle(6.0, 5.0, 12.0, 6.5, 0.0, 1.6),
            Obstacle(17.0, 15.0, 23.0, 16.5, 0.0, 1.6),
            Obstacle(12.0, 18.0, 13.5, 19.5, 0.0, 5.0),
        ),
        ground_albedo=(0.30, 0.42, 0.27),
    ),
    4: SceneSpec(
        scene_id=4,
        kind="indoor",
        extent=(24.0, 18.0),
        ceiling_height=4.2,
        obstacles=(
            Obstacle(6.0, 5.0, 7.0, 6.0, 0.0, 4.2),
            Obstacle(6.0, 12.0, 7.0, 13.0, 0.0, 4.2),
            Obstacle(17.0, 5.0, 18.0, 6.0, 0.0, 4.2),
            Obstacle(17.0, 12.0, 18.0, 13.0, 0.0, 4.2),
            Obstacle(11.0, 8.0, 13.0, 10.0, 0.0, 2.2),
        ),
        ground_albedo=(0.48, 0.46, 0.44),
        wall_albedo=(0.62, 0.60, 0.55),
    ),
}

SCENE_PRESETS = {
    "default4": (1, 2, 3, 4),
    "outdoor1": (1,),
    "outdoor2": (1, 2),
    "outdoor3": (1, 2, 3),
}

# (camera_id, scene_id, slot) in the fixed global ordering; slots drive the
# placement cycle below.  Base ring: 6 + 10 + 6 + 6 = 28, second ring 29-34.
CAMERA_LAYOUT = (
    [(i + 1, 1, i) for i in range(6)]
    + [(i + 7, 2, i) for i in range(10)]
    + [(i + 17, 3, i) for i in range(6)]
    + [(i + 23, 4, i) for i in range(6)]
    + [(29, 1, 6), (30, 2, 10), (31, 3, 6), (32, 4, 6), (33, 1, 7), (34, 2, 11)]
)
INDOOR_EXTRA_LAYOUT = [(35 + i, 4, 10 + i) for i in range(6)]

_HEIGHTS = (2.6, 3.4, 4.2, 5.0)
_PITCHES = (-18.0, -26.0, -34.0, -22.0)
_FOVS = (52.0, 60.0, 68.0, 56.0)
_AIM_OFFSETS = ((0.0, 0.0), (0.15, -0.10), (-0.12, 0.12), (0.10, 0.15))

CAMERA_PRESETS = {"cam2": 2, "cam6": 6, "cam8": 8, "cam16": 16, "cam22": 22, "cam28": 28, "cam34": 34}


def _perimeter_point(scene: SceneSpec, frac: float, inset: float = 0.8):
    w, d = scene.extent
    length = 2.0 * (w + d)
    s = (frac % 1.0) * length
    if s < w:
        x, y = s, 0.0
    elif s < w + d:
        x, y = w, s - w
    elif s < 2 * w + d:
        x, y = w - (s - w - d), d
    else:
        x, y = 0.0, d - (s - 2 * w - d)
    x = min(max(x, inset), w - inset)
    y = min(max(y, inset), d - inset)
    return x, y


def _camera_from_slot(camera_id: int, scene: SceneSpec, slot: int, resolution) -> CameraSpec:
    w, d = scene.extent
    indoor_extra = slot >= 10 and scene.kind == "indoor"
    n_base = 12 if indoor_extra else 8
    frac = ((slot + 0.5) / n_base + 0.13 * scene.scene_id) % 1.0
    x, y = _perimeter_point(scene, frac)
    if indoor_extra:
        # High-angle near-ceiling cameras for the indoor corner scenario.
        z = min(3.9, scene.max_camera_z - 0.2)
        pitch = (-42.0, -50.0, -58.0)[slot % 3]
        fov = (62.0, 70.0)[slot % 2]
    else:
        z = min(_HEIGHTS[slot % 4], scene.max_camera_z - 0.2)
        pitch = _PITCHES[slot % 4]
        fov = _FOVS[slot % 4]
    ax, ay = _AIM_OFFSETS[slot % 4]
    aim = (w * (0.5 + ax), d * (0.5 + ay))
    yaw = math.degrees(math.atan2(aim[1] - y, aim[0] - x))
    return CameraSpec(
        camera_id=camera_id,
        scene_id=scene.scene_id,
        position=(x, y, z),
        yaw=yaw,
        pitch=pitch,
        vertical_fov=fov,
        resolution=tuple(resolution),
    )


def build_scenes(preset: str):
    if preset not in SCENE_PRESETS:
        raise ConfigurationError(f"unknown scene preset {preset!r}")
    return [SCENES[sid] for sid in SCENE_PRESETS[preset]]


def build_cameras(preset: str, scene_ids, resolution=(512, 384)):
    """Camera list for a preset name like "cam16" or "cam34+indoor6"."""
    base, _, extra = preset.partition("+")
    if base not in CAMERA_PRESETS:
        raise ConfigurationError(f"unknown camera preset {base!r}")
    if extra not in ("", "indoor6"):
        raise ConfigurationError(f"unknown camera preset suffix {extra!r}")
    count = CAMERA_PRESETS[base]
    layout = list(CAMERA_LAYOUT[:count])
    if extra == "indoor6":
        layout += INDOOR_EXTRA_LAYOUT
    scene_ids = set(scene_ids)
    needed = {sid for _, sid, _ in layout}
    missing = sorted(needed - scene_ids)
    if missing:
        raise ConfigurationError(
            f"camera preset {preset!r} needs scenes {missing} not in the scene preset"
        )
    return [_camera_from_slot(cid, SCENES[sid], slot, resolution) for cid, sid, slot in layout]


def build_illumination(preset: str, duration: float):
    if preset == "day":
        return day_schedule(duration)
    if preset == "night":
        return night_schedule(duration)
    raise ConfigurationError(f"unknown illumination preset {preset!r}")


CONFIG_PRESETS = {
    # Minimal sanity run: 2 ids, 2 cameras, finishes in seconds.
    "smoke": {
        "seed": 7,
        "identities": {"count": 2, "texture_mode": "real", "accessories": True, "hard_fraction": 0.0},
        "world": {"scene_preset": "default4", "camera_preset": "cam2", "resolution": [320, 240]},
        "capture": {"wave_size": 8, "wave_duration": 12.0, "dt": 0.25},
        "emission": {"out_dir": "out/smoke", "per_id_budget": 4},
    },
    # CI-scale full pipeline: 100 ids / 8 cameras / budget 40 -> 4,000 images.
    "desk_full": {
        "seed": 11,
        "identities": {"count": 100, "texture_mode": "real", "accessories": True, "hard_fraction": 0.2},
        "world": {"scene_preset": "default4", "camera_preset": "cam8", "resolution": [320, 240]},
        "capture": {"wave_size": 25, "wave_duration": 25.0, "dt": 0.25},
        "emission": {"out_dir": "out/desk_full", "per_id_budget": 40},
    },
    # The full-scale dataset: 3,000 ids / 34 cameras / budget 40 -> 120,000
    # images.  Takes hours; use desk_full for CI.
    "paper_full": {
        "seed": 2021,
        "identities": {"count": 3000, "texture_mode": "real", "accessories": True, "hard_fraction": 0.5},
        "world": {"scene_preset": "default4", "camera_preset": "cam34", "resolution": [512, 384]},
        "capture": {"wave_size": 24, "wave_duration": 30.0, "dt": 0.25},
        "emission": {"out_dir": "out/paper_full", "per_id_budget": 40},
    },
}

CORNER_PRESETS = ("indoor", "night", "black")


def apply_corner_preset(config: dict, name: str) -> dict:
    """Derive a corner-scenario config; sections are disjoint so presets compose."""
    cfg = copy.deepcopy(config)
    if name == "indoor":
        cam = cfg["world"]["camera_preset"]
        if not cam.endswith("+indoor6"):
            cfg["world"]["camera_preset"] = cam + "+indoor6"
    elif name == "night":
        cfg["illumination"]["preset"] = "night"
    elif name == "black":
        cfg["clothing"]["palette"] = "black"
    else:
        raise ConfigurationError(
            f"unknown corner preset {name!r}; expected one of {CORNER_PRESETS}"
        )
    return cfg
