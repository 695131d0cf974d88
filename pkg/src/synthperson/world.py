"""Virtual scenes, camera networks, pedestrian paths, and world stepping.

Scenes are flat rectangles with axis-aligned box obstacles; cameras are
pinhole cameras pinned inside their scene volume.  Pedestrians walk
polyline paths at constant speed with cyclic limb animation.  World
evolution is a pure function of (world, seed, dt sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError
from .seeding import rng_for

OUTDOOR_CAMERA_MAX_Z = 20.0
PED_RADIUS = 0.35  # path clearance around obstacles, meters
ANIMATION_KINDS = ("walk1", "walk2", "walk3", "walk4", "idle1", "idle2")
JOINTS = ("l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_hip", "r_hip", "l_knee", "r_knee")


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned box; z spans [z0, z1]."""

    x0: float
    y0: float
    x1: float
    y1: float
    z0: float = 0.0
    z1: float = 1.0

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0 or self.z1 <= self.z0:
            raise ValidationError(f"degenerate obstacle box {self}")

    def footprint_contains(self, x, y, margin=0.0):
        return (self.x0 - margin <= x <= self.x1 + margin) and (
            self.y0 - margin <= y <= self.y1 + margin
        )


@dataclass(frozen=True)
class SceneSpec:
    scene_id: int
    kind: str  # "outdoor" | "indoor"
    extent: tuple  # (width, depth) meters
    obstacles: tuple = ()
    ground_albedo: tuple = (0.45, 0.44, 0.42)
    wall_albedo: tuple = (0.55, 0.52, 0.48)
    ceiling_height: Optional[float] = None  # required for indoor

    def __post_init__(self):
        if self.kind not in ("outdoor", "indoor"):
            raise ValidationError(f"unknown scene kind {self.kind!r}")
        w, d = self.extent
        if w <= 0 or d <= 0:
            raise ValidationError(f"scene {self.scene_id}: extent must be positive")
        if self.kind == "indoor" and not self.ceiling_height:
            raise ValidationError(f"indoor scene {self.scene_id} needs a ceiling plane")
        for ob in self.obstacles:
            if ob.x0 < 0 or ob.y0 < 0 or ob.x1 > w or ob.y1 > d:
                raise ValidationError(f"scene {self.scene_id}: obstacle {ob} outside extent")

    @property
    def max_camera_z(self):
        return self.ceiling_height if self.kind == "indoor" else OUTDOOR_CAMERA_MAX_Z


@dataclass(frozen=True)
class CameraSpec:
    camera_id: int
    scene_id: int
    position: tuple  # (x, y, z) meters
    yaw: float  # degrees, 0 = +x, CCW
    pitch: float  # degrees in [-89, 0]
    vertical_fov: float  # degrees in (20, 120)
    resolution: tuple = (512, 384)  # (w, h) pixels

    def __post_init__(self):
        if not 20.0 < self.vertical_fov < 120.0:
            raise ValidationError(f"camera {self.camera_id}: fov {self.vertical_fov} outside (20, 120)")
        if not -89.0 <= self.pitch <= 0.0:
            raise ValidationError(f"camera {self.camera_id}: pitch {self.pitch} outside [-89, 0]")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ValidationError(f"camera {self.camera_id}: bad resolution {self.resolution}")


@dataclass(frozen=True)
class PathSpec:
    waypoints: tuple  # ((x, y), ...) >= 2 points
    speed: float  # m/s in [0.6, 1.8]
    loop: bool = True

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValidationError("path needs at least 2 waypoints")
        if not 0.6 <= self.speed <= 1.8:
            raise ValidationError(f"path speed {self.speed} outside [0.6, 1.8]")


@lru_cache(maxsize=8192)
def _path_geometry(path: PathSpec):
    pts = [tuple(p) for p in path.waypoints]
    if path.loop:
        pts.append(pts[0])
    pts = np.asarray(pts, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    return pts, cum, float(cum[-1])


def path_length(path: PathSpec) -> float:
    return _path_geometry(path)[2]


def path_position(path: PathSpec, s: float):
    """Point and heading at arc length s; loops wrap, open paths ping-pong."""
    pts, cum, total = _path_geometry(path)
    if total == 0.0:
        return float(pts[0, 0]), float(pts[0, 1]), 0.0
    if path.loop:
        u = s % total
        forward = True
    else:
        u = s % (2.0 * total)
        forward = u <= total
        if not forward:
            u = 2.0 * total - u
    i = int(np.searchsorted(cum, u, side="right")) - 1
    i = min(max(i, 0), len(cum) - 2)
    seg_len = cum[i + 1] - cum[i]
    f = 0.0 if seg_len == 0 else (u - cum[i]) / seg_len
    x = pts[i, 0] + f * (pts[i + 1, 0] - pts[i, 0])
    y = pts[i, 1] + f * (pts[i + 1, 1] - pts[i, 1])
    dx, dy = pts[i + 1, 0] - pts[i, 0], pts[i + 1, 1] - pts[i, 1]
    if not forward:
        dx, dy = -dx, -dy
    return float(x), float(y), float(math.atan2(dy, dx))


def segment_hits_box(p, q, ob: Obstacle, margin: float = 0.0) -> bool:
    """2D segment vs inflated obstacle footprint (slab clipping)."""
    x0, y0 = ob.x0 - margin, ob.y0 - margin
    x1, y1 = ob.x1 + margin, ob.y1 + margin
    px, py = p
    qx, qy = q
    t0, t1 = 0.0, 1.0
    for lo, hi, a, d in ((x0, x1, px, qx - px), (y0, y1, py, qy - py)):
        if d == 0.0:
            if a < lo or a > hi:
                return False
        else:
            ta, tb = (lo - a) / d, (hi - a) / d
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
            if t0 > t1:
                return False
    return True


@dataclass(frozen=True)
class IlluminationSchedule:
    """Keyed sky curve: time -> (intensity in [0,1], RGB tint <= 1)."""

    keys: tuple  # ((t, intensity, (r, g, b)), ...) sorted by t
    direction: tuple = (0.35, 0.2, -0.92)  # direction light travels (unit-ish, z down)
    name: str = "custom"

    def __post_init__(self):
        if len(self.keys) < 1:
            raise ValidationError("illumination schedule needs at least one key")
        ts = [k[0] for k in self.keys]
        if ts != sorted(ts):
            raise ValidationError("illumination keys must be sorted by time")
        for _, inten, tint in self.keys:
            if not 0.0 <= inten <= 1.0:
                raise ValidationError(f"sky intensity {inten} outside [0, 1]")
            if any(not 0.0 <= c <= 1.0 for c in tint):
                raise ValidationError("tint channels must lie in [0, 1]")

    @property
    def window(self):
        return self.keys[0][0], self.keys[-1][0]

    def mean_intensity(self) -> float:
        ts = np.asarray([k[0] for k in self.keys])
        vs = np.asarray([k[1] for k in self.keys])
        if len(ts) == 1 or ts[-1] == ts[0]:
            return float(vs[0])
        return float(np.trapezoid(vs, ts) / (ts[-1] - ts[0]))


@dataclass(frozen=True)
class LightParams:
    intensity: float
    tint: tuple
    direction: tuple


def illumination_at(schedule: IlluminationSchedule, t: float) -> LightParams:
    lo, hi = schedule.window
    if t < lo or t > hi:
        raise ValidationError(f"time {t} outside illumination window [{lo}, {hi}]")
    ts = np.asarray([k[0] for k in schedule.keys])
    intensity = float(np.interp(t, ts, [k[1] for k in schedule.keys]))
    tint = tuple(float(np.interp(t, ts, [k[2][c] for k in schedule.keys])) for c in range(3))
    return LightParams(intensity=intensity, tint=tint, direction=schedule.direction)


def day_schedule(duration: float) -> IlluminationSchedule:
    neutral = (1.0, 1.0, 1.0)
    keys = ((0.0, 0.7, neutral), (duration / 2.0, 1.0, neutral), (duration, 0.8, neutral))
    return IlluminationSchedule(keys=keys, name="day")


def night_schedule(duration: float) -> IlluminationSchedule:
    # Blue-shifted and dim; mean intensity stays well under 0.25.
    tint = (0.55, 0.65, 1.0)
    keys = ((0.0, 0.16, tint), (duration / 2.0, 0.11, tint), (duration, 0.16, tint))
    return IlluminationSchedule(keys=keys, name="night")


_ANIM_PARAMS = {
    # kind: (arm swing, leg swing, knee flex, period seconds)
    "walk1": (0.45, 0.55, 0.85, 1.00),
    "walk2": (0.35, 0.45, 0.65, 1.15),
    "walk3": (0.55, 0.65, 1.00, 0.90),
    "walk4": (0.30, 0.50, 0.75, 1.25),
    "idle1": (0.05, 0.03, 0.06, 2.40),
    "idle2": (0.07, 0.02, 0.09, 3.00),
}
_ANIM_SAMPLES = 16


@dataclass(frozen=True)
class AnimationCycle:
    kind: str
    period: float  # seconds per cycle
    table: tuple  # (_ANIM_SAMPLES, len(JOINTS)) angles in radians

    def pose(self, phase: float) -> np.ndarray:
        """Joint angles at cyclic phase; pose(0) == pose(1) exactly."""
        table = np.asarray(self.table)
        n = table.shape[0]
        x = (phase % 1.0) * n
        i0 = int(math.floor(x)) % n
        f = x - math.floor(x)
        i1 = (i0 + 1) % n
        return (1.0 - f) * table[i0] + f * table[i1]


@lru_cache(maxsize=None)
def animation_cycle(kind: str) -> AnimationCycle:
    if kind not in _ANIM_PARAMS:
        raise ValidationError(f"unknown animation kind {kind!r}")
    arm, leg, knee, period = _ANIM_PARAMS[kind]
    rows = []
    for i in range(_ANIM_SAMPLES):
        p = i / _ANIM_SAMPLES
        s = math.sin(2.0 * math.pi * p)
        l_sh, r_sh = arm * s, -arm * s
        l_el = 0.20 + 0.4 * arm * max(0.0, s)
        r_el = 0.20 + 0.4 * arm * max(0.0, -s)
        l_hip, r_hip = -leg * s, leg * s
        l_knee = knee * max(0.0, math.sin(2.0 * math.pi * p + 0.9))
        r_knee = knee * max(0.0, math.sin(2.0 * math.pi * (p + 0.5) + 0.9))
        rows.append((l_sh, r_sh, l_el, r_el, l_hip, r_hip, l_knee, r_knee))
    return AnimationCycle(kind=kind, period=period, table=tuple(rows))


@dataclass(frozen=True)
class World:
    scenes: dict  # scene_id -> SceneSpec
    cameras: dict  # camera_id -> CameraSpec
    seed: int

    def cameras_in_scene(self, scene_id):
        return [c for c in self.cameras.values() if c.scene_id == scene_id]


def build_world(scenes, cameras, seed: int) -> World:
    """Validate geometry and cross-references; lists every offender at once."""
    problems = []
    scene_map = {}
    for s in scenes:
        if s.scene_id in scene_map:
            problems.append(f"duplicate scene_id {s.scene_id}")
        scene_map[s.scene_id] = s
    cam_map = {}
    for c in cameras:
        if c.camera_id in cam_map:
            problems.append(f"duplicate camera_id {c.camera_id}")
        cam_map[c.camera_id] = c
        scene = scene_map.get(c.scene_id)
        if scene is None:
            problems.append(f"camera {c.camera_id}: unknown scene_id {c.scene_id}")
            continue
        x, y, z = c.position
        w, d = scene.extent
        if not (0.0 <= x <= w and 0.0 <= y <= d and 0.0 < z <= scene.max_camera_z):
            problems.append(f"camera {c.camera_id}: position {c.position} outside scene volume")
    if problems:
        raise ValidationError("invalid world: " + "; ".join(problems))
    return World(scenes=scene_map, cameras=cam_map, seed=seed)


@dataclass(frozen=True)
class Placement:
    scene_id: int
    path: PathSpec
    animation: str  # kind name
    start_phase: float


def generate_path(scene: SceneSpec, rng: np.random.Generator, n_attempts: int = 60) -> PathSpec:
    """Random obstacle-avoiding polyline inside the scene extent."""
    w, d = scene.extent
    margin = 0.6

    def free(x, y):
        return not any(ob.footprint_contains(x, y, PED_RADIUS) for ob in scene.obstacles)

    def clear(p, q):
        return not any(segment_hits_box(p, q, ob, PED_RADIUS) for ob in scene.obstacles)

    for _ in range(n_attempts):
        k = int(rng.integers(3, 6))
        pts = []
        for _ in range(200):
            x = float(rng.uniform(margin, w - margin))
            y = float(rng.uniform(margin, d - margin))
            if not free(x, y):
                continue
            if pts and not clear(pts[-1], (x, y)):
                continue
            if pts and math.hypot(x - pts[-1][0], y - pts[-1][1]) < 1.0:
                continue
            pts.append((x, y))
            if len(pts) == k:
                break
        if len(pts) < 2:
            continue
        loop = bool(rng.uniform() < 0.7)
        if loop and not clear(pts[-1], pts[0]):
            loop = False
        return PathSpec(
            waypoints=tuple(pts), speed=float(rng.uniform(0.6, 1.8)), loop=loop
        )
    raise ConfigurationError(f"scene {scene.scene_id}: no feasible path found")


def assign_paths(identities, world: World, seed: int):
    """Map each identity to walk episodes in >= 2 scenes (when available).

    Scenes observed by at least one camera are preferred so every identity
    is capturable; camera-less scenes only fill in when needed to reach the
    two-scene minimum.
    """
    scene_ids = sorted(world.scenes)
    if not scene_ids:
        raise ConfigurationError("world has no scenes to assign paths in")
    covered = sorted({c.scene_id for c in world.cameras.values()})
    uncovered = [s for s in scene_ids if s not in covered]
    assignment = {}
    for spec in identities:
        ident = spec.id if hasattr(spec, "id") else int(spec)
        rng = rng_for(seed, "assign", ident)
        pool = covered if covered else scene_ids
        n = min(2, len(pool))
        if len(pool) >= 3 and rng.uniform() < 0.3:
            n = 3
        chosen = sorted(rng.choice(len(pool), size=n, replace=False).tolist())
        chosen = [scene_ids.index(pool[k]) for k in chosen]
        if len(chosen) < 2 and uncovered and len(scene_ids) >= 2:
            extra = uncovered[int(rng.integers(0, len(uncovered)))]
            chosen = sorted(set(chosen) | {scene_ids.index(extra)})
        placements = []
        for k in chosen:
            sid = scene_ids[k]
            path = generate_path(world.scenes[sid], rng_for(seed, "path", ident, sid))
            kind = ANIMATION_KINDS[int(rng.integers(0, 4))]  # walking kinds only
            placements.append(
                Placement(
                    scene_id=sid,
                    path=path,
                    animation=kind,
                    start_phase=float(rng.uniform(0.0, 1.0)),
                )
            )
        assignment[ident] = tuple(placements)
    return assignment


@dataclass(frozen=True)
class SceneRoster:
    ids: tuple  # identity ids active in this scene
    placements: tuple  # Placement per id
    arc: np.ndarray  # arc-length position per id
    phase: np.ndarray  # animation phase per id
    speeds: np.ndarray = field(default=None)
    periods: np.ndarray = field(default=None)


@dataclass(frozen=True)
class WorldState:
    time: float
    rosters: dict  # scene_id -> SceneRoster


def initial_state(world: World, assignment, active_by_scene, start_time: float = 0.0) -> WorldState:
    """Spawn the given identities on their assigned paths.

    Spawn arc positions are keyed by (identity, scene) so state is
    independent of roster composition and iteration order.
    """
    rosters = {}
    for sid, ids in active_by_scene.items():
        ids = tuple(sorted(ids))
        placements = []
        arcs = np.zeros(len(ids))
        phases = np.zeros(len(ids))
        speeds = np.zeros(len(ids))
        periods = np.zeros(len(ids))
        for i, ident in enumerate(ids):
            pl = next(p for p in assignment[ident] if p.scene_id == sid)
            placements.append(pl)
            total = path_length(pl.path)
            arcs[i] = rng_for(world.seed, "spawn-arc", ident, sid).uniform(0.0, max(total, 1e-9))
            phases[i] = pl.start_phase
            speeds[i] = pl.path.speed
            periods[i] = animation_cycle(pl.animation).period
        rosters[sid] = SceneRoster(
            ids=ids,
            placements=tuple(placements),
            arc=arcs,
            phase=phases,
            speeds=speeds,
            periods=periods,
        )
    return WorldState(time=start_time, rosters=rosters)


def step(state: WorldState, dt: float) -> WorldState:
    """Advance every pedestrian by speed*dt along its path; pure transition."""
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    rosters = {}
    for sid, r in state.rosters.items():
        rosters[sid] = SceneRoster(
            ids=r.ids,
            placements=r.placements,
            arc=r.arc + r.speeds * dt,
            phase=(r.phase + dt / r.periods) % 1.0,
            speeds=r.speeds,
            periods=r.periods,
        )
    return WorldState(time=state.time + dt, rosters=rosters)


def pedestrian_pose(roster: SceneRoster, i: int):
    """Position, heading, and joint angles of roster member i."""
    pl = roster.placements[i]
    x, y, heading = path_position(pl.path, float(roster.arc[i]))
    angles = animation_cycle(pl.animation).pose(float(roster.phase[i]))
    return (x, y), heading, angles
