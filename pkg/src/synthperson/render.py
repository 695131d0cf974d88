"""Software rasterizer: RGB frame + pixel-aligned instance buffer.

Pinhole projection, shared z-buffer, flat Lambert shading with one
directional skylight and constant ambient.  No anti-aliasing: the instance
buffer must label exactly the nearest surface at every pixel center, with
depth ties resolved by draw order (scenery first, then ascending identity
id).  Windowed rendering reuses global pixel coordinates, so a window is a
bit-exact sub-rectangle of the corresponding full frame.

Pedestrian triangle geometry is camera-independent; `StepRender` shares one
step's geometry across every camera of the scene and across the isolation
re-renders used for occlusion ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import raster_triangles
from .errors import ValidationError
from .identities import SKIN_PALETTE, IdentitySpec
from .rig import ACCESSORY_COLORS, SHOE_COLOR, build_pedestrian, scene_prims
from .textures import realize_tile
from .world import (
    CameraSpec,
    LightParams,
    World,
    WorldState,
    animation_cycle,
    pedestrian_pose,
)

NEAR = 0.05
AMBIENT = 0.15
SKY_COLOR = (0.68, 0.78, 0.92)
TILE = 32


def _unit_box_faces():
    corners = np.array(
        [[(-1, 1)[i & 1], (-1, 1)[(i >> 1) & 1], (-1, 1)[(i >> 2) & 1]] for i in range(8)],
        dtype=np.float64,
    )
    tri_idx = []
    tri_uv = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        qa = 2 if 2 in others else 1
        pa = [a for a in others if a != qa][0]
        for sign in (1.0, -1.0):
            idxs = [i for i in range(8) if corners[i, axis] == sign]
            idxs.sort(key=lambda i: math.atan2(corners[i, qa], corners[i, pa]))
            v0, v1, v2 = corners[idxs[0]], corners[idxs[1]], corners[idxs[2]]
            normal = np.cross(v1 - v0, v2 - v0)
            if normal[axis] * sign < 0:
                idxs.reverse()
            uv = {i: ((corners[i, pa] + 1) / 2.0, (1 - corners[i, qa]) / 2.0) for i in idxs}
            for a, b, c in ((0, 1, 2), (0, 2, 3)):
                tri_idx.append((idxs[a], idxs[b], idxs[c]))
                tri_uv.append((uv[idxs[a]], uv[idxs[b]], uv[idxs[c]]))
    return corners, np.array(tri_idx, dtype=np.int64), np.array(tri_uv, dtype=np.float64)


_CORNERS, _TRI_IDX, _TRI_UV = _unit_box_faces()


class TexturePool:
    """Uniformly sized tile stack shared by one render context."""

    def __init__(self, tile_px: int = TILE):
        self.tile_px = tile_px
        self._tiles = []
        self._color_keys = {}
        self._array = None

    def add_tile(self, tile: np.ndarray) -> int:
        t = np.clip(np.asarray(tile, dtype=np.float32), 0.0, 1.0)
        if t.shape != (self.tile_px, self.tile_px, 3):
            rows = (np.arange(self.tile_px) * t.shape[0]) // self.tile_px
            cols = (np.arange(self.tile_px) * t.shape[1]) // self.tile_px
            t = t[rows][:, cols]
        self._tiles.append(t)
        self._array = None
        return len(self._tiles) - 1

    def add_color(self, rgb) -> int:
        key = tuple(round(float(c), 6) for c in rgb)
        if key not in self._color_keys:
            tile = np.full((self.tile_px, self.tile_px, 3), key, dtype=np.float32)
            self._color_keys[key] = self.add_tile(tile)
        return self._color_keys[key]

    def array(self) -> np.ndarray:
        if self._array is None:
            if not self._tiles:
                self._tiles.append(np.full((self.tile_px, self.tile_px, 3), 0.5, dtype=np.float32))
            self._array = np.stack(self._tiles).astype(np.float32)
        return self._array


@dataclass
class Frame:
    camera_id: int
    sim_time: float
    rgb: np.ndarray  # (h, w, 3) uint8
    instance: np.ndarray  # (h, w) uint32, 0 = background
    depth: Optional[np.ndarray] = None  # (h, w) float64, transient


def camera_basis(cam: CameraSpec):
    yaw = math.radians(cam.yaw)
    pitch = math.radians(cam.pitch)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    forward = np.array([cp * cy, cp * sy, sp])
    right = np.array([sy, -cy, 0.0])
    up = np.cross(right, forward)
    return right, up, forward


def focal_length(cam: CameraSpec) -> float:
    return (cam.resolution[1] / 2.0) / math.tan(math.radians(cam.vertical_fov) / 2.0)


def view_transform(points: np.ndarray, cam: CameraSpec) -> np.ndarray:
    right, up, forward = camera_basis(cam)
    d = np.asarray(points, dtype=np.float64) - np.asarray(cam.position, dtype=np.float64)
    return np.stack([d @ right, d @ up, d @ forward], axis=-1)


@dataclass
class TriSoup:
    """World-space triangle arrays for a prim list, order-preserving."""

    verts: np.ndarray  # (T, 3, 3)
    uvs: np.ndarray  # (T, 3, 2)
    labels: np.ndarray  # (T,) uint32
    texids: np.ndarray  # (T,) int64
    normals: np.ndarray  # (T, 3) unit

    @property
    def n(self):
        return self.verts.shape[0]


_EMPTY_SOUP = None


def triangulate(prims) -> TriSoup:
    global _EMPTY_SOUP
    if not prims:
        if _EMPTY_SOUP is None:
            _EMPTY_SOUP = TriSoup(
                np.zeros((0, 3, 3)), np.zeros((0, 3, 2)),
                np.zeros(0, dtype=np.uint32), np.zeros(0, dtype=np.int64), np.zeros((0, 3)),
            )
        return _EMPTY_SOUP
    n = len(prims)
    centers = np.stack([p.center for p in prims])
    rots = np.stack([p.rotation for p in prims])
    halves = np.stack([p.half for p in prims])
    local = _CORNERS[None, :, :] * halves[:, None, :]  # (P, 8, 3)
    world = centers[:, None, :] + np.einsum("pij,pkj->pki", rots, local)
    verts = world[:, _TRI_IDX, :].reshape(n * 12, 3, 3)
    uvs = np.broadcast_to(_TRI_UV[None], (n, 12, 3, 2)).reshape(n * 12, 3, 2)
    labels = np.repeat(np.array([p.label for p in prims], dtype=np.uint32), 12)
    texids = np.repeat(np.array([p.tex for p in prims], dtype=np.int64), 12)
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    nrm = np.cross(e1, e2)
    length = np.linalg.norm(nrm, axis=1, keepdims=True)
    length[length == 0] = 1.0
    return TriSoup(verts, np.ascontiguousarray(uvs), labels, texids, nrm / length)


def concat_soups(soups) -> TriSoup:
    soups = [s for s in soups if s.n]
    if not soups:
        return triangulate([])
    if len(soups) == 1:
        return soups[0]
    return TriSoup(
        np.concatenate([s.verts for s in soups]),
        np.concatenate([s.uvs for s in soups]),
        np.concatenate([s.labels for s in soups]),
        np.concatenate([s.texids for s in soups]),
        np.concatenate([s.normals for s in soups]),
    )


def shade_colors(normals: np.ndarray, light: LightParams) -> np.ndarray:
    ldir = np.asarray(light.direction, dtype=np.float64)
    ldir = ldir / np.linalg.norm(ldir)
    lambert = np.maximum(0.0, normals @ (-ldir))
    factor = light.intensity * (AMBIENT + (1.0 - AMBIENT) * lambert)
    return factor[:, None] * np.asarray(light.tint, dtype=np.float64)[None, :]


def background_color(light: LightParams) -> np.ndarray:
    return np.asarray(SKY_COLOR) * light.intensity * np.asarray(light.tint)


def _run_kernel(soup: TriSoup, shades, camera: CameraSpec, light: LightParams,
                textures: np.ndarray, window):
    x0, y0, ww, wh = window
    rgbf = np.empty((wh, ww, 3), dtype=np.float32)
    rgbf[:] = background_color(light).astype(np.float32)
    inst = np.zeros((wh, ww), dtype=np.uint32)
    depth = np.full((wh, ww), np.inf, dtype=np.float64)
    if soup.n:
        view = view_transform(soup.verts.reshape(-1, 3), camera).reshape(-1, 3, 3)
        keep = (view[:, :, 2] >= NEAR).any(axis=1)
        if keep.any():
            full_w, full_h = camera.resolution
            raster_triangles(
                np.ascontiguousarray(view[keep]),
                np.ascontiguousarray(soup.uvs[keep]),
                np.ascontiguousarray(soup.labels[keep]),
                np.ascontiguousarray(soup.texids[keep]),
                np.ascontiguousarray(shades[keep]),
                textures,
                focal_length(camera),
                full_w / 2.0,
                full_h / 2.0,
                NEAR,
                x0,
                y0,
                rgbf,
                inst,
                depth,
            )
    rgb = np.floor(np.clip(rgbf, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return rgb, inst, depth


def render_prims(prims, camera: CameraSpec, light: LightParams, pool: TexturePool, window=None):
    """Rasterize a prim list; returns (rgb u8, instance u32, depth f64).

    `window` is (x0, y0, w, h) in full-frame pixel coordinates; the default
    is the whole camera resolution.
    """
    if window is None:
        window = (0, 0, camera.resolution[0], camera.resolution[1])
    soup = triangulate(prims)
    shades = shade_colors(soup.normals, light)
    return _run_kernel(soup, shades, camera, light, pool.array(), window)


@dataclass
class PedGeometry:
    """One pedestrian's camera-independent geometry at one step."""

    identity_id: int
    soup: TriSoup
    aabb_corners: np.ndarray  # (8, 3) world box around all prims


def _aabb_corners(soup: TriSoup) -> np.ndarray:
    flat = soup.verts.reshape(-1, 3)
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    return np.array(
        [[(lo, hi)[i & 1][0], (lo, hi)[(i >> 1) & 1][1], (lo, hi)[(i >> 2) & 1][2]]
         for i in range(8)]
    )


class StepRender:
    """Shared-geometry renderer for one (scene state, camera, light) frame."""

    def __init__(self, camera: CameraSpec, light: LightParams, textures: np.ndarray,
                 static_soup: TriSoup, geoms, require_peds: bool = False):
        self.camera = camera
        self.light = light
        self.textures = textures
        self.visible = [g for g in geoms if self._aabb_visible(g.aabb_corners)]
        self.empty = require_peds and not self.visible
        self._soup = None if self.empty else concat_soups([static_soup] + [g.soup for g in self.visible])
        self._frame_cache = None

    def _aabb_visible(self, corners) -> bool:
        cam = self.camera
        view = view_transform(corners, cam)
        if np.all(view[:, 2] < NEAR):
            return False
        if np.any(view[:, 2] < NEAR):
            return True  # straddles the near plane: keep conservatively
        w, h = cam.resolution
        fl = focal_length(cam)
        us = w / 2.0 + fl * view[:, 0] / view[:, 2]
        vs = h / 2.0 - fl * view[:, 1] / view[:, 2]
        return not (us.max() < 0 or us.min() > w or vs.max() < 0 or vs.min() > h)

    def buffers(self):
        if self._frame_cache is None:
            shades = shade_colors(self._soup.normals, self.light)
            w, h = self.camera.resolution
            self._frame_cache = _run_kernel(
                self._soup, shades, self.camera, self.light, self.textures, (0, 0, w, h)
            )
        return self._frame_cache

    def frame(self, camera_id=None, sim_time=0.0) -> Frame:
        rgb, inst, depth = self.buffers()
        return Frame(camera_id if camera_id is not None else self.camera.camera_id,
                     sim_time, rgb, inst, depth)

    def _geom_for(self, identity_id: int) -> Optional[PedGeometry]:
        for g in self.visible:
            if g.identity_id == identity_id:
                return g
        return None

    def isolated_window(self, geom: PedGeometry):
        """Screen bbox covering every pixel the geometry can rasterize."""
        cam = self.camera
        w, h = cam.resolution
        view = view_transform(geom.soup.verts.reshape(-1, 3), cam)
        if np.any(view[:, 2] < NEAR):
            return 0, 0, w, h
        fl = focal_length(cam)
        us = w / 2.0 + fl * view[:, 0] / view[:, 2]
        vs = h / 2.0 - fl * view[:, 1] / view[:, 2]
        x0 = max(0, int(math.floor(us.min())) - 1)
        x1 = min(w - 1, int(math.ceil(us.max())) + 1)
        y0 = max(0, int(math.floor(vs.min())) - 1)
        y1 = min(h - 1, int(math.ceil(vs.max())) + 1)
        if x1 < x0 or y1 < y0:
            return None
        return x0, y0, x1 - x0 + 1, y1 - y0 + 1

    def isolated_count(self, identity_id: int) -> int:
        geom = self._geom_for(identity_id)
        if geom is None:
            return 0
        window = self.isolated_window(geom)
        if window is None:
            return 0
        shades = shade_colors(geom.soup.normals, self.light)
        _, inst, _ = _run_kernel(geom.soup, shades, self.camera, self.light, self.textures, window)
        return int(np.count_nonzero(inst))


class SceneRenderer:
    """Binds a world and an identity cohort to render-ready assets."""

    def __init__(self, world: World, identities, dark_clothing: bool = False, tile_px: int = TILE):
        self.world = world
        self.specs = {s.id: s for s in identities}
        self.pool = TexturePool(tile_px)
        self._skin_idx = {i: self.pool.add_color(c) for i, c in enumerate(SKIN_PALETTE)}
        self._shoe_idx = self.pool.add_color(SHOE_COLOR)
        self._acc_idx = {k: self.pool.add_color(c) for k, c in ACCESSORY_COLORS.items()}
        self._identity_tex = {}
        for spec in identities:
            upper = self.pool.add_tile(
                realize_tile(spec.upper_texture, tile_px, tile_px, spec.hue_shift, dark_clothing)
            )
            lower = self.pool.add_tile(
                realize_tile(spec.lower_texture, tile_px, tile_px, spec.hue_shift, dark_clothing)
            )
            self._identity_tex[spec.id] = (upper, lower)

        self._static_prims = {}
        self._static_soup = {}
        for sid, scene in world.scenes.items():
            ground = self.pool.add_color(scene.ground_albedo)
            wall = self.pool.add_color(scene.wall_albedo)

            def tex_index(key, _g=ground, _w=wall):
                return _g if key[0] == "ground" else _w

            prims = scene_prims(scene, tex_index)
            self._static_prims[sid] = prims
            self._static_soup[sid] = triangulate(prims)
        self.pool.array()  # freeze

    def _tex_resolver(self, spec: IdentitySpec):
        upper, lower = self._identity_tex[spec.id]
        skin = self._skin_idx[spec.skin_tone]

        def resolve(role):
            if role == "upper":
                return upper
            if role == "lower":
                return lower
            if role == "skin":
                return skin
            if role == "shoe":
                return self._shoe_idx
            return self._acc_idx[role]

        return resolve

    def _camera(self, camera) -> CameraSpec:
        if isinstance(camera, CameraSpec):
            if camera.camera_id not in self.world.cameras:
                raise ValidationError(f"camera {camera.camera_id} not part of this world")
            return camera
        if camera not in self.world.cameras:
            raise ValidationError(f"unknown camera id {camera}")
        return self.world.cameras[camera]

    def pedestrian_prims(self, state: WorldState, scene_id: int, only_id=None, parts=None):
        """Prim list for the scene roster at this state, ascending identity id."""
        roster = state.rosters.get(scene_id)
        prims = []
        if roster is None:
            return prims
        for i, ident in enumerate(roster.ids):
            if only_id is not None and ident != only_id:
                continue
            spec = self.specs[ident]
            pos, heading, angles = pedestrian_pose(roster, i)
            ped = build_pedestrian(spec, pos, heading, angles, self._tex_resolver(spec))
            if parts is not None:
                ped = [p for p in ped if parts(p.part, spec)]
            prims.extend(ped)
        return prims

    def build_step_geometry(self, state: WorldState, scene_id: int):
        """Camera-independent per-pedestrian geometry, ascending identity id."""
        roster = state.rosters.get(scene_id)
        geoms = []
        if roster is None:
            return geoms
        for i, ident in enumerate(roster.ids):
            spec = self.specs[ident]
            pos, heading, angles = pedestrian_pose(roster, i)
            soup = triangulate(build_pedestrian(spec, pos, heading, angles, self._tex_resolver(spec)))
            geoms.append(PedGeometry(ident, soup, _aabb_corners(soup)))
        return geoms

    def step_render(self, camera, light: LightParams, geoms, require_peds: bool = False) -> StepRender:
        cam = self._camera(camera)
        return StepRender(cam, light, self.pool.array(), self._static_soup[cam.scene_id],
                          geoms, require_peds=require_peds)

    def render(self, state: WorldState, camera, light: LightParams, with_depth: bool = True) -> Frame:
        cam = self._camera(camera)
        if cam.resolution[0] < 16 or cam.resolution[1] < 16:
            raise ValidationError(f"camera {cam.camera_id}: resolution below 16x16")
        geoms = self.build_step_geometry(state, cam.scene_id)
        sr = self.step_render(cam, light, geoms)
        frame = sr.frame(sim_time=state.time)
        if not with_depth:
            frame.depth = None
        return frame

    def render_for_annotation(self, state: WorldState, camera, light: LightParams):
        """Like render(), but returns None when no pedestrian can be visible."""
        cam = self._camera(camera)
        geoms = self.build_step_geometry(state, cam.scene_id)
        sr = self.step_render(cam, light, geoms, require_peds=True)
        if sr.empty:
            return None
        return sr.frame(sim_time=state.time)

    def render_isolated(self, state: WorldState, camera, identity_id: int,
                        light: Optional[LightParams] = None) -> Frame:
        cam = self._camera(camera)
        roster = state.rosters.get(cam.scene_id)
        if roster is None or identity_id not in roster.ids:
            raise ValidationError(f"identity {identity_id} not present in scene {cam.scene_id}")
        light = light or LightParams(1.0, (1.0, 1.0, 1.0), (0.35, 0.2, -0.92))
        prims = self.pedestrian_prims(state, cam.scene_id, only_id=identity_id)
        rgb, inst, depth = render_prims(prims, cam, light, self.pool)
        return Frame(cam.camera_id, state.time, rgb, inst, depth)

    def isolated_pixel_count(self, state: WorldState, camera, identity_id: int) -> int:
        """Pixel count of the identity rendered alone (windowed fast path)."""
        cam = self._camera(camera)
        roster = state.rosters.get(cam.scene_id)
        if roster is None or identity_id not in roster.ids:
            return 0
        light = LightParams(1.0, (1.0, 1.0, 1.0), (0.35, 0.2, -0.92))
        geoms = [g for g in self.build_step_geometry(state, cam.scene_id)
                 if g.identity_id == identity_id]
        sr = self.step_render(cam, light, geoms, require_peds=True)
        return sr.isolated_count(identity_id)


def save_frame_debug(frame: Frame, base_path: str) -> None:
    """Dump rgb as PNG and the instance buffer as a 16-bit PGM label map."""
    from PIL import Image

    Image.fromarray(frame.rgb).save(base_path + "_rgb.png")
    labels = frame.instance
    if labels.max(initial=0) > 65535:
        raise ValidationError("instance labels exceed 16-bit PGM range")
    h, w = labels.shape
    with open(base_path + "_instance.pgm", "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(labels.astype(">u2").tobytes())


def portrait_frame(
    spec: IdentitySpec,
    resolution=(96, 192),
    dark_clothing: bool = False,
    parts=None,
) -> Frame:
    """Standardized single-identity render on neutral background.

    Used for appearance-level analysis (e.g. hard-group confusability or
    clothing-pixel statistics) without simulating a full scene.  `parts`
    optionally filters rig parts by name.
    """
    pool = TexturePool()
    upper = pool.add_tile(realize_tile(spec.upper_texture, TILE, TILE, spec.hue_shift, dark_clothing))
    lower = pool.add_tile(realize_tile(spec.lower_texture, TILE, TILE, spec.hue_shift, dark_clothing))
    skin = pool.add_color(SKIN_PALETTE[spec.skin_tone])
    shoe = pool.add_color(SHOE_COLOR)
    acc = {k: pool.add_color(c) for k, c in ACCESSORY_COLORS.items()}

    def resolve(role):
        return {"upper": upper, "lower": lower, "skin": skin, "shoe": shoe}.get(role) or acc[role]

    angles = animation_cycle("walk1").pose(0.2)
    prims = build_pedestrian(spec, (0.0, 0.0), math.pi / 2.0, angles, resolve)
    if parts is not None:
        prims = [p for p in prims if parts(p.part)]
    cam = CameraSpec(
        camera_id=0,
        scene_id=0,
        position=(2.8, 0.0, spec.height * 0.52),
        yaw=180.0,
        pitch=0.0,
        vertical_fov=50.0,
        resolution=resolution,
    )
    light = LightParams(1.0, (1.0, 1.0, 1.0), (0.35, 0.2, -0.92))
    rgb, inst, depth = render_prims(prims, cam, light, pool)
    return Frame(0, 0.0, rgb, inst, depth)
