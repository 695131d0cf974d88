"""End-to-end synthesis: identities -> world -> render -> annotate -> emit.

Capture runs in waves: each scene's roster is chunked into groups of
`capture.wave_size` pedestrians that walk together for
`capture.wave_duration` seconds of simulated time, so crowding stays
bounded no matter how large the cohort is.  Work parallelizes over
(scene, wave, camera) tasks; all randomness keys on stable entity indices,
so outputs are identical for any thread count.
"""

from __future__ import annotations

import logging
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .annotate import FilterPolicy, apply_filter, crop_sample, enlarge_bbox, extract_instances, with_ratio
from .color import mean_luminance
from .config import config_hash
from .dataset import (
    GENERATOR_VERSION,
    CroppedSample,
    DatasetManifest,
    DatasetStats,
    compute_stats,
    emit_dataset,
    load_manifest,
    save_stats,
)
from .errors import SynthPersonError
from .identities import generate_identities
from .presets import build_cameras, build_illumination, build_scenes
from .render import SceneRenderer, portrait_frame
from .rig import is_clothing_part
from .seeding import rng_for
from .textures import TextureCorpus
from .world import World, assign_paths, build_world, illumination_at, initial_state, step

log = logging.getLogger(__name__)

# Above this many expected final images, candidate crops are stashed on disk
# instead of held in RAM during capture.
SPILL_THRESHOLD = 50_000


@dataclass
class SynthRun:
    out_dir: str
    config: dict
    manifest: DatasetManifest
    stats: DatasetStats
    world: World
    identities: list


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SynthPersonError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def build_corpora(cfg: dict):
    clothing_dir = cfg["clothing"]["corpus_dir"]
    random_dir = cfg["clothing"]["random_corpus_dir"]
    clothing = TextureCorpus.from_dir(clothing_dir) if clothing_dir else TextureCorpus.builtin("clothing", 64)
    universal = TextureCorpus.from_dir(random_dir) if random_dir else TextureCorpus.builtin("universal", 48)
    return clothing, universal


def _chunks(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _time_uniform(items, k):
    n = len(items)
    if k >= n:
        return list(items)
    return [items[(i * n) // k] for i in range(k)]


class _CandidateStore:
    """Collects crop candidates; optionally spills pixels to disk losslessly."""

    def __init__(self, spill_dir=None):
        self.spill_dir = spill_dir
        self.samples = []
        if spill_dir:
            os.makedirs(spill_dir, exist_ok=True)

    def add_batch(self, batch):
        if self.spill_dir:
            from PIL import Image

            for s in batch:
                name = f"c{s.camera_id}_t{int(round(s.sim_time * 1000)):08d}_i{s.identity_id}.png"
                path = os.path.join(self.spill_dir, name)
                Image.fromarray(s.rgb).save(path)
                s.spill_path = path
                s.rgb = None
        self.samples.extend(batch)

    def cleanup(self):
        if self.spill_dir and os.path.isdir(self.spill_dir):
            shutil.rmtree(self.spill_dir)


def _capture_task(renderer, schedule, states, cameras, scene_id, cfg, policy, steps_offset):
    """Capture one (scene, wave) across all its cameras.

    Pedestrian geometry is built once per step and shared by every camera
    and by the isolation re-renders.
    """
    ann = cfg["annotation"]
    seed = cfg["seed"]
    out = []
    for k, state in enumerate(states):
        geoms = renderer.build_step_geometry(state, scene_id)
        if not geoms:
            continue
        light = illumination_at(schedule, state.time)
        for camera in cameras:
            sr = renderer.step_render(camera, light, geoms, require_peds=True)
            if sr.empty:
                continue
            frame = sr.frame(sim_time=state.time)
            w, h = camera.resolution
            for obs in extract_instances(frame):
                iso = sr.isolated_count(obs.identity_id)
                if iso == 0:
                    continue
                obs = with_ratio(obs, min(1.0, obs.pixel_count / iso))
                if apply_filter(obs, policy) is not None:
                    continue
                rng = rng_for(seed, "enlarge", camera.camera_id, steps_offset + k, obs.identity_id)
                ebox = enlarge_bbox(obs.bbox, ann["enlarge_factor"], rng, (w, h), ann["enlarge_mode"])
                sample = crop_sample(frame, ebox, obs, scene_id=scene_id)
                if sample is not None:
                    out.append(sample)
    # Bound memory: at most the per-identity budget per (identity, camera).
    budget = cfg["emission"]["per_id_budget"]
    by_key = {}
    for s in out:
        by_key.setdefault((s.identity_id, s.camera_id), []).append(s)
    thinned = []
    for key in sorted(by_key):
        thinned.extend(_time_uniform(by_key[key], budget))
    return thinned


def build_world_from_config(cfg: dict) -> World:
    scenes = build_scenes(cfg["world"]["scene_preset"])
    cameras = build_cameras(
        cfg["world"]["camera_preset"],
        [s.scene_id for s in scenes],
        cfg["world"]["resolution"],
    )
    return build_world(scenes, cameras, cfg["seed"])


def synthesize(cfg: dict, threads: int = 1) -> SynthRun:
    """Run the full pipeline for a resolved config; deterministic in `threads`."""
    seed = cfg["seed"]
    ident_cfg = cfg["identities"]
    clothing, universal = _stage("human_factory", build_corpora, cfg)
    specs = _stage(
        "human_factory",
        generate_identities,
        ident_cfg["count"],
        seed,
        texture_mode=ident_cfg["texture_mode"],
        accessories_enabled=ident_cfg["accessories"],
        hard_fraction=ident_cfg["hard_fraction"],
        corpus=clothing,
        random_corpus=universal,
        palette_preset=cfg["clothing"]["palette"],
    )
    world = _stage("scene_world", build_world_from_config, cfg)
    assignment = _stage("scene_world", assign_paths, specs, world, seed)
    renderer = SceneRenderer(world, specs, dark_clothing=cfg["clothing"]["palette"] == "black")

    cap = cfg["capture"]
    dt = cap["dt"]
    steps = max(1, int(round(cap["wave_duration"] / dt)))
    covered = sorted({c.scene_id for c in world.cameras.values()})
    rosters = {
        sid: sorted(i for i, pls in assignment.items() if any(p.scene_id == sid for p in pls))
        for sid in covered
    }
    n_waves = {sid: (len(ids) + cap["wave_size"] - 1) // cap["wave_size"] for sid, ids in rosters.items()}
    total_duration = max([n * cap["wave_duration"] for n in n_waves.values()], default=1.0)
    schedule = build_illumination(cfg["illumination"]["preset"], max(total_duration, dt))

    policy = FilterPolicy(
        min_height_px=cfg["annotation"]["min_height_px"],
        min_visible_ratio=cfg["annotation"]["min_visible_ratio"],
        reject_edge_touching=cfg["annotation"]["reject_edge_touching"],
    )

    jobs = []
    for sid in covered:
        cams = sorted(world.cameras_in_scene(sid), key=lambda c: c.camera_id)
        for w_idx, wave_ids in enumerate(_chunks(rosters[sid], cap["wave_size"])):
            start_t = w_idx * cap["wave_duration"]
            state = initial_state(world, assignment, {sid: wave_ids}, start_t)
            states = [state]
            for _ in range(steps - 1):
                states.append(step(states[-1], dt))
            jobs.append((states, cams, sid, w_idx * steps))

    out_dir = cfg["emission"]["out_dir"]
    expected = ident_cfg["count"] * cfg["emission"]["per_id_budget"]
    spill_dir = os.path.join(out_dir, ".candidates") if expected > SPILL_THRESHOLD else None
    store = _CandidateStore(spill_dir)

    def run_job(job):
        states, cams, sid, offset = job
        return _capture_task(renderer, schedule, states, cams, sid, cfg, policy, offset)

    try:
        if threads <= 1:
            for job in jobs:
                store.add_batch(run_job(job))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for batch in pool.map(run_job, jobs):
                    store.add_batch(batch)

        samples = sorted(store.samples, key=lambda s: s.sort_key())
        got_ids = {s.identity_id for s in samples}
        for spec in specs:
            if spec.id not in got_ids:
                log.warning("identity %d produced no surviving samples; dropped", spec.id)

        from .dataset import select_per_identity

        selected = _stage(
            "dataset_io", select_per_identity, samples, cfg["emission"]["per_id_budget"], seed
        )
        header = {
            "seed": seed,
            "config_hash": config_hash(cfg),
            "generator_version": GENERATOR_VERSION,
            "config": cfg,
        }
        manifest = _stage(
            "dataset_io",
            emit_dataset,
            selected,
            out_dir,
            header,
            cfg["emission"]["format"],
            cfg["emission"]["jpeg_quality"],
        )
    finally:
        store.cleanup()
    stats = compute_stats(manifest)
    save_stats(stats, out_dir)
    return SynthRun(
        out_dir=out_dir,
        config=cfg,
        manifest=manifest,
        stats=stats,
        world=world,
        identities=specs,
    )


def dataset_mean_luminance(out_dir: str) -> float:
    """Mean Rec.601 luma over every emitted image of a dataset."""
    from PIL import Image

    manifest = load_manifest(out_dir)
    if not manifest.records:
        return 0.0
    total = 0.0
    for rec in manifest.records:
        with Image.open(os.path.join(out_dir, rec["path"])) as im:
            total += mean_luminance(np.asarray(im.convert("RGB")))
    return total / len(manifest.records)


def clothing_value_fraction(cfg: dict, n_identities: int = 40, value_cap: float = 0.25) -> float:
    """Fraction of clothing-mask pixels at or below the HSV value cap.

    Renders clothing-part-only portraits under full daylight, which is the
    brightest the clothing ever appears in the pipeline.
    """
    clothing, universal = build_corpora(cfg)
    specs = generate_identities(
        min(n_identities, cfg["identities"]["count"]),
        cfg["seed"],
        texture_mode=cfg["identities"]["texture_mode"],
        accessories_enabled=False,
        hard_fraction=0.0,
        corpus=clothing,
        random_corpus=universal,
        palette_preset=cfg["clothing"]["palette"],
    )
    dark = cfg["clothing"]["palette"] == "black"
    total = 0
    below = 0
    for spec in specs:
        frame = portrait_frame(
            spec,
            dark_clothing=dark,
            parts=lambda part, _kind=spec.clothing_kind: is_clothing_part(part, _kind),
        )
        mask = frame.instance != 0
        if not mask.any():
            continue
        values = frame.rgb[mask].max(axis=1).astype(np.float64) / 255.0
        total += values.size
        below += int(np.count_nonzero(values <= value_cap))
    return below / total if total else 0.0
