"""Dataset emission: per-identity budgets, Market-style naming, manifest, stats.

Layout under the output directory:

    images/*.png       one crop per file, `{id:04d}_c{cam}s{scene}_{seq:06d}.png`
    manifest.jsonl     one record per image, ordered by (identity, camera, seq)
    header.json        seed, config hash, generator version, resolved config
    stats.json         counts per identity / camera / scene

A `.incomplete` marker exists while emission is in flight so interrupted
runs are detectable.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IntegrityError, ValidationError

log = logging.getLogger(__name__)

GENERATOR_VERSION = "0.1.0"
MARKER = ".incomplete"
_NAME_RE = re.compile(r"^(\d{4,})_c(\d+)s(\d+)_(\d{6,})\.(png|jpg)$")


@dataclass
class CroppedSample:
    rgb: Optional[np.ndarray]  # (h, w, 3) uint8; None when spilled to disk
    identity_id: int
    camera_id: int
    scene_id: int
    sim_time: float
    bbox: tuple  # source bbox in frame coordinates
    file_name: Optional[str] = None  # assigned at emission
    spill_path: Optional[str] = None  # lossless on-disk stash of rgb

    def sort_key(self):
        return (self.identity_id, self.camera_id, self.sim_time, self.bbox)

    def pixels(self) -> np.ndarray:
        if self.rgb is not None:
            return self.rgb
        from PIL import Image

        with Image.open(self.spill_path) as im:
            return np.asarray(im.convert("RGB"))


def format_name(identity_id: int, camera_id: int, scene_id: int, seq: int, ext: str = "png") -> str:
    return f"{identity_id:04d}_c{camera_id}s{scene_id}_{seq:06d}.{ext}"


def parse_name(name: str):
    m = _NAME_RE.match(name)
    if not m:
        raise ValidationError(f"file name {name!r} does not follow the naming scheme")
    return int(m.group(1)), int(m.group(2)), int(m.group(3)), int(m.group(4))


@dataclass
class DatasetManifest:
    records: list  # dicts: path, identity_id, camera_id, scene_id, sim_time, bbox
    header: dict = field(default_factory=dict)
    out_dir: Optional[str] = None


@dataclass
class DatasetStats:
    n_identities: int
    n_cameras: int
    n_images: int
    per_camera: dict
    per_identity: dict
    per_scene: dict

    def to_json(self) -> dict:
        return {
            "n_identities": self.n_identities,
            "n_cameras": self.n_cameras,
            "n_images": self.n_images,
            "per_camera": {str(k): v for k, v in sorted(self.per_camera.items())},
            "per_identity": {str(k): v for k, v in sorted(self.per_identity.items())},
            "per_scene": {str(k): v for k, v in sorted(self.per_scene.items())},
        }


def _time_uniform(items, k):
    """k of n evenly spread by index; preserves order, distinct for k <= n."""
    n = len(items)
    if k >= n:
        return list(items)
    return [items[(i * n) // k] for i in range(k)]


def select_per_identity(samples, budget: int = 40, seed: int = 0):
    """Keep at most `budget` samples per identity, stratified across cameras.

    Round-robin over cameras in ascending id order, then time-uniform within
    each camera.  Fully deterministic; the seed argument is accepted for
    interface stability but the selection draws nothing from it.
    """
    if budget < 1:
        raise ValidationError(f"budget must be >= 1, got {budget}")
    by_id = {}
    for s in samples:
        by_id.setdefault(s.identity_id, []).append(s)
    out = []
    for ident in sorted(by_id):
        group = sorted(by_id[ident], key=lambda s: s.sort_key())
        if len(group) <= budget:
            out.extend(group)
            continue
        by_cam = {}
        for s in group:
            by_cam.setdefault(s.camera_id, []).append(s)
        cams = sorted(by_cam)
        counts = {c: 0 for c in cams}
        remaining = budget
        while remaining > 0:
            progressed = False
            for c in cams:
                if remaining == 0:
                    break
                if counts[c] < len(by_cam[c]):
                    counts[c] += 1
                    remaining -= 1
                    progressed = True
            if not progressed:
                break
        for c in cams:
            out.extend(_time_uniform(by_cam[c], counts[c]))
    out.sort(key=lambda s: s.sort_key())
    return out


def _record_line(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def emit_dataset(
    samples,
    out_dir: str,
    header: Optional[dict] = None,
    image_format: str = "png",
    jpeg_quality: int = 92,
) -> DatasetManifest:
    """Write images + manifest.jsonl + header.json; byte-stable given inputs."""
    from PIL import Image

    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    marker = os.path.join(out_dir, MARKER)
    with open(marker, "w") as fh:
        fh.write("emission in progress\n")

    ext = "png" if image_format == "png" else "jpg"
    ordered = sorted(samples, key=lambda s: s.sort_key())
    seq_counter = {}
    records = []
    for s in ordered:
        key = (s.identity_id, s.camera_id)
        seq = seq_counter.get(key, 0)
        seq_counter[key] = seq + 1
        name = format_name(s.identity_id, s.camera_id, s.scene_id, seq, ext)
        s.file_name = name
        path = os.path.join(out_dir, "images", name)
        img = Image.fromarray(s.pixels())
        if ext == "png":
            img.save(path)
        else:
            img.save(path, quality=jpeg_quality)
        records.append(
            {
                "path": f"images/{name}",
                "identity_id": s.identity_id,
                "camera_id": s.camera_id,
                "scene_id": s.scene_id,
                "sim_time": s.sim_time,
                "bbox": list(s.bbox),
            }
        )

    header = dict(header or {})
    header.setdefault("generator_version", GENERATOR_VERSION)
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as fh:
        for rec in records:
            fh.write(_record_line(rec) + "\n")
    with open(os.path.join(out_dir, "header.json"), "w") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.remove(marker)
    return DatasetManifest(records=records, header=header, out_dir=out_dir)


def load_manifest(out_dir: str, verify_files: bool = True) -> DatasetManifest:
    marker = os.path.join(out_dir, MARKER)
    if os.path.exists(marker):
        raise IntegrityError(f"dataset at {out_dir} is marked incomplete (found {MARKER})")
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    if not os.path.exists(manifest_path):
        raise OSError(f"no manifest.jsonl under {out_dir}")
    records = []
    with open(manifest_path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    header = {}
    header_path = os.path.join(out_dir, "header.json")
    if os.path.exists(header_path):
        with open(header_path) as fh:
            header = json.load(fh)
    if verify_files:
        missing = [r["path"] for r in records if not os.path.exists(os.path.join(out_dir, r["path"]))]
        if missing:
            raise IntegrityError(f"manifest references missing files: {missing[:5]} ...")
    return DatasetManifest(records=records, header=header, out_dir=out_dir)


def compute_stats(manifest: DatasetManifest) -> DatasetStats:
    paths = set()
    per_cam, per_id, per_scene = {}, {}, {}
    for r in manifest.records:
        if r["path"] in paths:
            raise IntegrityError(f"duplicate path in manifest: {r['path']}")
        paths.add(r["path"])
        per_cam[r["camera_id"]] = per_cam.get(r["camera_id"], 0) + 1
        per_id[r["identity_id"]] = per_id.get(r["identity_id"], 0) + 1
        per_scene[r["scene_id"]] = per_scene.get(r["scene_id"], 0) + 1
    return DatasetStats(
        n_identities=len(per_id),
        n_cameras=len(per_cam),
        n_images=len(manifest.records),
        per_camera=per_cam,
        per_identity=per_id,
        per_scene=per_scene,
    )


def save_stats(stats: DatasetStats, out_dir: str) -> None:
    with open(os.path.join(out_dir, "stats.json"), "w") as fh:
        json.dump(stats.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")
