"""Ablation sweeps over the synthesis knobs, with a report table.

The default grid mirrors the structure of the main ablation: three texture
modes, +accessories, +hard samples at the smallest camera set; a camera
count sweep at the full foreground recipe; and an identity count sweep at
the full camera set.  Cell metrics are desk-scale retrieval numbers on
held-out cameras of the cell's own synthesized dataset.
"""

from __future__ import annotations

import copy
import json
import os

import numpy as np

from .dataset import load_manifest
from .errors import ConfigurationError, ValidationError
from .evalkit import camera_normalize, evaluate, extract_features
from .pipeline import synthesize

HARD_ON = 0.5
CAMERA_SWEEP = ("cam16", "cam22", "cam28", "cam34")
ID_SWEEP_FACTORS = (1.5, 2.0, 3.0)


def default_grid(base_ids: int):
    """Row list mirroring the texture/accessory/hard/camera/id knob table."""
    rows = []
    for mode in ("random", "generated", "real"):
        rows.append(dict(label=f"{mode}", ids=base_ids, camera_preset="cam6",
                         texture_mode=mode, accessories=False, hard_fraction=0.0))
    rows.append(dict(label="real+acc", ids=base_ids, camera_preset="cam6",
                     texture_mode="real", accessories=True, hard_fraction=0.0))
    rows.append(dict(label="real+acc+hard", ids=base_ids, camera_preset="cam6",
                     texture_mode="real", accessories=True, hard_fraction=HARD_ON))
    for cam in CAMERA_SWEEP:
        rows.append(dict(label=f"{cam}", ids=base_ids, camera_preset=cam,
                         texture_mode="real", accessories=True, hard_fraction=HARD_ON))
    for f in ID_SWEEP_FACTORS:
        ids = int(round(base_ids * f))
        rows.append(dict(label=f"ids{ids}", ids=ids, camera_preset="cam34",
                         texture_mode="real", accessories=True, hard_fraction=HARD_ON))
    return rows


AXIS_VALUES = {
    "texture": [("texture_mode", v) for v in ("random", "generated", "real")],
    "accessories": [("accessories", v) for v in (False, True)],
    "hard": [("hard_fraction", v) for v in (0.0, HARD_ON)],
    "cameras": [("camera_preset", v) for v in ("cam6",) + CAMERA_SWEEP],
}


def axes_grid(base_cfg: dict, axes):
    """Cartesian grid over named axes, other knobs at base config values."""
    cells = [dict(label="")]
    for axis in axes:
        if axis not in AXIS_VALUES:
            raise ValidationError(f"unknown ablation axis {axis!r}; known: {sorted(AXIS_VALUES)}")
        cells = [
            {**cell, key: value, "label": f"{cell['label']}{axis}={value} "}
            for cell in cells
            for key, value in AXIS_VALUES[axis]
        ]
    for cell in cells:
        cell.setdefault("ids", base_cfg["identities"]["count"])
        cell["label"] = cell["label"].strip() or "base"
    return cells


def _cell_config(base_cfg: dict, cell: dict, cell_dir: str) -> dict:
    cfg = copy.deepcopy(base_cfg)
    cfg["identities"]["count"] = cell.get("ids", cfg["identities"]["count"])
    cfg["identities"]["texture_mode"] = cell.get("texture_mode", cfg["identities"]["texture_mode"])
    cfg["identities"]["accessories"] = cell.get("accessories", cfg["identities"]["accessories"])
    cfg["identities"]["hard_fraction"] = cell.get("hard_fraction", cfg["identities"]["hard_fraction"])
    cfg["world"]["camera_preset"] = cell.get("camera_preset", cfg["world"]["camera_preset"])
    cfg["emission"]["out_dir"] = cell_dir
    return cfg


def holdout_eval(out_dir: str, distance: str = "l2", max_rank: int = 20):
    """Cross-camera retrieval on the last quarter of the dataset's cameras."""
    manifest = load_manifest(out_dir)
    cams = sorted({r["camera_id"] for r in manifest.records})
    hold = max(2, len(cams) // 4)
    eval_cams = cams[-hold:]
    return evaluate_manifest(out_dir, eval_cams, eval_cams, distance=distance, max_rank=max_rank)


def evaluate_manifest(
    out_dir: str,
    query_cams,
    gallery_cams,
    distance: str = "l2",
    max_rank: int = 50,
    normalize: bool = True,
):
    """Feature-extract a dataset and run the cross-camera protocol.

    Queries are the time-earliest record per (identity, camera) pair among
    the query cameras; the gallery is every record of the gallery cameras.
    """
    from PIL import Image

    manifest = load_manifest(out_dir)
    query_cams = set(query_cams)
    gallery_cams = set(gallery_cams)
    wanted = [r for r in manifest.records if r["camera_id"] in query_cams | gallery_cams]
    if not wanted:
        raise ValidationError("no records in the requested cameras")
    feats = np.empty((len(wanted), 192))
    for i, rec in enumerate(wanted):
        with Image.open(os.path.join(out_dir, rec["path"])) as im:
            feats[i] = extract_features(np.asarray(im.convert("RGB")))
    cams = np.asarray([r["camera_id"] for r in wanted])
    ids = np.asarray([r["identity_id"] for r in wanted])
    if normalize:
        feats = camera_normalize(feats, cams)

    seen = set()
    q_idx = []
    for i, rec in enumerate(wanted):
        key = (rec["identity_id"], rec["camera_id"])
        if rec["camera_id"] in query_cams and key not in seen:
            seen.add(key)
            q_idx.append(i)
    g_idx = [i for i, rec in enumerate(wanted) if rec["camera_id"] in gallery_cams]
    if not q_idx or not g_idx:
        raise ValidationError("query or gallery selection is empty")
    return evaluate(
        feats[q_idx], ids[q_idx], cams[q_idx],
        feats[g_idx], ids[g_idx], cams[g_idx],
        distance=distance, max_rank=max_rank,
    )


def run_ablation(base_cfg: dict, cells, out_dir: str, threads: int = 1):
    """Synthesize + evaluate every cell; infeasible cells are marked skipped."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i, cell in enumerate(cells):
        cell_dir = os.path.join(out_dir, f"cell_{i:02d}")
        row = {
            "label": cell["label"],
            "ids": cell.get("ids", base_cfg["identities"]["count"]),
            "camera_preset": cell.get("camera_preset", base_cfg["world"]["camera_preset"]),
            "texture_mode": cell.get("texture_mode", base_cfg["identities"]["texture_mode"]),
            "accessories": cell.get("accessories", base_cfg["identities"]["accessories"]),
            "hard_fraction": cell.get("hard_fraction", base_cfg["identities"]["hard_fraction"]),
            "out_dir": cell_dir,
            "skipped": False,
            "reason": "",
            "n_images": 0,
            "rank1": None,
            "rank5": None,
            "map": None,
        }
        cfg = _cell_config(base_cfg, cell, cell_dir)
        try:
            run = synthesize(cfg, threads=threads)
            result = holdout_eval(cell_dir)
            row["n_images"] = run.stats.n_images
            row["rank1"] = result.rank(1)
            row["rank5"] = result.rank(min(5, len(result.cmc)))
            row["map"] = result.map
        except (ConfigurationError, ValidationError) as exc:
            row["skipped"] = True
            row["reason"] = str(exc)
        rows.append(row)
    _write_report(rows, out_dir)
    return rows


def _write_report(rows, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(format_report(rows) + "\n")


def format_report(rows) -> str:
    header = f"{'cell':<16} {'ids':>5} {'cams':>6} {'tex':>9} {'acc':>5} {'hard':>5} {'imgs':>7} {'rank1':>7} {'rank5':>7} {'mAP':>7}  status"
    lines = [header, "-" * len(header)]
    for r in rows:
        if r["skipped"]:
            metrics = f"{'-':>7} {'-':>7} {'-':>7}  skipped: {r['reason']}"
        else:
            metrics = f"{r['rank1']:>7.3f} {r['rank5']:>7.3f} {r['map']:>7.3f}  ok"
        lines.append(
            f"{r['label']:<16} {r['ids']:>5} {r['camera_preset']:>6} {r['texture_mode']:>9} "
            f"{str(r['accessories']):>5} {r['hard_fraction']:>5} {r['n_images']:>7} {metrics}"
        )
    return "\n".join(lines)
