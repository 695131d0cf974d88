"""Frame annotation: instance extraction, occlusion, filtering, crop jitter.

Bounding boxes are (x0, y0, x1, y1) with inclusive pixel coordinates,
recomputable exactly as the min/max of each label's pixels in the instance
buffer.  Visibility is measured against an isolation re-render rather than
estimated geometrically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import UndefinedVisibilityError, ValidationError
from .render import Frame

log = logging.getLogger(__name__)

REASON_SMALL = "small"
REASON_EDGE = "edge"
REASON_OCCLUDED = "occluded"


@dataclass(frozen=True)
class InstanceObservation:
    identity_id: int
    camera_id: int
    sim_time: float
    pixel_count: int
    bbox: tuple  # (x0, y0, x1, y1) inclusive
    touches_edge: bool
    visible_ratio: Optional[float] = None  # filled by occlusion measurement


@dataclass(frozen=True)
class FilterPolicy:
    min_height_px: int = 40
    min_visible_ratio: float = 0.5
    reject_edge_touching: bool = True  # rejects edge boxes with height < 2*min_height_px

    def __post_init__(self):
        if self.min_height_px <= 0:
            raise ValidationError("min_height_px must be positive")
        if not 0.0 < self.min_visible_ratio <= 1.0:
            raise ValidationError("min_visible_ratio must lie in (0, 1]")


def extract_instances(frame: Frame):
    """One observation per distinct nonzero label, bbox tight by construction."""
    inst = frame.instance
    h, w = inst.shape
    ys, xs = np.nonzero(inst)
    if len(ys) == 0:
        return []
    labels = inst[ys, xs]
    order = np.argsort(labels, kind="stable")
    labels = labels[order]
    ys = ys[order]
    xs = xs[order]
    uniq, starts = np.unique(labels, return_index=True)
    bounds = np.append(starts, len(labels))
    out = []
    for i, label in enumerate(uniq):
        sl = slice(bounds[i], bounds[i + 1])
        gx, gy = xs[sl], ys[sl]
        x0, x1 = int(gx.min()), int(gx.max())
        y0, y1 = int(gy.min()), int(gy.max())
        out.append(
            InstanceObservation(
                identity_id=int(label),
                camera_id=frame.camera_id,
                sim_time=frame.sim_time,
                pixel_count=int(sl.stop - sl.start),
                bbox=(x0, y0, x1, y1),
                touches_edge=bool(x0 == 0 or y0 == 0 or x1 == w - 1 or y1 == h - 1),
            )
        )
    return out


def occlusion_ratio(frame: Frame, isolated_frame: Frame, identity_id: int) -> float:
    """visible pixels / isolated pixels, clamped to [0, 1]."""
    full = int(np.count_nonzero(frame.instance == identity_id))
    alone = int(np.count_nonzero(isolated_frame.instance == identity_id))
    if alone == 0:
        raise UndefinedVisibilityError(
            f"identity {identity_id} has no pixels in its isolated render"
        )
    return min(1.0, full / alone)


def apply_filter(obs: InstanceObservation, policy: FilterPolicy) -> Optional[str]:
    """Returns None to keep, or the name of the rule that discards."""
    if obs.visible_ratio is None:
        raise ValidationError("observation needs visible_ratio before filtering")
    height = obs.bbox[3] - obs.bbox[1] + 1
    if height < policy.min_height_px:
        return REASON_SMALL
    if obs.touches_edge and policy.reject_edge_touching and height < 2 * policy.min_height_px:
        return REASON_EDGE
    if obs.visible_ratio < policy.min_visible_ratio:
        return REASON_OCCLUDED
    return None


def enlarge_bbox(
    bbox,
    factor: float,
    rng: np.random.Generator,
    image_bounds,
    mode: str = "stochastic",
):
    """Push each side outward to mimic detector jitter; output contains input.

    stochastic: each side moves by an independent uniform draw in
    [0, factor*d] (d = box width for left/right, height for top/bottom),
    rounded to pixels.  fixed: every side moves by round(factor*d).
    """
    x0, y0, x1, y1 = bbox
    w, h = image_bounds
    bw = x1 - x0 + 1
    bh = y1 - y0 + 1
    if mode == "stochastic":
        left, right = rng.uniform(0.0, factor * bw, size=2)
        top, bottom = rng.uniform(0.0, factor * bh, size=2)
    elif mode == "fixed":
        left = right = factor * bw
        top = bottom = factor * bh
    else:
        raise ValidationError(f"unknown enlargement mode {mode!r}")
    return (
        max(0, x0 - int(round(left))),
        max(0, y0 - int(round(top))),
        min(w - 1, x1 + int(round(right))),
        min(h - 1, y1 + int(round(bottom))),
    )


def crop_sample(frame: Frame, enlarged_bbox, obs: InstanceObservation, scene_id: int = 0):
    """Cut the labeled crop out of the frame; degenerate boxes are skipped."""
    x0, y0, x1, y1 = enlarged_bbox
    if x1 < x0 or y1 < y0:
        log.warning(
            "skipping degenerate bbox %s for identity %s at cam %s t=%s",
            enlarged_bbox, obs.identity_id, obs.camera_id, obs.sim_time,
        )
        return None
    from .dataset import CroppedSample

    return CroppedSample(
        rgb=frame.rgb[y0 : y1 + 1, x0 : x1 + 1].copy(),
        identity_id=obs.identity_id,
        camera_id=obs.camera_id,
        scene_id=scene_id,
        sim_time=obs.sim_time,
        bbox=tuple(enlarged_bbox),
    )


def with_ratio(obs: InstanceObservation, ratio: float) -> InstanceObservation:
    return replace(obs, visible_ratio=ratio)
