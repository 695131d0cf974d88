"""Retrieval evaluation kit: stripe HSV features, per-camera normalization,
balanced identity batches, and CMC/mAP with the standard cross-camera rule.

The feature extractor is a deterministic non-learned surrogate embedding:
images are resized to 256x128, split into 6 horizontal stripes, and each
stripe contributes an L1-normalized block of 16 hue + 8 saturation +
8 value bins (192 dimensions total).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import rgb_to_hsv
from .errors import ValidationError
from .seeding import rng_for

FEATURE_DIM = 192
N_STRIPES = 6
HUE_BINS, SAT_BINS, VAL_BINS = 16, 8, 8
RESIZE_H, RESIZE_W = 256, 128


def _resize_nearest(img: np.ndarray, h: int, w: int) -> np.ndarray:
    rows = (np.arange(h) * img.shape[0]) // h
    cols = (np.arange(w) * img.shape[1]) // w
    return img[rows][:, cols]


def extract_features(image: np.ndarray) -> np.ndarray:
    """192-dim stripe histogram of an RGB uint8 (or [0,1] float) image."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValidationError(f"expected non-empty (h, w, 3) image, got shape {img.shape}")
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    img = _resize_nearest(img, RESIZE_H, RESIZE_W)
    hsv = rgb_to_hsv(img)
    hue = np.minimum((hsv[..., 0] * HUE_BINS).astype(np.int64), HUE_BINS - 1)
    sat = np.minimum((hsv[..., 1] * SAT_BINS).astype(np.int64), SAT_BINS - 1)
    val = np.minimum((hsv[..., 2] * VAL_BINS).astype(np.int64), VAL_BINS - 1)
    feat = np.zeros(FEATURE_DIM)
    block = HUE_BINS + SAT_BINS + VAL_BINS
    for s in range(N_STRIPES):
        r0 = (s * RESIZE_H) // N_STRIPES
        r1 = ((s + 1) * RESIZE_H) // N_STRIPES
        hh = np.bincount(hue[r0:r1].ravel(), minlength=HUE_BINS).astype(np.float64)
        sh = np.bincount(sat[r0:r1].ravel(), minlength=SAT_BINS).astype(np.float64)
        vh = np.bincount(val[r0:r1].ravel(), minlength=VAL_BINS).astype(np.float64)
        stripe = np.concatenate([hh, sh, vh])
        total = stripe.sum()
        if total > 0:
            stripe /= total
        feat[s * block : (s + 1) * block] = stripe
    return feat


def camera_normalize(features: np.ndarray, camera_ids) -> np.ndarray:
    """Per-camera per-dimension standardization (CBN analogue).

    Groups with fewer than two samples pass through unchanged.
    """
    features = np.asarray(features, dtype=np.float64)
    camera_ids = np.asarray(camera_ids)
    out = features.copy()
    for cam in np.unique(camera_ids):
        idx = np.nonzero(camera_ids == cam)[0]
        if len(idx) < 2:
            continue
        block = features[idx]
        mean = block.mean(axis=0)
        std = np.sqrt(np.maximum(block.var(axis=0), 1e-6))
        out[idx] = (block - mean) / std
    return out


@dataclass(frozen=True)
class Batch:
    identities: tuple  # P distinct identity labels
    indices: np.ndarray  # (P, K) sample indices

    def __post_init__(self):
        if len(set(self.identities)) != len(self.identities):
            raise ValidationError("batch identities must be distinct")
        if self.indices.shape[0] != len(self.identities):
            raise ValidationError("one index row per identity required")

    @property
    def size(self) -> int:
        return int(self.indices.size)


def balanced_batches(manifest_or_labels, P: int, K: int, seed: int = 0):
    """One epoch of PxK batches; every identity appears at least once.

    Identities with fewer than K samples are drawn with replacement; the
    final short chunk is padded with distinct filler identities.
    """
    if P < 1 or K < 1:
        raise ValidationError("P and K must be >= 1")
    if hasattr(manifest_or_labels, "records"):
        labels = [r["identity_id"] for r in manifest_or_labels.records]
    else:
        labels = list(manifest_or_labels)
    by_id = {}
    for i, ident in enumerate(labels):
        by_id.setdefault(ident, []).append(i)
    ids = sorted(by_id)
    if P > len(ids):
        raise ValidationError(f"P={P} exceeds the {len(ids)} available identities")
    rng = rng_for(seed, "balanced-batches")
    order = [ids[i] for i in rng.permutation(len(ids))]
    batches = []
    for start in range(0, len(order), P):
        chunk = order[start : start + P]
        if len(chunk) < P:
            pool = [i for i in ids if i not in chunk]
            fill = rng.choice(len(pool), size=P - len(chunk), replace=False)
            chunk = chunk + [pool[i] for i in sorted(fill)]
        rows = []
        for ident in chunk:
            pool = by_id[ident]
            if len(pool) >= K:
                pick = rng.choice(len(pool), size=K, replace=False)
            else:
                pick = rng.choice(len(pool), size=K, replace=True)
            rows.append([pool[i] for i in pick])
        batches.append(Batch(identities=tuple(chunk), indices=np.asarray(rows)))
    return batches


@dataclass
class EvalResult:
    cmc: np.ndarray  # rank-k accuracy, k = 1..len(cmc)
    map: float
    n_queries: int  # queries contributing to the averages
    n_excluded: int  # queries with no valid gallery match
    protocol: str = "cross-camera"

    def rank(self, k: int) -> float:
        return float(self.cmc[k - 1])

    def to_json(self) -> dict:
        return {
            "cmc": [float(v) for v in self.cmc],
            "map": self.map,
            "n_queries": self.n_queries,
            "n_excluded": self.n_excluded,
            "protocol": self.protocol,
        }


def pairwise_distances(a: np.ndarray, b: np.ndarray, metric: str = "l2") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValidationError("feature dimensions differ between query and gallery")
    if metric == "l2":
        sq = np.square(a).sum(1)[:, None] + np.square(b).sum(1)[None, :] - 2.0 * (a @ b.T)
        return np.sqrt(np.maximum(sq, 0.0))
    if metric == "cosine":
        an = a / np.maximum(np.linalg.norm(a, axis=1, keepdims=True), 1e-12)
        bn = b / np.maximum(np.linalg.norm(b, axis=1, keepdims=True), 1e-12)
        return 1.0 - an @ bn.T
    raise ValidationError(f"unknown distance metric {metric!r}")


def evaluate(
    query_features,
    query_ids,
    query_cams,
    gallery_features,
    gallery_ids,
    gallery_cams,
    distance: str = "l2",
    max_rank: int = 50,
) -> EvalResult:
    """CMC and mAP under the standard cross-camera retrieval protocol.

    For each query, gallery entries sharing BOTH its identity and camera are
    excluded; distance ties keep the lower gallery index.  Queries left with
    no relevant gallery entry are excluded from the averages and counted.
    """
    q_ids = np.asarray(query_ids)
    q_cams = np.asarray(query_cams)
    g_ids = np.asarray(gallery_ids)
    g_cams = np.asarray(gallery_cams)
    dist = pairwise_distances(query_features, gallery_features, distance)
    n_q, n_g = dist.shape
    max_rank = min(max_rank, n_g) if n_g else max_rank

    cmc_sum = np.zeros(max_rank)
    aps = []
    n_excluded = 0
    for qi in range(n_q):
        keep = ~((g_ids == q_ids[qi]) & (g_cams == q_cams[qi]))
        kept_ids = g_ids[keep]
        relevant_total = int(np.count_nonzero(kept_ids == q_ids[qi]))
        if relevant_total == 0:
            n_excluded += 1
            continue
        order = np.argsort(dist[qi][keep], kind="stable")
        matches = (kept_ids[order] == q_ids[qi]).astype(np.float64)
        first = int(np.argmax(matches))
        if first < max_rank:
            cmc_sum[first:] += 1.0
        precision_at = np.cumsum(matches) / (np.arange(len(matches)) + 1.0)
        aps.append(float((precision_at * matches).sum() / relevant_total))
    n_valid = len(aps)
    if n_valid == 0:
        raise ValidationError("no query has a valid cross-camera gallery match")
    return EvalResult(
        cmc=cmc_sum / n_valid,
        map=float(np.mean(aps)),
        n_queries=n_valid,
        n_excluded=n_excluded,
        protocol=f"cross-camera/{distance}",
    )
