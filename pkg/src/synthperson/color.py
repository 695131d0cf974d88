"""Vectorized RGB<->HSV conversion, hue rotation, and luminance.

All conversions take float arrays in [0, 1] with a trailing channel axis.
Hue rotation preserves S and V exactly, which the dark-clothing preset and
the night-illumination acceptance checks rely on.
"""

import numpy as np


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)

    # Hue: 0 where delta == 0, else piecewise by the max channel.
    safe_delta = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe_delta
    gc = (maxc - g) / safe_delta
    bc = (maxc - b) / safe_delta
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = (h / 6.0) % 1.0
    h = np.where(delta > 0, h, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.select([i == k for k in range(6)], choices_r)
    g = np.select([i == k for k in range(6)], choices_g)
    b = np.select([i == k for k in range(6)], choices_b)
    return np.stack([r, g, b], axis=-1)


def shift_hue(rgb: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate hue by `degrees`; S and V are untouched."""
    if degrees == 0.0:
        return np.asarray(rgb, dtype=np.float64).copy()
    hsv = rgb_to_hsv(rgb)
    hsv[..., 0] = (hsv[..., 0] + degrees / 360.0) % 1.0
    return hsv_to_rgb(hsv)


def mean_luminance(rgb_u8: np.ndarray) -> float:
    """Rec.601 luma of a uint8 image, in [0, 255]."""
    rgb = np.asarray(rgb_u8, dtype=np.float64)
    return float(np.mean(0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]))
