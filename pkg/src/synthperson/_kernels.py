"""Numba inner loops for the software rasterizer.

The raster kernel consumes view-space triangles, near-clips them, projects
with a pinhole model, and resolves visibility through a shared z-buffer.
Depth interpolation is perspective-correct, so the depth written at a pixel
center equals the exact ray/triangle-plane intersection depth, which is
what lets the instance buffer match an independent per-pixel ray-cast
oracle bit-for-bit on non-degenerate scenes.

Pixel loops always use global pixel coordinates; rendering into an offset
window therefore reproduces exactly the pixels a full-frame render would
produce, simply restricted to the window.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _raster_tri(
    v0x, v0y, v0z, v1x, v1y, v1z, v2x, v2y, v2z,
    u0, w0t, u1, w1t, u2, w2t,
    label, texid, sr, sg, sb,
    textures, fl, cx, cy, x_off, y_off,
    rgb, inst, depth,
):
    # Screen-space projection (z > 0 guaranteed by the near clip).
    x0s = cx + fl * v0x / v0z
    y0s = cy - fl * v0y / v0z
    x1s = cx + fl * v1x / v1z
    y1s = cy - fl * v1y / v1z
    x2s = cx + fl * v2x / v2z
    y2s = cy - fl * v2y / v2z

    area = (x1s - x0s) * (y2s - y0s) - (y1s - y0s) * (x2s - x0s)
    if area == 0.0:
        return

    hh, ww = inst.shape
    minx = min(x0s, min(x1s, x2s))
    maxx = max(x0s, max(x1s, x2s))
    miny = min(y0s, min(y1s, y2s))
    maxy = max(y0s, max(y1s, y2s))

    px0 = int(math.ceil(minx - 0.5))
    px1 = int(math.floor(maxx - 0.5))
    py0 = int(math.ceil(miny - 0.5))
    py1 = int(math.floor(maxy - 0.5))
    if px0 < x_off:
        px0 = x_off
    if py0 < y_off:
        py0 = y_off
    if px1 > x_off + ww - 1:
        px1 = x_off + ww - 1
    if py1 > y_off + hh - 1:
        py1 = y_off + hh - 1
    if px1 < px0 or py1 < py0:
        return

    iw0 = 1.0 / v0z
    iw1 = 1.0 / v1z
    iw2 = 1.0 / v2z
    tn, th, tw = textures.shape[0], textures.shape[1], textures.shape[2]

    for py in range(py0, py1 + 1):
        sy = py + 0.5
        for px in range(px0, px1 + 1):
            sx = px + 0.5
            e0 = (x1s - x0s) * (sy - y0s) - (y1s - y0s) * (sx - x0s)
            e1 = (x2s - x1s) * (sy - y1s) - (y2s - y1s) * (sx - x1s)
            e2 = (x0s - x2s) * (sy - y2s) - (y0s - y2s) * (sx - x2s)
            if not (
                (e0 >= 0.0 and e1 >= 0.0 and e2 >= 0.0)
                or (e0 <= 0.0 and e1 <= 0.0 and e2 <= 0.0)
            ):
                continue
            l0 = e1 / area
            l1 = e2 / area
            l2 = e0 / area
            wz = l0 * iw0 + l1 * iw1 + l2 * iw2
            if wz <= 0.0:
                continue
            z = 1.0 / wz
            iy = py - y_off
            ix = px - x_off
            if z < depth[iy, ix]:
                depth[iy, ix] = z
                inst[iy, ix] = label
                uu = z * (l0 * u0 * iw0 + l1 * u1 * iw1 + l2 * u2 * iw2)
                vv = z * (l0 * w0t * iw0 + l1 * w1t * iw1 + l2 * w2t * iw2)
                tu = int(uu * tw)
                tv = int(vv * th)
                if tu < 0:
                    tu = 0
                elif tu > tw - 1:
                    tu = tw - 1
                if tv < 0:
                    tv = 0
                elif tv > th - 1:
                    tv = th - 1
                ti = texid
                if ti < 0 or ti >= tn:
                    ti = 0
                rgb[iy, ix, 0] = textures[ti, tv, tu, 0] * sr
                rgb[iy, ix, 1] = textures[ti, tv, tu, 1] * sg
                rgb[iy, ix, 2] = textures[ti, tv, tu, 2] * sb


@njit(cache=True, nogil=True)
def raster_triangles(
    verts, uvs, labels, texids, shades, textures,
    fl, cx, cy, near, x_off, y_off,
    rgb, inst, depth,
):
    """Rasterize all triangles in order with a strict-less z-test.

    Ties in depth keep the earlier triangle, so draw order (scenery first,
    then pedestrians by ascending id) is the deterministic tie-break.
    """
    n = verts.shape[0]
    poly = np.empty((4, 3), dtype=np.float64)
    puv = np.empty((4, 2), dtype=np.float64)
    for t in range(n):
        n_in = 0
        for k in range(3):
            if verts[t, k, 2] >= near:
                n_in += 1
        if n_in == 0:
            continue
        if n_in == 3:
            npoly = 3
            for k in range(3):
                poly[k, 0] = verts[t, k, 0]
                poly[k, 1] = verts[t, k, 1]
                poly[k, 2] = verts[t, k, 2]
                puv[k, 0] = uvs[t, k, 0]
                puv[k, 1] = uvs[t, k, 1]
        else:
            # Sutherland-Hodgman against the z = near plane.
            npoly = 0
            for k in range(3):
                kn = (k + 1) % 3
                zc = verts[t, k, 2]
                zn = verts[t, kn, 2]
                cin = zc >= near
                nin = zn >= near
                if cin:
                    poly[npoly, 0] = verts[t, k, 0]
                    poly[npoly, 1] = verts[t, k, 1]
                    poly[npoly, 2] = zc
                    puv[npoly, 0] = uvs[t, k, 0]
                    puv[npoly, 1] = uvs[t, k, 1]
                    npoly += 1
                if cin != nin:
                    s = (near - zc) / (zn - zc)
                    poly[npoly, 0] = verts[t, k, 0] + s * (verts[t, kn, 0] - verts[t, k, 0])
                    poly[npoly, 1] = verts[t, k, 1] + s * (verts[t, kn, 1] - verts[t, k, 1])
                    poly[npoly, 2] = near
                    puv[npoly, 0] = uvs[t, k, 0] + s * (uvs[t, kn, 0] - uvs[t, k, 0])
                    puv[npoly, 1] = uvs[t, k, 1] + s * (uvs[t, kn, 1] - uvs[t, k, 1])
                    npoly += 1
        for k in range(npoly - 2):
            _raster_tri(
                poly[0, 0], poly[0, 1], poly[0, 2],
                poly[k + 1, 0], poly[k + 1, 1], poly[k + 1, 2],
                poly[k + 2, 0], poly[k + 2, 1], poly[k + 2, 2],
                puv[0, 0], puv[0, 1],
                puv[k + 1, 0], puv[k + 1, 1],
                puv[k + 2, 0], puv[k + 2, 1],
                labels[t], texids[t],
                shades[t, 0], shades[t, 1], shades[t, 2],
                textures, fl, cx, cy, x_off, y_off,
                rgb, inst, depth,
            )
