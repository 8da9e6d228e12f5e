"""Independent reference implementations used as test oracles.

Everything here is written from scratch with scalar loops and different
algorithms than the package (gift-wrapping hull instead of monotone
chain, per-pixel iteration instead of vectorized grids, struct-level
DICOM walking instead of the package parser).  The shared rasterization
conventions are part of the scoring contract: pixel centers, circles by
squared distance, half-open rectangles, even-odd polygons.
"""

from __future__ import annotations

import math
import struct

import numpy as np

# ---------------------------------------------------------------------------
# rasterization and IoU


def circle_mask(center, radius, shape):
    rows, cols = shape
    out = np.zeros(shape, dtype=bool)
    for y in range(rows):
        for x in range(cols):
            out[y, x] = (x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius * radius
    return out


def rect_mask(top_left, bottom_right, shape):
    rows, cols = shape
    out = np.zeros(shape, dtype=bool)
    for y in range(rows):
        for x in range(cols):
            out[y, x] = (
                top_left[0] <= x < bottom_right[0]
                and top_left[1] <= y < bottom_right[1]
            )
    return out


def point_in_polygon(px, py, points):
    inside = False
    n = len(points)
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        if (ay > py) != (by > py):
            x_int = (bx - ax) * (py - ay) / (by - ay) + ax
            if px < x_int:
                inside = not inside
    return inside


def polygon_mask(points, shape):
    rows, cols = shape
    out = np.zeros(shape, dtype=bool)
    for y in range(rows):
        for x in range(cols):
            out[y, x] = point_in_polygon(x, y, points)
    return out


def mask_iou(a, b):
    inter = int((a & b).sum())
    union = int((a | b).sum())
    return inter / union if union else 0.0


def gift_wrap_hull(points):
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    start = min(pts)
    hull = [start]
    current = start
    while True:
        candidate = None
        for p in pts:
            if p == current:
                continue
            if candidate is None:
                candidate = p
                continue
            cross = (candidate[0] - current[0]) * (p[1] - current[1]) - (
                candidate[1] - current[1]
            ) * (p[0] - current[0])
            far = (p[0] - current[0]) ** 2 + (p[1] - current[1]) ** 2 > (
                candidate[0] - current[0]
            ) ** 2 + (candidate[1] - current[1]) ** 2
            if cross < 0 or (cross == 0 and far):
                candidate = p
        hull.append(candidate)
        current = candidate
        if candidate == start:
            break
    return hull[:-1]


def min_rotated_rect(points):
    hull = gift_wrap_hull(points)
    best = None
    n = len(hull)
    for i in range(n):
        ex = hull[(i + 1) % n][0] - hull[i][0]
        ey = hull[(i + 1) % n][1] - hull[i][1]
        norm = math.hypot(ex, ey)
        if norm == 0:
            continue
        ux, uy = ex / norm, ey / norm
        xs = [p[0] * ux + p[1] * uy for p in hull]
        ys = [-p[0] * uy + p[1] * ux for p in hull]
        area = (max(xs) - min(xs)) * (max(ys) - min(ys))
        if best is None or area < best[0]:
            best = (area, ux, uy, min(xs), max(xs), min(ys), max(ys))
    _, ux, uy, x0, x1, y0, y1 = best
    return [
        (x * ux - y * uy, x * uy + y * ux)
        for x, y in ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    ]


def normalized_iou(shape_dict, mask):
    """Replicates the normalized-IoU contract with per-pixel loops."""
    if shape_dict["type"] == "circle":
        raster = circle_mask(shape_dict["center"], shape_dict["radius"], mask.shape)
        ys, xs = np.nonzero(mask)
        centroid = (float(xs.mean()), float(ys.mean()))
        best = circle_mask(centroid, math.sqrt(int(mask.sum()) / math.pi), mask.shape)
        normalizer = mask_iou(best, mask)
    elif shape_dict["type"] == "rectangle":
        raster = rect_mask(
            shape_dict["top_left"], shape_dict["bottom_right"], mask.shape
        )
        ys, xs = np.nonzero(mask)
        aabb = rect_mask(
            (xs.min() - 0.5, ys.min() - 0.5),
            (xs.max() + 0.5, ys.max() + 0.5),
            mask.shape,
        )
        corners = []
        for x, y in zip(xs.tolist(), ys.tolist()):
            corners += [
                (x - 0.5, y - 0.5),
                (x + 0.5, y - 0.5),
                (x - 0.5, y + 0.5),
                (x + 0.5, y + 0.5),
            ]
        rotated = polygon_mask(min_rotated_rect(corners), mask.shape)
        normalizer = max(mask_iou(aabb, mask), mask_iou(rotated, mask))
    else:
        raster = polygon_mask(shape_dict["points"], mask.shape)
        normalizer = 1.0
    raw = mask_iou(raster, mask)
    if normalizer <= 0:
        return 0.0
    return min(1.0, max(0.0, raw / normalizer))


def sphere_mask(center, radius, shape):
    slices, rows, cols = shape
    out = np.zeros(shape, dtype=bool)
    for z in range(slices):
        for y in range(rows):
            for x in range(cols):
                d2 = (
                    (x - center[0]) ** 2
                    + (y - center[1]) ** 2
                    + (z - center[2]) ** 2
                )
                out[z, y, x] = d2 <= radius * radius
    return out


# ---------------------------------------------------------------------------
# DICOM dump (explicit VR little endian walker; shares nothing with the
# package parser)

_SHORT_FORM = set(
    "AE AS AT CS DA DS DT FL FD IS LO LT PN SH SL SS ST TM UI UL US".split()
)


def dump_elements(data: bytes):
    """(group, element, vr, value bytes) for every element in file order."""
    assert data[128:132] == b"DICM", "not a Part 10 file"
    offset = 132
    elements = []
    while offset < len(data):
        group, element = struct.unpack_from("<HH", data, offset)
        vr = data[offset + 4 : offset + 6].decode("ascii")
        if vr in _SHORT_FORM:
            (length,) = struct.unpack_from("<H", data, offset + 6)
            offset += 8
        else:
            (length,) = struct.unpack_from("<I", data, offset + 8)
            offset += 12
        elements.append((group, element, vr, data[offset : offset + length]))
        offset += length
    return elements
