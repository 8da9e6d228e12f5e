"""Pixel-grid rasterization and shape geometry used by scoring and oracles.

Rasterization convention (shared by every caller):

* A pixel is identified by the integer coordinates of its center.
* Circle: pixel included iff ``dx**2 + dy**2 <= r**2``.
* Rectangle: half-open box, ``x1 <= cx < x2 and y1 <= cy < y2``, so an
  integer-aligned w x h rectangle covers exactly w*h pixels.
* Polygon: even-odd rule on pixel centers (PNPOLY ray casting).
* Sphere: ``dx**2 + dy**2 + dz**2 <= r**2`` on the voxel grid; a single
  slice of a sphere is always computed through the sphere formula so
  per-slice masks agree exactly with the volume rasterization.
"""

from __future__ import annotations

import math

import numpy as np


def rasterize_circle(
    center: tuple[float, float], radius: float, shape: tuple[int, int]
) -> np.ndarray:
    rows, cols = shape
    cx, cy = float(center[0]), float(center[1])
    ys, xs = np.mgrid[0:rows, 0:cols]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius


def rasterize_rectangle(
    top_left: tuple[float, float],
    bottom_right: tuple[float, float],
    shape: tuple[int, int],
) -> np.ndarray:
    rows, cols = shape
    x1, y1 = float(top_left[0]), float(top_left[1])
    x2, y2 = float(bottom_right[0]), float(bottom_right[1])
    ys, xs = np.mgrid[0:rows, 0:cols]
    return (xs >= x1) & (xs < x2) & (ys >= y1) & (ys < y2)


def rasterize_polygon(points, shape: tuple[int, int]) -> np.ndarray:
    """Even-odd fill of a polygon given as [[x, y], ...]."""
    pts = np.asarray(points, dtype=float)
    rows, cols = shape
    mask = np.zeros(shape, dtype=bool)
    if len(pts) < 3:
        return mask
    x0 = max(int(math.floor(pts[:, 0].min())), 0)
    x1 = min(int(math.ceil(pts[:, 0].max())) + 1, cols)
    y0 = max(int(math.floor(pts[:, 1].min())), 0)
    y1 = min(int(math.ceil(pts[:, 1].max())) + 1, rows)
    if x0 >= x1 or y0 >= y1:
        return mask
    gy, gx = np.mgrid[y0:y1, x0:x1]
    inside = np.zeros(gx.shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        crosses = (ay > gy) != (by > gy)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = (bx - ax) * (gy - ay) / (by - ay) + ax
        inside ^= crosses & (gx < x_int)
    mask[y0:y1, x0:x1] = inside
    return mask


def rasterize_sphere(
    center: tuple[float, float, float], radius: float, shape: tuple[int, int, int]
) -> np.ndarray:
    """Boolean (slices, rows, cols) volume; center is (x, y, z)."""
    slices, rows, cols = shape
    cx, cy, cz = (float(c) for c in center)
    zs, ys, xs = np.mgrid[0:slices, 0:rows, 0:cols]
    return (xs - cx) ** 2 + (ys - cy) ** 2 + (zs - cz) ** 2 <= radius * radius


def sphere_slice_mask(
    center: tuple[float, float, float],
    radius: float,
    slice_index: int,
    shape: tuple[int, int],
) -> np.ndarray:
    rows, cols = shape
    cx, cy, cz = (float(c) for c in center)
    ys, xs = np.mgrid[0:rows, 0:cols]
    dz = slice_index - cz
    return (xs - cx) ** 2 + (ys - cy) ** 2 + dz * dz <= radius * radius


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return inter / union if union else 0.0


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("centroid of an empty mask")
    return float(xs.mean()), float(ys.mean())


def mask_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask))


# ---------------------------------------------------------------------------
# convex hull and minimum rotated rectangle


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, no repeated endpoint."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def min_rotated_rectangle(points) -> np.ndarray:
    """Minimum-area rotated bounding rectangle via rotating calipers.

    One candidate orientation per hull edge; returns the 4 corners of the
    best rectangle as an (4, 2) array in rotation order.
    """
    hull = convex_hull(points)
    if len(hull) == 0:
        raise ValueError("no points")
    if len(hull) == 1:
        return np.repeat(hull, 4, axis=0)
    best_area = math.inf
    best: tuple[float, float, float, float, float] | None = None
    n = len(hull)
    for i in range(n):
        ex, ey = hull[(i + 1) % n] - hull[i]
        norm = math.hypot(ex, ey)
        if norm == 0:
            continue
        ux, uy = ex / norm, ey / norm
        # coordinates in the frame aligned with this edge
        proj_x = hull[:, 0] * ux + hull[:, 1] * uy
        proj_y = -hull[:, 0] * uy + hull[:, 1] * ux
        x_min, x_max = proj_x.min(), proj_x.max()
        y_min, y_max = proj_y.min(), proj_y.max()
        area = (x_max - x_min) * (y_max - y_min)
        if area < best_area:
            best_area = area
            best = (ux, uy, x_min, x_max, y_min)
            best_y_max = y_max
    assert best is not None
    ux, uy, x_min, x_max, y_min = best
    y_max = best_y_max
    corners_local = [
        (x_min, y_min),
        (x_max, y_min),
        (x_max, y_max),
        (x_min, y_max),
    ]
    return np.asarray(
        [(x * ux - y * uy, x * uy + y * ux) for x, y in corners_local], dtype=float
    )


def mask_corner_points(mask: np.ndarray) -> np.ndarray:
    """Corners of the unit squares of every mask pixel (the pixel region)."""
    ys, xs = np.nonzero(mask)
    corners = set()
    for x, y in zip(xs.tolist(), ys.tolist()):
        corners.update(
            ((x - 0.5, y - 0.5), (x + 0.5, y - 0.5), (x - 0.5, y + 0.5), (x + 0.5, y + 0.5))
        )
    return np.asarray(sorted(corners), dtype=float)


def mask_contour_polygon(mask: np.ndarray) -> list[list[float]]:
    """Largest 0.5-level contour of a binary mask as [[x, y], ...] points.

    The contour runs midway between inside and outside pixel centers, so
    rasterizing it with the even-odd rule recovers the mask exactly.
    """
    from skimage import measure

    contours = measure.find_contours(mask.astype(float), 0.5)
    if not contours:
        return []
    contour = max(contours, key=len)
    # find_contours yields (row, col); convert to (x, y) and drop the
    # closing duplicate point.
    pts = contour[:-1] if np.allclose(contour[0], contour[-1]) else contour
    return [[float(c), float(r)] for r, c in pts]
