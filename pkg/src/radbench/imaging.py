"""Preprocessor pipelines and screenshot rendering.

All pixel tools share one coordinate frame: the (x, y) positions in any
PNG produced here line up with stored-pixel coordinates, so segmentation
actions can round-trip coordinates without a transform.  Zoom affects
screenshot rendering only.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from . import pacs
from .errors import NonPositiveWidth, UnknownPipeline

PIPELINES = (
    "default",
    "lung_window",
    "soft_tissue_window",
    "percentile_norm",
    "breast_mri",
    "raw_uint16",
)

LUNG_WINDOW = (1500.0, -600.0)
SOFT_TISSUE_WINDOW = (400.0, 40.0)
BANNER_HEIGHT = 16


def _half_up(x: np.ndarray) -> np.ndarray:
    """Round half toward +inf; deterministic across platforms."""
    return np.floor(x + 0.5)


def apply_window(frame: np.ndarray, ww: float, wc: float) -> np.ndarray:
    """Linear window map to 8 bits.

    out = clamp(round((v - (wc - ww/2)) / ww * 255), 0, 255)
    """
    if ww <= 0:
        raise NonPositiveWidth(f"window width must be > 0, got {ww}")
    lo = wc - ww / 2.0
    scaled = _half_up((frame.astype(np.float64) - lo) / ww * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def percentile_normalize(
    frame: np.ndarray, stats_source: np.ndarray | None = None
) -> np.ndarray:
    """Linear stretch between the 1st and 99th intensity percentiles."""
    source = frame if stats_source is None else stats_source
    lo, hi = np.percentile(source.astype(np.float64), [1.0, 99.0])
    if hi <= lo:
        return np.zeros(frame.shape, dtype=np.uint8)
    scaled = _half_up((frame.astype(np.float64) - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def encode_png(frame: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    return np.array(Image.open(io.BytesIO(data)))


def _series_volume(store: pacs.Store, series_uid: str) -> np.ndarray:
    series = store.series(series_uid)
    return np.stack(
        [store.frames[(series_uid, i)].pixels for i in range(series.instance_count)]
    )


def preprocess_frame(
    store: pacs.Store, series_uid: str, slice_index: int, pipeline: str
) -> tuple[bytes, tuple[int, int]]:
    """Run one slice through a named pipeline; returns (png, (width, height)).

    ``default`` picks a modality-aware preset: the soft-tissue window for
    CT, percentile normalization otherwise.  ``raw_uint16`` emits the
    stored values as a 16-bit grayscale PNG.
    """
    if pipeline not in PIPELINES:
        raise UnknownPipeline(f"unknown pipeline {pipeline!r}")
    series = store.series(series_uid)
    frame = pacs.fetch_frame(store, series_uid, slice_index)
    if pipeline == "raw_uint16":
        pixels = frame.pixels
        out = pixels.astype(np.uint16) if pixels.dtype != np.uint16 else pixels
        return encode_png(out), (out.shape[1], out.shape[0])
    if pipeline == "default":
        pipeline = "soft_tissue_window" if series.modality == "CT" else "percentile_norm"
    if pipeline == "lung_window":
        out8 = apply_window(frame.to_hu(), *LUNG_WINDOW)
    elif pipeline == "soft_tissue_window":
        out8 = apply_window(frame.to_hu(), *SOFT_TISSUE_WINDOW)
    elif pipeline == "percentile_norm":
        out8 = percentile_normalize(frame.pixels)
    else:  # breast_mri: percentile stretch with series-wide statistics
        out8 = percentile_normalize(
            frame.pixels, stats_source=_series_volume(store, series_uid)
        )
    return encode_png(out8), (out8.shape[1], out8.shape[0])


# ---------------------------------------------------------------------------
# screenshot


def _draw_overlays(image: Image.Image, segmentations, slice_index: int) -> None:
    draw = ImageDraw.Draw(image)
    for seg in segmentations:
        if seg.slice_index != slice_index:
            continue
        shape = seg.shape
        kind = type(shape).__name__
        if kind == "Circle":
            cx, cy = shape.center
            r = shape.radius
            draw.ellipse((cx - r, cy - r, cx + r, cy + r), outline=255, width=1)
        elif kind == "Rectangle":
            x1, y1 = shape.top_left
            x2, y2 = shape.bottom_right
            draw.rectangle((x1, y1, x2, y2), outline=255, width=1)
        else:
            pts = [tuple(p) for p in shape.points]
            draw.polygon(pts, outline=255)


def _apply_zoom(frame8: np.ndarray, zoom: float) -> np.ndarray:
    """Smaller zoom values zoom in (center crop + nearest upscale)."""
    if zoom == 1.0:
        return frame8
    rows, cols = frame8.shape
    if zoom < 1.0:
        crop_r = max(1, int(round(rows * zoom)))
        crop_c = max(1, int(round(cols * zoom)))
        y0 = (rows - crop_r) // 2
        x0 = (cols - crop_c) // 2
        crop = frame8[y0 : y0 + crop_r, x0 : x0 + crop_c]
        img = Image.fromarray(crop).resize((cols, rows), Image.NEAREST)
        return np.array(img)
    small_r = max(1, int(round(rows / zoom)))
    small_c = max(1, int(round(cols / zoom)))
    small = np.array(Image.fromarray(frame8).resize((small_c, small_r), Image.NEAREST))
    canvas = np.zeros_like(frame8)
    y0 = (rows - small_r) // 2
    x0 = (cols - small_c) // 2
    canvas[y0 : y0 + small_r, x0 : x0 + small_c] = small
    return canvas


def render_screenshot(viewport, segmentations, store: pacs.Store) -> bytes:
    """Deterministic composite: windowed slice, overlays, state banner."""
    series_uid = viewport.series_uid
    store.series(series_uid)  # raises UnknownUID for stale viewports
    frame = pacs.fetch_frame(store, series_uid, viewport.slice_index)
    frame8 = apply_window(frame.to_hu(), viewport.window_width, viewport.window_center)
    image = Image.fromarray(frame8, mode="L")
    _draw_overlays(image, segmentations, viewport.slice_index)
    zoomed = _apply_zoom(np.array(image), viewport.zoom)

    rows, cols = zoomed.shape
    canvas = Image.new("L", (cols, rows + BANNER_HEIGHT), color=0)
    canvas.paste(Image.fromarray(zoomed, mode="L"), (0, BANNER_HEIGHT))
    draw = ImageDraw.Draw(canvas)
    banner = (
        f"{series_uid[-12:]} slice {viewport.slice_index}/{viewport.total_images}"
        f" ww {viewport.window_width:g} wc {viewport.window_center:g}"
        f" zoom {viewport.zoom:g}"
    )
    draw.text((2, 2), banner, fill=255, font=ImageFont.load_default())
    return encode_png(np.array(canvas))
