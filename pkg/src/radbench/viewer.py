"""Per-episode viewer: viewport state, navigation commands, segmentations.

Navigation is transactional: a failed command raises before any field is
touched, leaving the state bit-identical.  Each episode owns one
:class:`ViewerSession`; the runner serializes tool calls within an
episode, and distinct episodes share nothing mutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import pacs
from .errors import (
    InvalidShape,
    NonPositiveWidth,
    NonPositiveZoom,
    SliceOutOfRange,
    UnknownUID,
)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class Rectangle:
    top_left: tuple[float, float]
    bottom_right: tuple[float, float]


@dataclass(frozen=True)
class Polygon:
    points: tuple[tuple[float, float], ...]


Shape = Circle | Rectangle | Polygon


@dataclass(frozen=True)
class Segmentation:
    id: int
    label: str
    slice_index: int
    shape: Shape

    def summary(self) -> dict:
        if isinstance(self.shape, Circle):
            detail = {
                "type": "circle",
                "center": list(self.shape.center),
                "radius": self.shape.radius,
            }
        elif isinstance(self.shape, Rectangle):
            detail = {
                "type": "rectangle",
                "top_left": list(self.shape.top_left),
                "bottom_right": list(self.shape.bottom_right),
            }
        else:
            detail = {"type": "polygon", "points": [list(p) for p in self.shape.points]}
        return {
            "id": self.id,
            "label": self.label,
            "slice_index": self.slice_index,
            "shape": detail,
        }


@dataclass(frozen=True)
class ViewportState:
    slice_index: int
    total_images: int
    window_width: float
    window_center: float
    zoom: float
    series_uid: str
    display_set_uids: tuple[str, ...]

    def snapshot(self) -> dict:
        return {
            "sliceIndex": self.slice_index,
            "totalImages": self.total_images,
            "windowWidth": self.window_width,
            "windowCenter": self.window_center,
            "zoom": self.zoom,
            "seriesInstanceUID": self.series_uid,
            "displaySetInstanceUIDs": list(self.display_set_uids),
        }


# navigation commands


@dataclass(frozen=True)
class SetSlice:
    slice_index: int


@dataclass(frozen=True)
class SetWindowLevel:
    window_width: float
    window_center: float


@dataclass(frozen=True)
class SetZoom:
    scale: float


@dataclass(frozen=True)
class SelectSeries:
    series_uid: str


Command = SetSlice | SetWindowLevel | SetZoom | SelectSeries


def initial_viewport(task, store: pacs.Store) -> ViewportState:
    """Viewport after reset: initial series/slice, tag-derived window."""
    study = store.study(task.study_uid)
    display_sets = list(study.series_uids)
    for aux_uid in task.auxiliary_study_uids:
        display_sets.extend(store.study(aux_uid).series_uids)
    series = store.series(task.initial_series_uid)
    if series.study_uid not in [task.study_uid, *task.auxiliary_study_uids]:
        raise UnknownUID("series", task.initial_series_uid)
    if not 0 <= task.initial_slice_index < series.instance_count:
        raise SliceOutOfRange(task.initial_slice_index, series.instance_count)
    first = store.datasets[series.instances[task.initial_slice_index].sop_uid]
    return ViewportState(
        slice_index=task.initial_slice_index,
        total_images=series.instance_count,
        window_width=first.decimal("WindowWidth"),
        window_center=first.decimal("WindowCenter"),
        zoom=1.0,
        series_uid=task.initial_series_uid,
        display_set_uids=tuple(display_sets),
    )


def apply_navigation(
    state: ViewportState, command: Command, store: pacs.Store
) -> ViewportState:
    """Apply one command; exactly the named fields change.

    Raises on invalid input without modifying anything (the tool layer
    converts the exception into a failed tool result).
    """
    if isinstance(command, SetSlice):
        if not 0 <= command.slice_index < state.total_images:
            raise SliceOutOfRange(command.slice_index, state.total_images)
        return replace(state, slice_index=command.slice_index)
    if isinstance(command, SetWindowLevel):
        if command.window_width <= 0:
            raise NonPositiveWidth(
                f"window width must be > 0, got {command.window_width}"
            )
        return replace(
            state,
            window_width=float(command.window_width),
            window_center=float(command.window_center),
        )
    if isinstance(command, SetZoom):
        if command.scale <= 0:
            raise NonPositiveZoom(f"zoom must be > 0, got {command.scale}")
        return replace(state, zoom=float(command.scale))
    if isinstance(command, SelectSeries):
        if command.series_uid not in state.display_set_uids:
            raise UnknownUID("series", command.series_uid)
        series = store.series(command.series_uid)
        return replace(
            state,
            series_uid=command.series_uid,
            slice_index=0,
            total_images=series.instance_count,
        )
    raise TypeError(f"unknown command {command!r}")


def _shape_bbox(shape: Shape) -> tuple[float, float, float, float]:
    if isinstance(shape, Circle):
        cx, cy = shape.center
        r = shape.radius
        return (cx - r, cy - r, cx + r, cy + r)
    if isinstance(shape, Rectangle):
        return (*shape.top_left, *shape.bottom_right)
    xs = [p[0] for p in shape.points]
    ys = [p[1] for p in shape.points]
    return (min(xs), min(ys), max(xs), max(ys))


def validate_shape(shape: Shape, frame_shape: tuple[int, int]) -> None:
    """Shape invariants plus a loose bounds check (must intersect the
    frame); out-of-frame excess is clipped at scoring time, not here."""
    if isinstance(shape, Circle):
        if shape.radius <= 0:
            raise InvalidShape(f"circle radius must be > 0, got {shape.radius}")
    elif isinstance(shape, Rectangle):
        x1, y1 = shape.top_left
        x2, y2 = shape.bottom_right
        if not (x1 < x2 and y1 < y2):
            raise InvalidShape("rectangle top_left must be < bottom_right")
    elif isinstance(shape, Polygon):
        if len(shape.points) < 3:
            raise InvalidShape(f"polygon needs >= 3 points, got {len(shape.points)}")
    else:
        raise InvalidShape(f"unknown shape {shape!r}")
    rows, cols = frame_shape
    x1, y1, x2, y2 = _shape_bbox(shape)
    if x2 < 0 or y2 < 0 or x1 >= cols or y1 >= rows:
        raise InvalidShape("shape lies entirely outside the frame")


@dataclass
class ViewerSession:
    """Mutable per-episode viewer: viewport plus the segmentation store."""

    store: pacs.Store
    viewport: ViewportState
    segmentations: list[Segmentation] = field(default_factory=list)
    _next_id: int = 1

    @classmethod
    def reset(cls, task, store: pacs.Store) -> "ViewerSession":
        return cls(store=store, viewport=initial_viewport(task, store))

    def navigate(self, command: Command) -> ViewportState:
        self.viewport = apply_navigation(self.viewport, command, self.store)
        return self.viewport

    def add_segmentation(self, label: str, slice_index: int, shape: Shape) -> int:
        series = self.store.series(self.viewport.series_uid)
        if not 0 <= slice_index < self.viewport.total_images:
            raise SliceOutOfRange(slice_index, self.viewport.total_images)
        validate_shape(shape, (series.rows, series.columns))
        seg = Segmentation(
            id=self._next_id, label=label, slice_index=slice_index, shape=shape
        )
        self.segmentations.append(seg)
        self._next_id += 1
        return seg.id

    def list_segmentations(self) -> list[dict]:
        return [seg.summary() for seg in self.segmentations]

    def snapshot(self) -> dict:
        return self.viewport.snapshot()
