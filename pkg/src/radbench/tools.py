"""The 21-tool function-calling surface: schemas, visibility, dispatch.

Tool names, terminal semantics, and the per-task-type visibility matrix
are part of the external contract; the golden-table test pins them.
Failures cross the bridge as structured results, never exceptions, and a
failed call leaves episode state untouched.
"""

from __future__ import annotations

import base64
import random
from dataclasses import dataclass

import jsonschema

from . import imaging, pacs
from .environment import lesion_slice_mask, representative_slice
from .episode import Episode
from .errors import (
    NoFindingOnSlice,
    RadBenchError,
    SchemaValidationError,
    ToolNotVisible,
    UnknownTaskType,
    UnknownUID,
)
from .geometry import mask_contour_polygon
from .viewer import Circle, Polygon, Rectangle, SelectSeries, SetSlice, SetWindowLevel, SetZoom

TASK_TYPES = (
    "viewer_control",
    "metadata_qa",
    "vision_probe",
    "annotation",
    "oracle_annotation",
    "oracle_birads_report",
    "longitudinal",
    "birads_report",
)

TERMINAL_TOOLS = frozenset(
    {"submit_answer", "submit_birads_report", "submit_longitudinal_complete"}
)

_POINT = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict
    terminal: bool = False

    def function_schema(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


def _params(properties: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
    }


_SCHEMA_LIST = [
    ToolSchema(
        "get_study_metadata",
        "Study-level tags (StudyDate, PatientID, PatientName, Modality, "
        "StudyDescription) plus a summary list of series.",
        _params({"study_uid": {"type": "string"}}, ["study_uid"]),
    ),
    ToolSchema(
        "get_study_series",
        "Series list for a study with up to three sample instance UIDs per "
        "series.",
        _params({"study_uid": {"type": "string"}}, ["study_uid"]),
    ),
    ToolSchema(
        "get_series_metadata",
        "Geometry for one series: SliceThickness, PixelSpacing, "
        "ImageOrientationPatient, Rows, Columns.",
        _params({"series_uid": {"type": "string"}}, ["series_uid"]),
    ),
    ToolSchema(
        "get_instance_metadata",
        "Full supported tag set for a single SOP instance, including "
        "windowing defaults and rescale parameters.",
        _params(
            {
                "study_uid": {"type": "string"},
                "series_uid": {"type": "string"},
                "sop_uid": {"type": "string"},
            },
            ["study_uid", "series_uid", "sop_uid"],
        ),
    ),
    ToolSchema(
        "get_viewport_state",
        "Current viewport: slice index, total image count, window "
        "width/center, zoom, active series, loaded display sets.",
        _params({}, []),
    ),
    ToolSchema(
        "list_segmentations",
        "All segmentations currently loaded in the viewer, with identifiers, "
        "labels, and per-segment details.",
        _params({}, []),
    ),
    ToolSchema(
        "get_viewer_screenshot",
        "Screenshot of the viewer as a base64 PNG, including overlays and a "
        "viewer-state banner.",
        _params({}, []),
    ),
    ToolSchema(
        "get_dicom_image",
        "Route one slice through a named preprocessing pipeline and return a "
        "base64 PNG whose pixel coordinates match the segmentation actions.",
        _params(
            {
                "study_uid": {"type": "string"},
                "series_uid": {"type": "string"},
                "slice_index": {"type": "integer"},
                "preprocessor": {"type": "string", "enum": list(imaging.PIPELINES)},
            },
            ["study_uid", "series_uid", "slice_index", "preprocessor"],
        ),
    ),
    ToolSchema(
        "query_pathology_model",
        "Simulated nodule detector. Without slice_index: overview of all "
        "findings. With slice_index: the polygon contour on that slice in "
        "pixel coordinates, directly compatible with "
        "add_polygon_segmentation.",
        _params(
            {
                "series_uid": {"type": "string"},
                "slice_index": {"type": "integer"},
            },
            ["series_uid"],
        ),
    ),
    ToolSchema(
        "query_birads_model",
        "Simulated breast-MRI CAD model: laterality, lesion count, BI-RADS "
        "assessment category, enhancement status, per-lesion quadrant when "
        "available.",
        _params({"series_uid": {"type": "string"}}, ["series_uid"]),
    ),
    ToolSchema(
        "set_viewport_slice",
        "Navigate to a 0-based slice index in the active series.",
        _params({"slice_index": {"type": "integer"}}, ["slice_index"]),
    ),
    ToolSchema(
        "set_window_level",
        "Set the display window width and center.",
        _params(
            {
                "window_width": {"type": "number"},
                "window_center": {"type": "number"},
            },
            ["window_width", "window_center"],
        ),
    ),
    ToolSchema(
        "set_zoom",
        "Set the viewport zoom factor; smaller values zoom in.",
        _params({"scale": {"type": "number"}}, ["scale"]),
    ),
    ToolSchema(
        "select_series",
        "Switch the active viewport to a different loaded series.",
        _params({"series_uid": {"type": "string"}}, ["series_uid"]),
    ),
    ToolSchema(
        "add_circle_segmentation",
        "Place a circle annotation in pixel coordinates.",
        _params(
            {
                "label": {"type": "string"},
                "slice_index": {"type": "integer"},
                "center": _POINT,
                "radius": {"type": "number"},
            },
            ["label", "slice_index", "center", "radius"],
        ),
    ),
    ToolSchema(
        "add_rectangle_segmentation",
        "Place an axis-aligned bounding box in pixel coordinates.",
        _params(
            {
                "label": {"type": "string"},
                "slice_index": {"type": "integer"},
                "top_left": _POINT,
                "bottom_right": _POINT,
            },
            ["label", "slice_index", "top_left", "bottom_right"],
        ),
    ),
    ToolSchema(
        "add_polygon_segmentation",
        "Place an arbitrary polygon, points given as [[x1, y1], ...].",
        _params(
            {
                "label": {"type": "string"},
                "slice_index": {"type": "integer"},
                "points": {"type": "array", "items": _POINT, "minItems": 3},
            },
            ["label", "slice_index", "points"],
        ),
    ),
    ToolSchema(
        "submit_answer",
        "Submit a free-text answer. Terminal: ends the episode.",
        _params({"answer": {"type": "string"}}, ["answer"]),
        terminal=True,
    ),
    ToolSchema(
        "submit_birads_report",
        "Submit a structured breast-MRI report. Terminal: ends the episode.",
        _params(
            {
                "laterality": {
                    "type": "string",
                    "enum": ["left", "right", "bilateral"],
                },
                "lesion_count": {"type": "integer", "minimum": 0},
                "birads_category": {"type": "integer", "minimum": 0, "maximum": 6},
                "enhancement_present": {"type": "boolean"},
                "findings": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "location_quadrant": {"type": "string"},
                            "type": {
                                "type": "string",
                                "enum": ["mass", "non_mass", "focus"],
                            },
                            "size_mm": {"type": "number"},
                            "shape": {"type": "string"},
                            "margin": {"type": "string"},
                            "enhancement": {"type": "string"},
                        },
                        "additionalProperties": False,
                    },
                },
                "recommendation": {"type": "string"},
            },
            [
                "laterality",
                "lesion_count",
                "birads_category",
                "enhancement_present",
            ],
        ),
        terminal=True,
    ),
    ToolSchema(
        "submit_longitudinal_finding",
        "Log one longitudinal finding in follow-up pixel coordinates. Not "
        "terminal; call once per finding.",
        _params(
            {
                "finding_type": {
                    "type": "string",
                    "enum": ["new_lesion", "size_change", "no_change"],
                },
                "slice_index": {"type": "integer"},
                "location": _POINT,
                "description": {"type": "string"},
            },
            ["finding_type", "slice_index", "location"],
        ),
    ),
    ToolSchema(
        "submit_longitudinal_complete",
        "Terminate a longitudinal comparison after all findings are "
        "submitted. Terminal: ends the episode.",
        _params({"summary": {"type": "string"}}, []),
        terminal=True,
    ),
]

SCHEMAS: dict[str, ToolSchema] = {ts.name: ts for ts in _SCHEMA_LIST}
TOOL_NAMES = tuple(ts.name for ts in _SCHEMA_LIST)

_NAV = ("set_viewport_slice", "set_window_level", "set_zoom", "select_series")
_METADATA = (
    "get_study_metadata",
    "get_study_series",
    "get_series_metadata",
    "get_instance_metadata",
)
_PIXEL = ("get_dicom_image", "get_viewer_screenshot")
_SEG_PRIMITIVES = ("add_circle_segmentation", "add_rectangle_segmentation")

VISIBILITY: dict[str, frozenset[str]] = {
    "viewer_control": frozenset(_NAV + ("get_viewport_state",)),
    "metadata_qa": frozenset(
        _NAV + ("get_viewport_state",) + _METADATA + ("submit_answer",)
    ),
    "vision_probe": frozenset({"submit_answer"}),
    "annotation": frozenset(
        _NAV
        + ("get_viewport_state",)
        + _METADATA
        + _PIXEL
        + _SEG_PRIMITIVES
        + ("add_polygon_segmentation", "list_segmentations", "submit_answer")
    ),
    "oracle_annotation": frozenset(
        _NAV
        + ("get_viewport_state",)
        + _METADATA
        + (
            "query_pathology_model",
            "add_polygon_segmentation",
            "list_segmentations",
            "submit_answer",
        )
    ),
    "oracle_birads_report": frozenset(
        _NAV
        + ("get_viewport_state",)
        + _METADATA
        + ("query_birads_model", "submit_answer", "submit_birads_report")
    ),
    "longitudinal": frozenset(
        _NAV
        + ("get_viewport_state",)
        + _METADATA
        + _PIXEL
        + _SEG_PRIMITIVES
        + (
            "add_polygon_segmentation",
            "list_segmentations",
            "submit_answer",
            "submit_longitudinal_finding",
            "submit_longitudinal_complete",
        )
    ),
    "birads_report": frozenset(
        _NAV
        + ("get_viewport_state",)
        + _METADATA
        + _PIXEL
        + _SEG_PRIMITIVES
        + (
            "add_polygon_segmentation",
            "list_segmentations",
            "submit_answer",
            "submit_birads_report",
        )
    ),
}


def visible_schemas(task_type: str) -> list[ToolSchema]:
    """Schemas for one task type, in canonical tool order."""
    if task_type not in VISIBILITY:
        raise UnknownTaskType(f"unknown task type {task_type!r}")
    allowed = VISIBILITY[task_type]
    return [ts for ts in _SCHEMA_LIST if ts.name in allowed]


@dataclass(frozen=True)
class ToolResult:
    success: bool
    payload: dict | None = None
    error: dict | None = None

    def to_dict(self) -> dict:
        if self.success:
            return {"success": True, "payload": self.payload}
        return {"success": False, "error": self.error}


def _failure(exc: RadBenchError) -> ToolResult:
    return ToolResult(success=False, error={"code": exc.code, "message": str(exc)})


def dispatch(episode: Episode, name: str, args) -> ToolResult:
    """Validate and route one tool call.

    Unknown or invisible tools and schema-invalid arguments come back as
    failed results (they count as failed calls for scoring); domain
    errors raised by the owning module are converted the same way.
    """
    visible = VISIBILITY.get(episode.task.tool_set, frozenset())
    if name not in SCHEMAS or name not in visible:
        return _failure(
            ToolNotVisible(f"tool {name!r} not available for this task")
        )
    if not isinstance(args, dict):
        return _failure(SchemaValidationError("arguments must be an object"))
    try:
        jsonschema.validate(args, SCHEMAS[name].parameters)
    except jsonschema.ValidationError as exc:
        return _failure(SchemaValidationError(exc.message))
    try:
        payload = _HANDLERS[name](episode, args)
    except RadBenchError as exc:
        return _failure(exc)
    return ToolResult(success=True, payload=payload)


# ---------------------------------------------------------------------------
# handlers


def _image_payload(png: bytes, width: int, height: int, **extra) -> dict:
    payload = {
        "image": base64.b64encode(png).decode("ascii"),
        "width": width,
        "height": height,
    }
    payload.update(extra)
    return payload


def _h_get_study_metadata(episode: Episode, args: dict) -> dict:
    return pacs.query_metadata(episode.env.store, "study", study_uid=args["study_uid"])


def _h_get_study_series(episode: Episode, args: dict) -> dict:
    return pacs.query_metadata(
        episode.env.store, "series-list", study_uid=args["study_uid"]
    )


def _h_get_series_metadata(episode: Episode, args: dict) -> dict:
    return pacs.query_metadata(
        episode.env.store, "series", series_uid=args["series_uid"]
    )


def _h_get_instance_metadata(episode: Episode, args: dict) -> dict:
    return pacs.query_metadata(
        episode.env.store,
        "instance",
        study_uid=args["study_uid"],
        series_uid=args["series_uid"],
        sop_uid=args["sop_uid"],
    )


def _h_get_viewport_state(episode: Episode, args: dict) -> dict:
    return episode.viewer.snapshot()


def _h_list_segmentations(episode: Episode, args: dict) -> dict:
    return {"segmentations": episode.viewer.list_segmentations()}


def _h_get_viewer_screenshot(episode: Episode, args: dict) -> dict:
    png = imaging.render_screenshot(
        episode.viewer.viewport, episode.viewer.segmentations, episode.env.store
    )
    series = episode.env.store.series(episode.viewer.viewport.series_uid)
    return _image_payload(png, series.columns, series.rows + imaging.BANNER_HEIGHT)


def _h_get_dicom_image(episode: Episode, args: dict) -> dict:
    store = episode.env.store
    series = store.series(args["series_uid"])
    if series.study_uid != args["study_uid"]:
        raise UnknownUID("study", args["study_uid"])
    png, (width, height) = imaging.preprocess_frame(
        store, args["series_uid"], args["slice_index"], args["preprocessor"]
    )
    return _image_payload(png, width, height, preprocessor=args["preprocessor"])


def _confidence(label: str) -> float:
    return round(random.Random(label).uniform(0.7, 0.99), 4)


def _h_query_pathology_model(episode: Episode, args: dict) -> dict:
    env = episode.env
    series = env.store.series(args["series_uid"])
    truth = env.truth_for_study(series.study_uid)
    frame_shape = truth.frame_shape
    lesions = [l for l in truth.lesions if l.series_uid == args["series_uid"]]
    if "slice_index" not in args:
        return {
            "findings": [
                {
                    "label": lesion.label,
                    "slice_range": [min(lesion.slices), max(lesion.slices)],
                    "confidence": _confidence(lesion.label),
                    "representative_slice": representative_slice(lesion, frame_shape),
                }
                for lesion in lesions
            ]
        }
    slice_index = args["slice_index"]
    for lesion in lesions:
        if slice_index not in lesion.slices:
            continue
        mask = lesion_slice_mask(lesion, slice_index, frame_shape)
        points = mask_contour_polygon(mask)
        if points:
            return {
                "label": lesion.label,
                "slice_index": slice_index,
                "points": points,
            }
    raise NoFindingOnSlice(f"no finding on slice {slice_index}")


def _h_query_birads_model(episode: Episode, args: dict) -> dict:
    env = episode.env
    series = env.store.series(args["series_uid"])
    truth = env.truth_for_study(series.study_uid)
    if truth.birads is None:
        raise UnknownUID("series", args["series_uid"])
    record = truth.birads
    payload: dict = {
        "laterality": record.laterality,
        "lesion_count": record.lesion_count,
        "birads_category": record.birads_category,
        "enhancement_present": record.enhancement_present,
    }
    if record.quadrant is not None:
        payload["findings"] = [{"location_quadrant": record.quadrant}]
    return payload


def _h_set_viewport_slice(episode: Episode, args: dict) -> dict:
    state = episode.viewer.navigate(SetSlice(args["slice_index"]))
    return {"viewport": state.snapshot()}


def _h_set_window_level(episode: Episode, args: dict) -> dict:
    state = episode.viewer.navigate(
        SetWindowLevel(args["window_width"], args["window_center"])
    )
    return {"viewport": state.snapshot()}


def _h_set_zoom(episode: Episode, args: dict) -> dict:
    state = episode.viewer.navigate(SetZoom(args["scale"]))
    return {"viewport": state.snapshot()}


def _h_select_series(episode: Episode, args: dict) -> dict:
    state = episode.viewer.navigate(SelectSeries(args["series_uid"]))
    return {"viewport": state.snapshot()}


def _h_add_circle(episode: Episode, args: dict) -> dict:
    seg_id = episode.viewer.add_segmentation(
        args["label"],
        args["slice_index"],
        Circle(center=tuple(args["center"]), radius=args["radius"]),
    )
    return {"segmentation_id": seg_id}


def _h_add_rectangle(episode: Episode, args: dict) -> dict:
    seg_id = episode.viewer.add_segmentation(
        args["label"],
        args["slice_index"],
        Rectangle(
            top_left=tuple(args["top_left"]),
            bottom_right=tuple(args["bottom_right"]),
        ),
    )
    return {"segmentation_id": seg_id}


def _h_add_polygon(episode: Episode, args: dict) -> dict:
    seg_id = episode.viewer.add_segmentation(
        args["label"],
        args["slice_index"],
        Polygon(points=tuple(tuple(p) for p in args["points"])),
    )
    return {"segmentation_id": seg_id}


def _h_submit_answer(episode: Episode, args: dict) -> dict:
    episode.submitted_answer = args["answer"]
    return {"submitted": True}


def _h_submit_birads_report(episode: Episode, args: dict) -> dict:
    episode.submitted_report = dict(args)
    return {"submitted": True}


def _h_submit_longitudinal_finding(episode: Episode, args: dict) -> dict:
    episode.longitudinal_findings.append(
        {
            "finding_type": args["finding_type"],
            "slice_index": args["slice_index"],
            "location": list(args["location"]),
            "description": args.get("description"),
        }
    )
    return {"recorded": len(episode.longitudinal_findings)}


def _h_submit_longitudinal_complete(episode: Episode, args: dict) -> dict:
    episode.longitudinal_complete = True
    episode.longitudinal_summary = args.get("summary")
    return {"submitted": True, "findings_count": len(episode.longitudinal_findings)}


_HANDLERS = {
    "get_study_metadata": _h_get_study_metadata,
    "get_study_series": _h_get_study_series,
    "get_series_metadata": _h_get_series_metadata,
    "get_instance_metadata": _h_get_instance_metadata,
    "get_viewport_state": _h_get_viewport_state,
    "list_segmentations": _h_list_segmentations,
    "get_viewer_screenshot": _h_get_viewer_screenshot,
    "get_dicom_image": _h_get_dicom_image,
    "query_pathology_model": _h_query_pathology_model,
    "query_birads_model": _h_query_birads_model,
    "set_viewport_slice": _h_set_viewport_slice,
    "set_window_level": _h_set_window_level,
    "set_zoom": _h_set_zoom,
    "select_series": _h_select_series,
    "add_circle_segmentation": _h_add_circle,
    "add_rectangle_segmentation": _h_add_rectangle,
    "add_polygon_segmentation": _h_add_polygon,
    "submit_answer": _h_submit_answer,
    "submit_birads_report": _h_submit_birads_report,
    "submit_longitudinal_finding": _h_submit_longitudinal_finding,
    "submit_longitudinal_complete": _h_submit_longitudinal_complete,
}
