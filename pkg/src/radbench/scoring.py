"""Planning, Execution, and Outcome scorers and the composite report.

Composite: S = 0.20*P + 0.30*E + 0.50*O, all components in [0, 1].

Planning compares tool-name multisets (order ignored) with a redundancy
penalty of 0.05 per call beyond the reference length, capped at 0.30.
Execution is a weighted sum of tool-call accuracy, parameter quality,
turn efficiency, and error recovery.  Outcome dispatches to a
task-type-specific scorer.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    EmptyMask,
    EmptyReference,
    EmptyTruth,
    MalformedReport,
    MissingScorecard,
    UnknownTaskType,
)
from .imaging import PIPELINES
from .phantom import GroundTruth
from .tasks import TaskSpec
from .tools import TASK_TYPES
from .trajectory import Trajectory

WEIGHT_P = 0.20
WEIGHT_E = 0.30
WEIGHT_O = 0.50

EXECUTION_WEIGHTS = {"A_tool": 0.40, "Q_param": 0.20, "E_turn": 0.25, "R_err": 0.15}

REDUNDANCY_PENALTY = 0.05
REDUNDANCY_CAP = 0.30

BIRADS_WEIGHTS = {
    "laterality": 0.25,
    "birads_category": 0.30,
    "lesion_count": 0.20,
    "enhancement_present": 0.15,
    "lesion_quadrant": 0.10,
}

POINT_FULL_CREDIT_PX = 20.0
POINT_ZERO_PX = 40.0
FALSE_POSITIVE_PENALTY = 0.1
HIT_THRESHOLD = 0.5

#: CT window presets are incompatible with MR series and vice versa
_CT_ONLY_PIPELINES = {"lung_window", "soft_tissue_window"}
_MR_ONLY_PIPELINES = {"breast_mri"}


def composite(p: float, e: float, o: float) -> float:
    return WEIGHT_P * p + WEIGHT_E * e + WEIGHT_O * o


@dataclass
class ScoreCard:
    task_id: str
    task_type: str
    tier: str
    planning: float
    execution: float
    outcome: float
    composite: float
    execution_breakdown: dict = field(default_factory=dict)
    outcome_detail: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# planning


def planning_score(t_ref: list[str], t_agent: list[str]) -> tuple[float, dict]:
    """Multiset F1 minus the capped redundancy penalty, floored at 0."""
    if not t_ref:
        raise EmptyReference("reference trajectory is empty")
    ref = Counter(t_ref)
    agent = Counter(t_agent)
    tp = sum(min(ref[t], agent[t]) for t in ref)
    detail: dict = {"tp": tp, "ref_len": len(t_ref), "agent_len": len(t_agent)}
    if not t_agent:
        detail.update(f1=0.0, penalty=0.0)
        return 0.0, detail
    precision = tp / len(t_agent)
    recall = tp / len(t_ref)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    penalty = min(
        REDUNDANCY_CAP, REDUNDANCY_PENALTY * max(0, len(t_agent) - len(t_ref))
    )
    detail.update(f1=f1, penalty=penalty, precision=precision, recall=recall)
    return max(0.0, f1 - penalty), detail


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class ParamContext:
    """Archive facts the parameter rubric checks arguments against."""

    initial_series_uid: str
    series_counts: dict[str, int]
    series_modalities: dict[str, str]
    study_uids: frozenset[str]
    frame_shape: tuple[int, int]

    @classmethod
    def from_task(cls, task: TaskSpec, truth: GroundTruth) -> "ParamContext":
        counts: dict[str, int] = {}
        modalities: dict[str, str] = {}
        for study_uid, entry in truth.structure.items():
            for series in entry["series"]:
                counts[series["series_uid"]] = series["instance_count"]
                modalities[series["series_uid"]] = series["modality"]
        return cls(
            initial_series_uid=task.initial_series_uid,
            series_counts=counts,
            series_modalities=modalities,
            study_uids=frozenset(truth.structure),
            frame_shape=truth.frame_shape,
        )


def _points_in_frame(points, frame_shape: tuple[int, int]) -> bool:
    rows, cols = frame_shape
    return all(0 <= p[0] <= cols and 0 <= p[1] <= rows for p in points)


def _param_ok(name: str, args: dict, active_series: str, ctx: ParamContext) -> bool:
    counts = ctx.series_counts
    if name == "set_viewport_slice":
        return 0 <= args["slice_index"] < counts.get(active_series, 0)
    if name == "set_window_level":
        return args["window_width"] > 0
    if name == "set_zoom":
        return args["scale"] > 0
    if name in ("select_series", "get_series_metadata", "query_pathology_model",
                "query_birads_model"):
        if args["series_uid"] not in counts:
            return False
        if "slice_index" in args:
            return 0 <= args["slice_index"] < counts[args["series_uid"]]
        return True
    if name in ("get_study_metadata", "get_study_series"):
        return args["study_uid"] in ctx.study_uids
    if name == "get_instance_metadata":
        return args["study_uid"] in ctx.study_uids and args["series_uid"] in counts
    if name == "get_dicom_image":
        if args["study_uid"] not in ctx.study_uids or args["series_uid"] not in counts:
            return False
        if not 0 <= args["slice_index"] < counts[args["series_uid"]]:
            return False
        pipeline = args["preprocessor"]
        if pipeline not in PIPELINES:
            return False
        modality = ctx.series_modalities.get(args["series_uid"], "")
        if modality == "MR" and pipeline in _CT_ONLY_PIPELINES:
            return False
        if modality != "MR" and pipeline in _MR_ONLY_PIPELINES:
            return False
        return True
    if name == "add_circle_segmentation":
        return args["radius"] > 0 and _points_in_frame([args["center"]], ctx.frame_shape)
    if name == "add_rectangle_segmentation":
        tl, br = args["top_left"], args["bottom_right"]
        return tl[0] < br[0] and tl[1] < br[1]
    if name == "add_polygon_segmentation":
        return len(args["points"]) >= 3 and _points_in_frame(
            args["points"], ctx.frame_shape
        )
    if name == "submit_longitudinal_finding":
        return 0 <= args["slice_index"] < max(counts.values(), default=0)
    return True


def execution_score(
    trajectory: Trajectory, t_ref: list[str], ctx: ParamContext | None = None
) -> tuple[float, dict]:
    """Weighted sum of the four execution components.

    Zero-call episodes take A_tool = Q_param = 0 and R_err = 1 (nothing
    succeeded, but there was no error to recover from).
    """
    calls = trajectory.calls
    n_turns = max(1, len(trajectory.turns))

    if calls:
        a_tool = sum(1 for c in calls if c.success) / len(calls)
    else:
        a_tool = 0.0

    if not calls:
        q_param = 0.0
    else:
        scores = []
        active = ctx.initial_series_uid if ctx else ""
        for call in calls:
            if ctx is not None and isinstance(call.args, dict) and call.args:
                try:
                    scores.append(1.0 if _param_ok(call.name, call.args, active, ctx) else 0.0)
                except (KeyError, TypeError, IndexError):
                    scores.append(0.0)
            if call.name == "select_series" and call.success:
                active = call.args.get("series_uid", active)
        q_param = sum(scores) / len(scores) if scores else 1.0

    e_turn = min(1.0, len(t_ref) / max(1, n_turns))

    failed = [i for i, c in enumerate(calls) if not c.success]
    if not failed:
        r_err = 1.0
    else:
        recovered = 0
        for i in failed:
            if i + 1 >= len(calls):
                continue
            nxt = calls[i + 1]
            if nxt.success or (nxt.name, nxt.args) != (calls[i].name, calls[i].args):
                recovered += 1
        r_err = recovered / len(failed)

    breakdown = {"A_tool": a_tool, "Q_param": q_param, "E_turn": e_turn, "R_err": r_err}
    e = sum(EXECUTION_WEIGHTS[k] * v for k, v in breakdown.items())
    return e, breakdown


# ---------------------------------------------------------------------------
# outcome scorers


def state_diff_score(final_viewport: dict, expected: dict) -> float:
    """Matched fields / expected fields on the final viewport state."""
    if not expected:
        raise EmptyTruth("no expected viewport fields")
    key_map = {
        "slice_index": "sliceIndex",
        "window_width": "windowWidth",
        "window_center": "windowCenter",
        "zoom": "zoom",
        "series_uid": "seriesInstanceUID",
    }
    matched = 0
    for field_name, want in expected.items():
        got = (final_viewport or {}).get(key_map.get(field_name, field_name))
        if got is None:
            continue
        if field_name == "zoom":
            ok = math.isclose(float(got), float(want), rel_tol=1e-6)
        elif isinstance(want, str):
            ok = got == want
        else:
            ok = float(got) == float(want)
        matched += 1 if ok else 0
    return matched / len(expected)


def normalize_answer(text: str) -> str:
    return " ".join(str(text).split()).lower()


def exact_match_score(submitted: str, expected: str) -> int:
    """Case- and whitespace-normalized string equality."""
    return int(normalize_answer(submitted) == normalize_answer(expected))


def _rasterize_shape(shape: dict, frame_shape: tuple[int, int]) -> np.ndarray:
    kind = shape["type"]
    if kind == "circle":
        return geometry.rasterize_circle(shape["center"], shape["radius"], frame_shape)
    if kind == "rectangle":
        return geometry.rasterize_rectangle(
            shape["top_left"], shape["bottom_right"], frame_shape
        )
    return geometry.rasterize_polygon(shape["points"], frame_shape)


def best_fit_circle_iou(mask: np.ndarray) -> float:
    """IoU of the area-matched circle centered on the mask centroid."""
    area = geometry.mask_area(mask)
    radius = math.sqrt(area / math.pi)
    circle = geometry.rasterize_circle(geometry.mask_centroid(mask), radius, mask.shape)
    return geometry.mask_iou(circle, mask)


def best_fit_box_iou(mask: np.ndarray) -> float:
    """IoU of the tighter of the axis-aligned and minimum rotated boxes.

    Boxes bound the pixel region (unit squares), not just the centers.
    """
    ys, xs = np.nonzero(mask)
    aabb = geometry.rasterize_rectangle(
        (xs.min() - 0.5, ys.min() - 0.5),
        (xs.max() + 0.5, ys.max() + 0.5),
        mask.shape,
    )
    iou_aabb = geometry.mask_iou(aabb, mask)
    corners = geometry.min_rotated_rectangle(geometry.mask_corner_points(mask))
    rotated = geometry.rasterize_polygon(corners, mask.shape)
    iou_rot = geometry.mask_iou(rotated, mask)
    return max(iou_aabb, iou_rot)


def _slice_normalizer(shapes: list[dict], mask: np.ndarray) -> float:
    """Best achievable IoU for the shape classes present on this slice.

    Polygons can trace the mask exactly, so any polygon fixes the
    normalizer at 1.
    """
    kinds = {s["type"] for s in shapes}
    if "polygon" in kinds:
        return 1.0
    candidates = []
    if "circle" in kinds:
        candidates.append(best_fit_circle_iou(mask))
    if "rectangle" in kinds:
        candidates.append(best_fit_box_iou(mask))
    return max(candidates) if candidates else 1.0


def normalized_iou_score(
    segmentations: list[dict], slice_masks: dict[int, np.ndarray]
) -> tuple[float, dict]:
    """Mean over ground-truth slices of clamp(raw IoU / normalizer, 0, 1).

    Slices with no annotation contribute 0; the hit flag marks a mean
    normalized IoU of at least 0.5.
    """
    if not slice_masks or not any(m.any() for m in slice_masks.values()):
        raise EmptyMask("consensus mask is empty")
    per_slice = []
    for z in sorted(slice_masks):
        mask = slice_masks[z]
        if not mask.any():
            continue
        shapes = [s["shape"] for s in segmentations if s["slice_index"] == z]
        if not shapes:
            per_slice.append({"slice": z, "raw_iou": 0.0, "normalized": 0.0})
            continue
        raster = np.zeros(mask.shape, dtype=bool)
        for shape in shapes:
            raster |= _rasterize_shape(shape, mask.shape)
        raw = geometry.mask_iou(raster, mask)
        normalizer = _slice_normalizer(shapes, mask)
        normalized = min(1.0, max(0.0, raw / normalizer)) if normalizer > 0 else 0.0
        per_slice.append(
            {"slice": z, "raw_iou": raw, "normalizer": normalizer, "normalized": normalized}
        )
    score = sum(s["normalized"] for s in per_slice) / len(per_slice)
    return score, {"per_slice": per_slice, "hit": score >= HIT_THRESHOLD}


def point_distance_score(submitted: dict, truth: dict) -> float:
    """1 inside 20 px, linear falloff to 0 at 40 px, 0 on the wrong slice."""
    if int(submitted["slice_index"]) != int(truth["slice_index"]):
        return 0.0
    d = math.hypot(submitted["x"] - truth["x"], submitted["y"] - truth["y"])
    if d <= POINT_FULL_CREDIT_PX:
        return 1.0
    if d >= POINT_ZERO_PX:
        return 0.0
    return (POINT_ZERO_PX - d) / (POINT_ZERO_PX - POINT_FULL_CREDIT_PX)


def multi_finding_score(
    submitted: list[dict], truths: list[dict]
) -> tuple[float, dict]:
    """Detection rate minus 0.1 per false positive, clamped to [0, 1].

    Greedy nearest-first one-to-one matching; a pair matches iff it names
    the right slice and lies within 40 px.
    """
    if not truths:
        raise EmptyTruth("no ground-truth findings")
    pairs = []
    for si, sub in enumerate(submitted):
        for ti, truth in enumerate(truths):
            if int(sub["slice_index"]) != int(truth["slice_index"]):
                continue
            d = math.hypot(sub["x"] - truth["x"], sub["y"] - truth["y"])
            if d <= POINT_ZERO_PX:
                pairs.append((d, si, ti))
    pairs.sort()
    used_sub: set[int] = set()
    used_truth: set[int] = set()
    matches = []
    for d, si, ti in pairs:
        if si in used_sub or ti in used_truth:
            continue
        used_sub.add(si)
        used_truth.add(ti)
        matches.append({"submission": si, "truth": ti, "distance": d})
    rate = len(matches) / len(truths)
    false_positives = len(submitted) - len(matches)
    score = min(1.0, max(0.0, rate - FALSE_POSITIVE_PENALTY * false_positives))
    return score, {
        "detection_rate": rate,
        "false_positives": false_positives,
        "matches": matches,
    }


def birads_report_score(report: dict, truth: dict) -> tuple[float, dict]:
    """Weighted per-field agreement; quadrant drops out of the denominator
    when the reference record has none."""
    if not isinstance(report, dict) or "laterality" not in report:
        raise MalformedReport("report missing required fields")

    def ordinal(submitted, expected) -> float:
        try:
            delta = abs(int(submitted) - int(expected))
        except (TypeError, ValueError):
            return 0.0
        if delta == 0:
            return 1.0
        return 0.5 if delta == 1 else 0.0

    fields: dict[str, float] = {}
    fields["laterality"] = float(
        str(report.get("laterality", "")).lower() == str(truth["laterality"]).lower()
    )
    fields["birads_category"] = ordinal(
        report.get("birads_category"), truth["birads_category"]
    )
    fields["lesion_count"] = ordinal(report.get("lesion_count"), truth["lesion_count"])
    fields["enhancement_present"] = float(
        bool(report.get("enhancement_present")) == bool(truth["enhancement_present"])
    )
    if truth.get("quadrant") is not None:
        submitted_quadrant = None
        for finding in report.get("findings") or []:
            if finding.get("location_quadrant"):
                submitted_quadrant = finding["location_quadrant"]
                break
        fields["lesion_quadrant"] = float(
            submitted_quadrant is not None
            and str(submitted_quadrant).lower() == str(truth["quadrant"]).lower()
        )
    total_weight = sum(BIRADS_WEIGHTS[name] for name in fields)
    score = sum(BIRADS_WEIGHTS[name] * value for name, value in fields.items())
    return score / total_weight, {"fields": fields}


def outcome_score(
    task: TaskSpec, trajectory: Trajectory, truth: GroundTruth | None = None
) -> tuple[float, dict]:
    """Dispatch to the task type's scorer.

    Deliverable-based scorers return 0 when the episode ended without the
    relevant submission; the viewer-state and segmentation scorers read
    the frozen final snapshot regardless of termination reason.
    """
    task_type = task.task_type
    expected = task.expected_outcome
    deliverable = trajectory.deliverable
    if task_type == "viewer_control":
        score = state_diff_score(trajectory.final_viewport or {}, expected)
        return score, {"expected": expected}
    if task_type in ("metadata_qa", "vision_probe"):
        if not deliverable or "answer" not in deliverable:
            return 0.0, {"reason": "no submission"}
        score = float(exact_match_score(deliverable["answer"], expected["answer"]))
        return score, {"submitted": deliverable["answer"], "expected": expected["answer"]}
    if task_type in ("annotation", "oracle_annotation"):
        slice_masks: dict[int, np.ndarray] = {}
        frame_shape = tuple(expected["frame_shape"])
        for target in expected["targets"]:
            for z in target["slices"]:
                mask = geometry.sphere_slice_mask(
                    tuple(target["center"]), target["radius"], z, frame_shape
                )
                slice_masks[z] = slice_masks.get(z, np.zeros(frame_shape, bool)) | mask
        if not trajectory.segmentations:
            return 0.0, {"reason": "no segmentations"}
        return normalized_iou_score(trajectory.segmentations, slice_masks)
    if task_type == "longitudinal":
        truths = expected["findings"]
        if not deliverable or "longitudinal_findings" not in deliverable:
            return 0.0, {"reason": "no submission"}
        submitted = [
            {
                "slice_index": f["slice_index"],
                "x": f["location"][0],
                "y": f["location"][1],
            }
            for f in deliverable["longitudinal_findings"]
            if f.get("finding_type") == "new_lesion"
        ]
        if len(truths) == 1:
            if not submitted:
                return 0.0, {"reason": "no findings submitted"}
            score = point_distance_score(submitted[0], truths[0])
            return score, {"submitted": submitted[0], "truth": truths[0]}
        return multi_finding_score(submitted, truths)
    if task_type in ("birads_report", "oracle_birads_report"):
        if not deliverable or "birads_report" not in deliverable:
            return 0.0, {"reason": "no submission"}
        return birads_report_score(deliverable["birads_report"], expected["report"])
    raise UnknownTaskType(f"unknown task type {task_type!r}")


# ---------------------------------------------------------------------------
# per-task scorecard and suite report


def score_trajectory(
    task: TaskSpec, trajectory: Trajectory, truth: GroundTruth | None = None
) -> ScoreCard:
    p, _ = planning_score(task.reference_trajectory, trajectory.tool_names)
    ctx = ParamContext.from_task(task, truth) if truth is not None else None
    e, breakdown = execution_score(trajectory, task.reference_trajectory, ctx)
    o, detail = outcome_score(task, trajectory, truth)
    return ScoreCard(
        task_id=task.task_id,
        task_type=task.task_type,
        tier=task.tier,
        planning=p,
        execution=e,
        outcome=o,
        composite=composite(p, e, o),
        execution_breakdown=breakdown,
        outcome_detail=detail,
    )


def scores_csv(cards: list[ScoreCard]) -> str:
    header = "task_id,type,tier,P,E,O,S,A_tool,Q_param,E_turn,R_err"
    lines = [header]
    for card in cards:
        b = card.execution_breakdown
        lines.append(
            ",".join(
                [
                    card.task_id,
                    card.task_type,
                    card.tier,
                    f"{card.planning:.6f}",
                    f"{card.execution:.6f}",
                    f"{card.outcome:.6f}",
                    f"{card.composite:.6f}",
                    f"{b.get('A_tool', 0.0):.6f}",
                    f"{b.get('Q_param', 0.0):.6f}",
                    f"{b.get('E_turn', 0.0):.6f}",
                    f"{b.get('R_err', 0.0):.6f}",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _aggregate(cards: list[ScoreCard]) -> dict:
    return {
        "n": len(cards),
        "P": _mean([c.planning for c in cards]),
        "E": _mean([c.execution for c in cards]),
        "O": _mean([c.outcome for c in cards]),
        "S": _mean([c.composite for c in cards]),
    }


def composite_and_report(
    cards: list[ScoreCard], tasks: list[TaskSpec]
) -> tuple[str, str]:
    """Per-tier and per-type aggregate tables plus the per-task CSV.

    Every task must have exactly one scorecard; the overall row is the
    n-weighted average across all task types.
    """
    by_id = {c.task_id: c for c in cards}
    missing = [t.task_id for t in tasks if t.task_id not in by_id]
    if missing:
        raise MissingScorecard(f"missing scorecards for {missing}")
    ordered = [by_id[t.task_id] for t in tasks]

    lines = ["tier        n     P      E      O      S"]
    for tier in ("easy", "medium", "hard"):
        agg = _aggregate([c for c in ordered if c.tier == tier])
        lines.append(
            f"{tier:<10} {agg['n']:>3}  {agg['P']:.3f}  {agg['E']:.3f}"
            f"  {agg['O']:.3f}  {agg['S']:.3f}"
        )
    overall = _aggregate(ordered)
    lines.append(
        f"{'overall':<10} {overall['n']:>3}  {overall['P']:.3f}  {overall['E']:.3f}"
        f"  {overall['O']:.3f}  {overall['S']:.3f}"
    )
    lines.append("")
    lines.append("task type              n     P      E      O      S")
    for task_type in TASK_TYPES:
        rows = [c for c in ordered if c.task_type == task_type]
        if not rows:
            continue
        agg = _aggregate(rows)
        lines.append(
            f"{task_type:<21} {agg['n']:>3}  {agg['P']:.3f}  {agg['E']:.3f}"
            f"  {agg['O']:.3f}  {agg['S']:.3f}"
        )
    report = "\n".join(lines) + "\n"
    return scores_csv(ordered), report
