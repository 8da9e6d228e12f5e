"""Scripted baseline agents: a ground-truth oracle and a random floor.

The oracle policy is a verification agent: it executes each task's
reference trajectory with ground-truth arguments (a test-only privilege)
and is expected to reach outcome 1.0 everywhere.  The random policy
samples schema-valid calls uniformly and submits a random deliverable,
estimating the floor of each scorer.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import geometry
from .environment import Environment
from .errors import UnknownSubtype
from .runner import AgentStep
from .tasks import TaskSpec, subtype_of
from .tools import TERMINAL_TOOLS, ToolSchema

LUNG_WINDOW_ARGS = {"window_width": 1500, "window_center": -600}
BONE_WINDOW_ARGS = {"window_width": 2500, "window_center": 480}


@dataclass
class ScriptedAgent:
    """Plays pre-computed batches of tool calls, then a closing text."""

    batches: list[list[tuple[str, dict]]]
    final_text: str = "Task complete."
    _cursor: int = 0
    usage: dict | None = None

    def step(self, messages: list[dict], schemas: list[ToolSchema]) -> AgentStep:
        if self._cursor < len(self.batches):
            batch = self.batches[self._cursor]
            self._cursor += 1
            return AgentStep(text=None, tool_calls=list(batch), usage=self.usage)
        return AgentStep(text=self.final_text, tool_calls=[], usage=self.usage)


def _best_fit_circle(center, radius, z, frame_shape) -> tuple[tuple[float, float], float]:
    mask = geometry.sphere_slice_mask(tuple(center), radius, z, frame_shape)
    area = geometry.mask_area(mask)
    return geometry.mask_centroid(mask), math.sqrt(area / math.pi)


def _contour_args(target: dict, z: int, frame_shape) -> dict:
    mask = geometry.sphere_slice_mask(
        tuple(target["center"]), target["radius"], z, frame_shape
    )
    return {
        "label": target["label"],
        "slice_index": z,
        "points": geometry.mask_contour_polygon(mask),
    }


def oracle_policy(task: TaskSpec, env: Environment) -> ScriptedAgent:
    """Follows the task's reference trajectory with ground-truth arguments."""
    subtype = subtype_of(task.task_id)
    expected = task.expected_outcome
    study_uid = task.study_uid
    series_uid = task.initial_series_uid
    batches: list[list[tuple[str, dict]]]

    if subtype == "t1_slice":
        batches = [[("set_viewport_slice", {"slice_index": expected["slice_index"]})]]
    elif subtype == "t1_wl":
        batches = [[(
            "set_window_level",
            {
                "window_width": expected["window_width"],
                "window_center": expected["window_center"],
            },
        )]]
    elif subtype == "t1_slice_wl":
        batches = [[
            ("set_viewport_slice", {"slice_index": expected["slice_index"]}),
            ("set_window_level", {
                "window_width": expected["window_width"],
                "window_center": expected["window_center"],
            }),
        ]]
    elif subtype == "t1_series":
        batches = [[
            ("get_viewport_state", {}),
            ("select_series", {"series_uid": expected["series_uid"]}),
        ]]
    elif subtype in ("t2_slices", "t2_modalities", "t2_ct_uid"):
        batches = [
            [("get_study_series", {"study_uid": study_uid})],
            [("submit_answer", {"answer": expected["answer"]})],
        ]
    elif subtype in ("t2_nseries", "t2_date"):
        batches = [
            [("get_study_metadata", {"study_uid": study_uid})],
            [("submit_answer", {"answer": expected["answer"]})],
        ]
    elif subtype == "t4_interval":
        batches = [
            [
                ("get_study_metadata", {"study_uid": study_uid}),
                ("get_study_metadata", {"study_uid": task.auxiliary_study_uids[0]}),
            ],
            [("submit_answer", {"answer": expected["answer"]})],
        ]
    elif subtype == "t4_slice_diff":
        batches = [
            [
                ("get_study_series", {"study_uid": study_uid}),
                ("get_study_series", {"study_uid": task.auxiliary_study_uids[0]}),
            ],
            [("submit_answer", {"answer": expected["answer"]})],
        ]
    elif subtype in ("vp_mod", "vp_pre"):
        batches = [[("submit_answer", {"answer": expected["answer"]})]]
    elif subtype in ("t3_nodule", "t3_find"):
        frame_shape = tuple(expected["frame_shape"])
        target = expected["targets"][0]
        slices = target["slices"]
        calls: list[tuple[str, dict]] = [
            ("get_study_series", {"study_uid": study_uid}),
            ("set_viewport_slice", {"slice_index": slices[0]}),
            ("set_window_level", dict(LUNG_WINDOW_ARGS)),
            ("get_dicom_image", {
                "study_uid": study_uid,
                "series_uid": series_uid,
                "slice_index": slices[0],
                "preprocessor": "lung_window",
            }),
            _circle_call(target, slices[0], frame_shape),
        ]
        for z in slices[1:]:
            calls.extend([
                ("set_viewport_slice", {"slice_index": z}),
                ("get_dicom_image", {
                    "study_uid": study_uid,
                    "series_uid": series_uid,
                    "slice_index": z,
                    "preprocessor": "lung_window",
                }),
                _circle_call(target, z, frame_shape),
            ])
        batches = [calls]
    elif subtype in ("t3_oracle_single", "t3_oracle_multi", "t3_oracle_volumetric"):
        frame_shape = tuple(expected["frame_shape"])
        calls = [
            ("get_study_series", {"study_uid": study_uid}),
            ("query_pathology_model", {"series_uid": series_uid}),
        ]
        if subtype == "t3_oracle_multi":
            work = [(t, t["slices"][0]) for t in expected["targets"]]
        else:
            target = expected["targets"][0]
            work = [(target, z) for z in target["slices"]]
        for target, z in work:
            calls.extend([
                ("query_pathology_model", {"series_uid": series_uid, "slice_index": z}),
                ("set_viewport_slice", {"slice_index": z}),
                ("add_polygon_segmentation", _contour_args(target, z, frame_shape)),
            ])
        batches = [calls]
    elif subtype == "t3_oracle_birads":
        batches = [
            [
                ("get_study_series", {"study_uid": study_uid}),
                ("query_birads_model", {"series_uid": series_uid}),
            ],
            [("submit_birads_report", _report_args(expected["report"]))],
        ]
    elif subtype in ("t4_lesion_single", "t4_lesion_multi"):
        followup_uid = task.auxiliary_study_uids[0]
        truth = env.truth_for_study(followup_uid)
        followup_series = next(
            s["series_uid"]
            for s in truth.structure[followup_uid]["series"]
            if s["modality"] == "CT"
        )
        scan_baseline = _scan_calls(study_uid, series_uid, range(5))
        scan_followup = _scan_calls(followup_uid, followup_series, range(5))
        calls = [
            ("get_study_series", {"study_uid": study_uid}),
            ("select_series", {"series_uid": series_uid}),
            ("set_window_level", dict(LUNG_WINDOW_ARGS)),
            *scan_baseline,
            ("select_series", {"series_uid": followup_series}),
            ("set_viewport_slice", {"slice_index": 0}),
            ("set_window_level", dict(LUNG_WINDOW_ARGS)),
            *scan_followup,
        ]
        finding_calls: list[tuple[str, dict]] = [
            (
                "submit_longitudinal_finding",
                {
                    "finding_type": "new_lesion",
                    "slice_index": f["slice_index"],
                    "location": [f["x"], f["y"]],
                },
            )
            for f in expected["findings"]
        ]
        batches = [calls, finding_calls + [("submit_longitudinal_complete", {})]]
    elif subtype == "t4_birads":
        truth = env.truth_for_study(study_uid)
        series = truth.structure[study_uid]["series"][:4]
        calls = [("get_study_series", {"study_uid": study_uid})]
        for entry in series:
            calls.append(("select_series", {"series_uid": entry["series_uid"]}))
            calls.extend(
                _scan_calls(
                    study_uid, entry["series_uid"], range(3), preprocessor="breast_mri"
                )
            )
        batches = [calls, [("submit_birads_report", _report_args(expected["report"]))]]
    else:
        raise UnknownSubtype(f"oracle policy has no plan for {subtype!r}")
    return ScriptedAgent(batches=batches)


def _circle_call(target: dict, z: int, frame_shape) -> tuple[str, dict]:
    center, radius = _best_fit_circle(target["center"], target["radius"], z, frame_shape)
    return (
        "add_circle_segmentation",
        {
            "label": target["label"],
            "slice_index": z,
            "center": [center[0], center[1]],
            "radius": radius,
        },
    )


def _scan_calls(
    study_uid: str, series_uid: str, slices, preprocessor: str = "lung_window"
) -> list[tuple[str, dict]]:
    calls = []
    for z in slices:
        calls.append(("set_viewport_slice", {"slice_index": z}))
        calls.append(
            (
                "get_dicom_image",
                {
                    "study_uid": study_uid,
                    "series_uid": series_uid,
                    "slice_index": z,
                    "preprocessor": preprocessor,
                },
            )
        )
    return calls


def _report_args(report: dict) -> dict:
    args = {
        "laterality": report["laterality"],
        "lesion_count": report["lesion_count"],
        "birads_category": report["birads_category"],
        "enhancement_present": report["enhancement_present"],
    }
    if report.get("quadrant") is not None:
        args["findings"] = [{"location_quadrant": report["quadrant"]}]
    return args


# ---------------------------------------------------------------------------
# random floor


@dataclass
class RandomAgent:
    """Uniform schema-valid calls; submits a random deliverable before the cap."""

    task: TaskSpec
    seed: int
    rng: random.Random = field(init=False)
    _turn: int = 0
    _submit_turn: int = field(init=False)

    def __post_init__(self) -> None:
        self.rng = random.Random(f"{self.seed}:{self.task.task_id}")
        self._submit_turn = self.rng.randrange(1, max(2, self.task.max_turns - 1))

    def _random_args(self, name: str) -> dict:
        rng = self.rng
        frame = 64
        if name == "set_viewport_slice":
            return {"slice_index": rng.randrange(0, 8)}
        if name == "set_window_level":
            return {
                "window_width": rng.uniform(1, 2000),
                "window_center": rng.uniform(-1000, 1000),
            }
        if name == "set_zoom":
            return {"scale": rng.uniform(0.25, 4.0)}
        if name == "select_series":
            return {"series_uid": self.task.initial_series_uid}
        if name in ("get_study_metadata", "get_study_series"):
            return {"study_uid": self.task.study_uid}
        if name == "get_series_metadata":
            return {"series_uid": self.task.initial_series_uid}
        if name == "get_instance_metadata":
            return {
                "study_uid": self.task.study_uid,
                "series_uid": self.task.initial_series_uid,
                "sop_uid": "unknown",
            }
        if name == "get_dicom_image":
            return {
                "study_uid": self.task.study_uid,
                "series_uid": self.task.initial_series_uid,
                "slice_index": rng.randrange(0, 8),
                "preprocessor": rng.choice(
                    ["default", "lung_window", "soft_tissue_window", "percentile_norm"]
                ),
            }
        if name in ("query_pathology_model", "query_birads_model"):
            return {"series_uid": self.task.initial_series_uid}
        if name == "add_circle_segmentation":
            return {
                "label": "roi",
                "slice_index": rng.randrange(0, 8),
                "center": [rng.uniform(4, frame - 4), rng.uniform(4, frame - 4)],
                "radius": rng.uniform(2, 10),
            }
        if name == "add_rectangle_segmentation":
            x = rng.uniform(0, frame - 12)
            y = rng.uniform(0, frame - 12)
            return {
                "label": "roi",
                "slice_index": rng.randrange(0, 8),
                "top_left": [x, y],
                "bottom_right": [x + rng.uniform(4, 12), y + rng.uniform(4, 12)],
            }
        if name == "add_polygon_segmentation":
            cx, cy = rng.uniform(8, frame - 8), rng.uniform(8, frame - 8)
            pts = []
            for k in range(3):
                angle = 2 * math.pi * (k / 3 + rng.uniform(0, 0.2))
                r = rng.uniform(3, 8)
                pts.append([cx + r * math.cos(angle), cy + r * math.sin(angle)])
            return {"label": "roi", "slice_index": rng.randrange(0, 8), "points": pts}
        if name == "submit_answer":
            return {"answer": rng.choice(["A", "B", "C", "D", "17", "CT"])}
        if name == "submit_birads_report":
            return {
                "laterality": rng.choice(["left", "right", "bilateral"]),
                "lesion_count": rng.randrange(0, 4),
                "birads_category": rng.randrange(0, 7),
                "enhancement_present": rng.choice([True, False]),
            }
        if name == "submit_longitudinal_finding":
            return {
                "finding_type": "new_lesion",
                "slice_index": self.rng.randrange(0, 8),
                "location": [rng.uniform(0, frame), rng.uniform(0, frame)],
            }
        if name == "submit_longitudinal_complete":
            return {}
        return {}

    def step(self, messages: list[dict], schemas: list[ToolSchema]) -> AgentStep:
        self._turn += 1
        names = [s.name for s in schemas]
        terminal = [n for n in names if n in TERMINAL_TOOLS]
        if self._turn >= self._submit_turn and terminal:
            name = self.rng.choice(terminal)
            return AgentStep(tool_calls=[(name, self._random_args(name))])
        regular = [n for n in names if n not in TERMINAL_TOOLS]
        if not regular:
            name = self.rng.choice(terminal)
            return AgentStep(tool_calls=[(name, self._random_args(name))])
        batch = []
        for _ in range(self.rng.randrange(1, 3)):
            name = self.rng.choice(regular)
            batch.append((name, self._random_args(name)))
        return AgentStep(tool_calls=batch)


def random_policy(task: TaskSpec, seed: int = 0) -> RandomAgent:
    return RandomAgent(task=task, seed=seed)


def never_submits_policy(task: TaskSpec) -> ScriptedAgent:
    """Calls get_viewport_state forever; exercises the turn cap."""
    batches = [[("get_viewport_state", {})] for _ in range(task.max_turns + 5)]
    return ScriptedAgent(batches=batches)
