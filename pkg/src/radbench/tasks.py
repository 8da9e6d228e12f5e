"""Task generation: templates, reference trajectories, prompts, suites.

Task description templates are fixed strings instantiated with study
metadata; the resulting text is written to the task YAML verbatim.  Every
task carries its ground-truth target and a reference tool-call trajectory
for the planning scorer, both computed at generation time so scoring
needs no archive access for outcomes.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .environment import Environment, representative_slice
from .errors import InsufficientArchive, UnboundPlaceholder, UnknownSubtype
from .phantom import GroundTruth
from .tools import TASK_TYPES

TIER_BY_TYPE = {
    "viewer_control": "easy",
    "metadata_qa": "easy",
    "vision_probe": "easy",
    "annotation": "medium",
    "oracle_annotation": "medium",
    "oracle_birads_report": "medium",
    "longitudinal": "hard",
    "birads_report": "hard",
}

SUBTYPES_BY_TYPE = {
    "viewer_control": ("t1_slice", "t1_wl", "t1_slice_wl", "t1_series"),
    "metadata_qa": (
        "t2_slices",
        "t2_nseries",
        "t2_modalities",
        "t2_date",
        "t2_ct_uid",
        "t4_interval",
        "t4_slice_diff",
    ),
    "vision_probe": ("vp_mod", "vp_pre"),
    "annotation": ("t3_nodule", "t3_find"),
    "oracle_annotation": (
        "t3_oracle_single",
        "t3_oracle_multi",
        "t3_oracle_volumetric",
    ),
    "oracle_birads_report": ("t3_oracle_birads",),
    "longitudinal": ("t4_lesion_single", "t4_lesion_multi"),
    "birads_report": ("t4_birads",),
}

TYPE_BY_SUBTYPE = {
    sub: task_type for task_type, subs in SUBTYPES_BY_TYPE.items() for sub in subs
}

TEMPLATES = {
    "t1_slice": "Navigate to slice {target} of the current CT series.",
    "t1_wl": (
        "Set the window width to {preset.ww} and window center to {preset.wc} "
        "for a standard {preset.label} on this {patient_id} chest CT."
    ),
    "t1_slice_wl": (
        "Navigate to slice {target} and apply a bone window (window width "
        "2500, window center 480) on this {patient_id} CT."
    ),
    "t1_series": (
        "The current viewport shows a CT series from {patient_id}. First "
        "query the study metadata to discover available series, then select "
        "the {target.modality} series (``{target.description}'')."
    ),
    "t2_slices": (
        "How many CT image slices are in the {patient_id} study? Query the "
        "series metadata and count the instances in the CT series. Answer "
        "with only the integer count."
    ),
    "t2_nseries": (
        "How many series are in the {patient_id} study (StudyInstanceUID: "
        "{study_uid})? Count all series regardless of modality. Answer with "
        "only the integer count."
    ),
    "t2_modalities": (
        "What distinct imaging modalities are present in the {patient_id} "
        "study? Query the series metadata and list all unique modality "
        "values, sorted alphabetically and separated by commas. Answer with "
        "only the comma-separated list (e.g., `CT, SEG, SR'), no other text."
    ),
    "t2_date": (
        "What is the study date (StudyDate DICOM tag) for the {patient_id} "
        "study? Answer with only the 8-digit date in YYYYMMDD format (e.g., "
        "`20000101'), no other text."
    ),
    "t2_ct_uid": (
        "What is the SeriesInstanceUID of the CT series in the {patient_id} "
        "study? Query the series metadata and find the series with modality "
        "CT. Answer with only the SeriesInstanceUID string, no label or "
        "other text."
    ),
    "t4_interval": (
        "What is the time interval (in days) between the baseline study "
        "(StudyInstanceUID: {baseline.study_uid}) and the follow-up study "
        "(StudyInstanceUID: {followup.study_uid}) for participant "
        "{participant_id}? Query the study metadata for both studies and "
        "compute the difference in StudyDate values. Answer with only the "
        "integer number of days, no other text."
    ),
    "t4_slice_diff": (
        "How many more (or fewer) CT slices does the follow-up study have "
        "compared to the baseline for participant {participant_id}? Baseline "
        "StudyInstanceUID: {baseline.study_uid}. Follow-up StudyInstanceUID: "
        "{followup.study_uid}. Query series metadata for both studies, find "
        "the CT series in each, and report the difference (follow-up minus "
        "baseline). Use a positive number if follow-up has more slices, "
        "negative if fewer. Answer with only the signed integer (e.g., `-17' "
        "or `24'), no other text."
    ),
    "vp_mod": (
        "What modality is this image?\nA) CT\nB) MRI\nC) DX\nD) N/A\n\n"
        "Respond by calling submit_answer with only the letter."
    ),
    "vp_pre": (
        "What windowing preset was applied to this image?\nA) Lung window\n"
        "B) Soft tissue window\nC) Default\nD) Breast MRI\nE) N/A\n\n"
        "Respond by calling submit_answer with only the letter."
    ),
    "t3_nodule": (
        "Navigate to slice {slice_index} of the CT series and place a "
        "segmentation annotation on the pulmonary nodule "
        "(``{segment_label}'') in this {patient_id} chest CT. Apply a lung "
        "window (WW: 1500, WC: -600) for optimal visualization. Use a circle "
        "or polygon region to outline the nodule."
    ),
    "t3_find": (
        "Find and segment the nodule labeled ``{label}'' in this "
        "{patient_id} chest CT. The nodule is visible on slices "
        "{first_slice} through {last_slice} ({num_slices} slices). Navigate "
        "to each slice, apply a lung window, inspect the image, and place a "
        "segmentation annotation on every slice where this specific nodule "
        "is present."
    ),
    "t3_oracle_single": (
        "Use the external pathology detection model to identify and segment "
        "the pulmonary nodule in this {patient_id} chest CT. First query the "
        "model for an overview of findings in the CT series, then request "
        "the precise segmentation contour for the recommended slice. "
        "Navigate to that slice and place the annotation using the model's "
        "output."
    ),
    "t3_oracle_multi": (
        "Use the external pathology detection model to identify and segment "
        "all pulmonary nodules in this {patient_id} chest CT. Query the "
        "model for an overview of all findings, then for each finding "
        "request the precise contour, navigate to the slice, and place an "
        "annotation. Annotate all findings."
    ),
    "t3_oracle_volumetric": (
        "Use the external pathology detection model to segment the nodule "
        "``{segment_label}'' across all its slices in this {patient_id} "
        "chest CT. Query the model for an overview, then for each slice in "
        "the nodule's range, request the precise contour, navigate to the "
        "slice, and place the annotation."
    ),
    "t3_oracle_birads": (
        "You are viewing a breast MRI study for patient {patient_id}. An "
        "external breast MRI CAD model is available via the "
        "query_birads_model tool. Query the model for the loaded series to "
        "obtain BI-RADS findings, then submit a structured BI-RADS report "
        "using submit_birads_report with the model's findings including "
        "laterality, lesion count, BI-RADS category, and whether enhancement "
        "is present."
    ),
    "t4_lesion_single": (
        "Compare baseline and follow-up chest CTs for participant "
        "{participant_id}. A new lesion has appeared on the follow-up scan "
        "that was not present on the baseline. Baseline StudyInstanceUID: "
        "{baseline.study_uid} (series: {baseline.series_uid}). Follow-up "
        "StudyInstanceUID: {followup.study_uid} (series: "
        "{followup.series_uid}). First examine the baseline CT to understand "
        "the normal anatomy, then switch to the follow-up CT and navigate "
        "through slices to find the new lesion. Use get_dicom_image with "
        "lung_window preprocessor to view the images. Once you locate the "
        "new lesion, submit its location using submit_longitudinal_finding."
    ),
    "t4_lesion_multi": (
        "Compare baseline and follow-up chest CTs for participant "
        "{participant_id}. Multiple new lesions may have appeared on the "
        "follow-up scan. Baseline StudyInstanceUID: {baseline.study_uid} "
        "(series: {baseline.series_uid}). Follow-up StudyInstanceUID: "
        "{followup.study_uid} (series: {followup.series_uid}). Examine both "
        "studies using lung window settings, identify all new findings, and "
        "submit each one using submit_longitudinal_finding. When done, call "
        "submit_longitudinal_complete."
    ),
    "t4_birads": (
        "You are viewing a breast MRI study (StudyInstanceUID: {study_uid}). "
        "This study contains {n_series} MR series including dynamic "
        "contrast-enhanced (DCE) sequences.\n\nAvailable MR series:\n"
        "{series_list}\n\nNavigate through the available series to identify "
        "any enhancing lesions. Compare pre-contrast and post-contrast "
        "sequences to assess enhancement. Produce a structured BI-RADS "
        "report by calling submit_birads_report with your findings including "
        "laterality, lesion count, BI-RADS category, and whether enhancement "
        "is present."
    ),
}

WINDOW_PRESETS = (
    {"ww": 1500, "wc": -600, "label": "lung window"},
    {"ww": 400, "wc": 40, "label": "soft tissue window"},
    {"ww": 2500, "wc": 480, "label": "bone window"},
)

#: answer letters for the preprocessor vision probe
PIPELINE_LETTERS = {
    "lung_window": "A",
    "soft_tissue_window": "B",
    "default": "C",
    "breast_mri": "D",
}

SYSTEM_PROMPT_PREAMBLE = (
    "You are a radiology AI agent operating inside a medical imaging viewer.\n"
    "Use the available tools to complete the task described below. Be precise\n"
    "and efficient -- use only the tools necessary to complete the task. All\n"
    "coordinates are in pixel space.\n"
)

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_.]*)\}")


@dataclass
class TaskSpec:
    task_id: str
    task_type: str
    tier: str
    study_uid: str
    auxiliary_study_uids: list[str]
    initial_series_uid: str
    initial_slice_index: int
    task_description: str
    expected_outcome: dict
    reference_trajectory: list[str]
    max_turns: int
    tool_set: str

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "task_type": self.task_type,
            "tier": self.tier,
            "study_uid": self.study_uid,
            "auxiliary_study_uids": list(self.auxiliary_study_uids),
            "initial_series_uid": self.initial_series_uid,
            "initial_slice_index": self.initial_slice_index,
            "task_description": self.task_description,
            "expected_outcome": self.expected_outcome,
            "reference_trajectory": list(self.reference_trajectory),
            "max_turns": self.max_turns,
            "tool_set": self.tool_set,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskSpec":
        return cls(**data)


@dataclass(frozen=True)
class RefTrajectoryParams:
    """Lengths that parameterize the closed-form reference trajectories."""

    nodule_slices: int = 1  # N: slices the nodule spans
    oracle_findings: int = 1  # K: findings in the oracle overview
    lesion_count: int = 1  # L: ground-truth longitudinal lesions
    series_viewed: int = 1  # V: MR series shown, capped at 4


def subtype_of(task_id: str) -> str:
    matches = [s for s in TYPE_BY_SUBTYPE if task_id.startswith(s)]
    if not matches:
        raise UnknownSubtype(f"no subtype matches task id {task_id!r}")
    return max(matches, key=len)


def render_description(task_type: str, subtype: str, fields: dict) -> str:
    """Instantiate a template; every placeholder must be bound."""
    if subtype not in TEMPLATES:
        raise UnknownSubtype(f"unknown subtype {subtype!r}")
    if TYPE_BY_SUBTYPE[subtype] != task_type:
        raise UnknownSubtype(f"subtype {subtype!r} is not a {task_type} template")

    def resolve(match: re.Match) -> str:
        path = match.group(1)
        value: object = fields
        for part in path.split("."):
            if not isinstance(value, dict) or part not in value:
                raise UnboundPlaceholder(path)
            value = value[part]
        return str(value)

    return _PLACEHOLDER.sub(resolve, TEMPLATES[subtype])


def reference_trajectory(
    subtype: str, params: RefTrajectoryParams = RefTrajectoryParams()
) -> list[str]:
    """Canonical tool multiset for one subtype (compared unordered)."""
    if subtype in ("t1_slice",):
        return ["set_viewport_slice"]
    if subtype == "t1_wl":
        return ["set_window_level"]
    if subtype == "t1_slice_wl":
        return ["set_viewport_slice", "set_window_level"]
    if subtype == "t1_series":
        # study metadata tools are not in the viewer_control tool set, so
        # the reference discovers series through the viewport state
        return ["get_viewport_state", "select_series"]
    if subtype in ("t2_slices", "t2_modalities", "t2_ct_uid"):
        return ["get_study_series", "submit_answer"]
    if subtype in ("t2_nseries", "t2_date"):
        return ["get_study_metadata", "submit_answer"]
    if subtype == "t4_interval":
        return ["get_study_metadata", "get_study_metadata", "submit_answer"]
    if subtype == "t4_slice_diff":
        return ["get_study_series", "get_study_series", "submit_answer"]
    if subtype in ("vp_mod", "vp_pre"):
        return ["submit_answer"]
    if subtype == "t3_nodule":
        return [
            "get_study_series",
            "set_viewport_slice",
            "set_window_level",
            "get_dicom_image",
            "add_circle_segmentation",
        ]
    if subtype == "t3_find":
        return reference_trajectory("t3_nodule") + [
            "set_viewport_slice",
            "get_dicom_image",
            "add_circle_segmentation",
        ] * (params.nodule_slices - 1)
    if subtype == "t3_oracle_single":
        return [
            "get_study_series",
            "query_pathology_model",
            "query_pathology_model",
            "set_viewport_slice",
            "add_polygon_segmentation",
        ]
    if subtype in ("t3_oracle_multi", "t3_oracle_volumetric"):
        repeats = (
            params.oracle_findings
            if subtype == "t3_oracle_multi"
            else params.nodule_slices
        )
        return ["get_study_series", "query_pathology_model"] + [
            "query_pathology_model",
            "set_viewport_slice",
            "add_polygon_segmentation",
        ] * repeats
    if subtype == "t3_oracle_birads":
        return ["get_study_series", "query_birads_model", "submit_birads_report"]
    if subtype in ("t4_lesion_single", "t4_lesion_multi"):
        scan = ["set_viewport_slice", "get_dicom_image"] * 5
        trajectory = (
            ["get_study_series", "select_series", "set_window_level"]
            + scan
            + ["select_series", "set_viewport_slice", "set_window_level"]
            + scan
        )
        findings = 1 if subtype == "t4_lesion_single" else params.lesion_count
        return (
            trajectory
            + ["submit_longitudinal_finding"] * findings
            + ["submit_longitudinal_complete"]
        )
    if subtype == "t4_birads":
        per_series = ["select_series"] + ["set_viewport_slice", "get_dicom_image"] * 3
        return (
            ["get_study_series"]
            + per_series * min(params.series_viewed, 4)
            + ["submit_birads_report"]
        )
    raise UnknownSubtype(f"unknown subtype {subtype!r}")


def max_turns_for(trajectory: list[str]) -> int:
    return max(2 * len(trajectory), 10)


def assemble_prompt(task: TaskSpec, snapshot: dict) -> str:
    """Fixed preamble, optional study-context block, viewer state, task."""
    parts = [SYSTEM_PROMPT_PREAMBLE]
    if task.study_uid:
        parts.append(
            "\nStudy context:\n"
            f"- StudyInstanceUID: {task.study_uid}\n"
            f"- SeriesInstanceUID (loaded): {task.initial_series_uid}\n"
        )
    parts.append("\nCurrent viewer state:\n" + json.dumps(snapshot, indent=2) + "\n")
    parts.append(f"\nTask: {task.task_description}")
    return "".join(parts)


# ---------------------------------------------------------------------------
# suite generation


def _series_of(truth: GroundTruth, study_uid: str) -> list[dict]:
    return truth.structure[study_uid]["series"]


def _first_series(truth: GroundTruth, study_uid: str, modality: str) -> dict:
    for series in _series_of(truth, study_uid):
        if series["modality"] == modality:
            return series
    raise InsufficientArchive(modality)


class _SuiteBuilder:
    def __init__(self, env: Environment, seed: int):
        self.env = env
        self.rng = random.Random(seed)
        self.counters: dict[str, int] = {}
        self.tasks: list[TaskSpec] = []
        self.ct = env.families("ct")
        self.mr = env.families("breast_mr")
        self.long = env.families("longitudinal_ct")
        for profile, families in (
            ("ct", self.ct),
            ("breast_mr", self.mr),
            ("longitudinal_ct", self.long),
        ):
            if not families:
                raise InsufficientArchive(profile)

    def _task_id(self, subtype: str) -> str:
        n = self.counters.get(subtype, 0)
        self.counters[subtype] = n + 1
        return f"{subtype}_{n:03d}"

    def _add(
        self,
        subtype: str,
        *,
        study_uid: str,
        initial_series_uid: str,
        expected: dict,
        fields: dict,
        trajectory: list[str],
        auxiliary: list[str] | None = None,
        initial_slice_index: int = 0,
    ) -> TaskSpec:
        task_type = TYPE_BY_SUBTYPE[subtype]
        task = TaskSpec(
            task_id=self._task_id(subtype),
            task_type=task_type,
            tier=TIER_BY_TYPE[task_type],
            study_uid=study_uid,
            auxiliary_study_uids=auxiliary or [],
            initial_series_uid=initial_series_uid,
            initial_slice_index=initial_slice_index,
            task_description=render_description(task_type, subtype, fields),
            expected_outcome=expected,
            reference_trajectory=trajectory,
            max_turns=max_turns_for(trajectory),
            tool_set=task_type,
        )
        self.tasks.append(task)
        return task

    # -- easy ----------------------------------------------------------

    def viewer_control(self, count: int) -> None:
        subtypes = SUBTYPES_BY_TYPE["viewer_control"]
        for i in range(count):
            truth = self.ct[i % len(self.ct)]
            study_uid = truth.study_uids[0]
            ct_series = _first_series(truth, study_uid, "CT")
            subtype = subtypes[i % len(subtypes)]
            if subtype == "t1_slice":
                target = self.rng.randrange(1, ct_series["instance_count"])
                self._add(
                    subtype,
                    study_uid=study_uid,
                    initial_series_uid=ct_series["series_uid"],
                    expected={"slice_index": target},
                    fields={"target": target},
                    trajectory=reference_trajectory(subtype),
                )
            elif subtype == "t1_wl":
                preset = WINDOW_PRESETS[(i // len(subtypes)) % len(WINDOW_PRESETS)]
                self._add(
                    subtype,
                    study_uid=study_uid,
                    initial_series_uid=ct_series["series_uid"],
                    expected={
                        "window_width": preset["ww"],
                        "window_center": preset["wc"],
                    },
                    fields={"preset": preset, "patient_id": truth.patient_id},
                    trajectory=reference_trajectory(subtype),
                )
            elif subtype == "t1_slice_wl":
                target = self.rng.randrange(1, ct_series["instance_count"])
                self._add(
                    subtype,
                    study_uid=study_uid,
                    initial_series_uid=ct_series["series_uid"],
                    expected={
                        "slice_index": target,
                        "window_width": 2500,
                        "window_center": 480,
                    },
                    fields={"target": target, "patient_id": truth.patient_id},
                    trajectory=reference_trajectory(subtype),
                )
            else:  # t1_series
                scout = _first_series(truth, study_uid, "SC")
                self._add(
                    subtype,
                    study_uid=study_uid,
                    initial_series_uid=ct_series["series_uid"],
                    expected={"series_uid": scout["series_uid"]},
                    fields={
                        "patient_id": truth.patient_id,
                        "target": {
                            "modality": scout["modality"],
                            "description": scout["description"],
                        },
                    },
                    trajectory=reference_trajectory(subtype),
                )

    def metadata_qa(self, count: int) -> None:
        subtypes = SUBTYPES_BY_TYPE["metadata_qa"]
        generic = self.ct + self.mr
        for i in range(count):
            subtype = subtypes[i % len(subtypes)]
            if subtype in ("t4_interval", "t4_slice_diff"):
                truth = self.long[i % len(self.long)]
                baseline_uid, followup_uid = truth.study_uids
                base_series = _first_series(truth, baseline_uid, "CT")
                answer = (
                    str(truth.interval_days)
                    if subtype == "t4_interval"
                    else str(truth.slice_diff)
                )
                self._add(
                    subtype,
                    study_uid=baseline_uid,
                    auxiliary=[followup_uid],
                    initial_series_uid=base_series["series_uid"],
                    expected={"answer": answer},
                    fields={
                        "participant_id": truth.patient_id,
                        "baseline": {"study_uid": baseline_uid},
                        "followup": {"study_uid": followup_uid},
                    },
                    trajectory=reference_trajectory(subtype),
                )
                continue
            if subtype in ("t2_slices", "t2_ct_uid"):
                truth = self.ct[i % len(self.ct)]
            else:
                truth = generic[i % len(generic)]
            study_uid = truth.study_uids[0]
            series = _series_of(truth, study_uid)
            initial = series[0]
            if subtype == "t2_slices":
                answer = str(
                    sum(s["instance_count"] for s in series if s["modality"] == "CT")
                )
            elif subtype == "t2_nseries":
                answer = str(len(series))
            elif subtype == "t2_modalities":
                answer = ", ".join(sorted({s["modality"] for s in series}))
            elif subtype == "t2_date":
                answer = truth.structure[study_uid]["study_date"]
            else:  # t2_ct_uid
                answer = _first_series(truth, study_uid, "CT")["series_uid"]
            self._add(
                subtype,
                study_uid=study_uid,
                initial_series_uid=initial["series_uid"],
                expected={"answer": answer},
                fields={"patient_id": truth.patient_id, "study_uid": study_uid},
                trajectory=reference_trajectory(subtype),
            )

    def vision_probe(self, count: int) -> None:
        ct_pipelines = ("lung_window", "soft_tissue_window", "default")
        mr_pipelines = ("breast_mri", "default", "percentile_norm")
        for i in range(count):
            use_mr = i % 2 == 1
            families = self.mr if use_mr else self.ct
            truth = families[i % len(families)]
            study_uid = truth.study_uids[0]
            series = _series_of(truth, study_uid)[0]
            subtype = SUBTYPES_BY_TYPE["vision_probe"][i % 2]
            if subtype == "vp_mod":
                pipeline = "default"
                answer = truth.vision_probe["modality_letter"]
            else:
                options = mr_pipelines if use_mr else ct_pipelines
                pipeline = options[(i // 2) % len(options)]
                answer = PIPELINE_LETTERS.get(pipeline, "E")
            self._add(
                subtype,
                study_uid=study_uid,
                initial_series_uid=series["series_uid"],
                initial_slice_index=series["instance_count"] // 2,
                expected={"answer": answer, "probe_pipeline": pipeline},
                fields={},
                trajectory=reference_trajectory(subtype),
            )

    # -- medium --------------------------------------------------------

    def _lesion_pairs(self) -> list[tuple[GroundTruth, int]]:
        pairs = []
        for truth in self.ct:
            for idx in range(len(truth.lesions)):
                pairs.append((truth, idx))
        return pairs

    def _annotation_expected(self, truth: GroundTruth, idx: int, slices: list[int]):
        lesion = truth.lesions[idx]
        return {
            "targets": [
                {
                    "label": lesion.label,
                    "center": list(lesion.center),
                    "radius": lesion.radius,
                    "slices": slices,
                }
            ],
            "frame_shape": list(truth.frame_shape),
        }

    def annotation_and_oracle(self, count: int) -> None:
        pairs = self._lesion_pairs()
        for i in range(count):
            truth, idx = pairs[i % len(pairs)]
            lesion = truth.lesions[idx]
            study_uid = truth.study_uids[0]
            series_uid = lesion.series_uid
            rep = representative_slice(lesion, truth.frame_shape)
            real_subtype = ("t3_nodule", "t3_find")[i % 2]
            if real_subtype == "t3_nodule":
                expected = self._annotation_expected(truth, idx, [rep])
                fields = {
                    "slice_index": rep,
                    "segment_label": lesion.label,
                    "patient_id": truth.patient_id,
                }
                trajectory = reference_trajectory(real_subtype)
            else:
                expected = self._annotation_expected(truth, idx, lesion.slices)
                fields = {
                    "label": lesion.label,
                    "patient_id": truth.patient_id,
                    "first_slice": lesion.slices[0],
                    "last_slice": lesion.slices[-1],
                    "num_slices": len(lesion.slices),
                }
                trajectory = reference_trajectory(
                    real_subtype,
                    RefTrajectoryParams(nodule_slices=len(lesion.slices)),
                )
            self._add(
                real_subtype,
                study_uid=study_uid,
                initial_series_uid=series_uid,
                expected=expected,
                fields=fields,
                trajectory=trajectory,
            )
            # paired oracle variant over the same lesion
            if real_subtype == "t3_nodule" and i % 4 == 2:
                study_lesions = [
                    l for l in truth.lesions if l.series_uid == series_uid
                ]
                oracle_subtype = "t3_oracle_multi"
                expected = {
                    "targets": [
                        {
                            "label": l.label,
                            "center": list(l.center),
                            "radius": l.radius,
                            "slices": [representative_slice(l, truth.frame_shape)],
                        }
                        for l in study_lesions
                    ],
                    "frame_shape": list(truth.frame_shape),
                }
                trajectory = reference_trajectory(
                    oracle_subtype,
                    RefTrajectoryParams(oracle_findings=len(study_lesions)),
                )
                fields = {"patient_id": truth.patient_id}
            elif real_subtype == "t3_nodule":
                oracle_subtype = "t3_oracle_single"
                expected = self._annotation_expected(truth, idx, [rep])
                trajectory = reference_trajectory(oracle_subtype)
                fields = {"patient_id": truth.patient_id}
            else:
                oracle_subtype = "t3_oracle_volumetric"
                expected = self._annotation_expected(truth, idx, lesion.slices)
                trajectory = reference_trajectory(
                    oracle_subtype,
                    RefTrajectoryParams(nodule_slices=len(lesion.slices)),
                )
                fields = {
                    "segment_label": lesion.label,
                    "patient_id": truth.patient_id,
                }
            self._add(
                oracle_subtype,
                study_uid=study_uid,
                initial_series_uid=series_uid,
                expected=expected,
                fields=fields,
                trajectory=trajectory,
            )

    def _birads_expected(self, truth: GroundTruth) -> dict:
        assert truth.birads is not None
        return {"report": truth.birads.to_dict()}

    def oracle_birads(self, count: int) -> None:
        for i in range(count):
            truth = self.mr[i % len(self.mr)]
            study_uid = truth.study_uids[0]
            series = _series_of(truth, study_uid)
            self._add(
                "t3_oracle_birads",
                study_uid=study_uid,
                initial_series_uid=series[0]["series_uid"],
                expected=self._birads_expected(truth),
                fields={"patient_id": truth.patient_id},
                trajectory=reference_trajectory("t3_oracle_birads"),
            )

    # -- hard ------------------------------------------------------------

    def longitudinal(self, count: int) -> None:
        for i in range(count):
            truth = self.long[i % len(self.long)]
            baseline_uid, followup_uid = truth.study_uids
            base_series = _first_series(truth, baseline_uid, "CT")
            follow_series = _first_series(truth, followup_uid, "CT")
            single = len(truth.findings) == 1
            subtype = "t4_lesion_single" if single else "t4_lesion_multi"
            trajectory = reference_trajectory(
                subtype, RefTrajectoryParams(lesion_count=len(truth.findings))
            )
            self._add(
                subtype,
                study_uid=baseline_uid,
                auxiliary=[followup_uid],
                initial_series_uid=base_series["series_uid"],
                expected={"findings": truth.findings},
                fields={
                    "participant_id": truth.patient_id,
                    "baseline": {
                        "study_uid": baseline_uid,
                        "series_uid": base_series["series_uid"],
                    },
                    "followup": {
                        "study_uid": followup_uid,
                        "series_uid": follow_series["series_uid"],
                    },
                },
                trajectory=trajectory,
            )

    def birads_report(self, count: int) -> None:
        for i in range(count):
            truth = self.mr[i % len(self.mr)]
            study_uid = truth.study_uids[0]
            series = _series_of(truth, study_uid)
            series_list = "\n".join(
                f"- {s['description']} (SeriesInstanceUID: {s['series_uid']})"
                for s in series
            )
            trajectory = reference_trajectory(
                "t4_birads", RefTrajectoryParams(series_viewed=min(len(series), 4))
            )
            self._add(
                "t4_birads",
                study_uid=study_uid,
                initial_series_uid=series[0]["series_uid"],
                expected=self._birads_expected(truth),
                fields={
                    "study_uid": study_uid,
                    "n_series": len(series),
                    "series_list": series_list,
                },
                trajectory=trajectory,
            )


def generate_suite(env: Environment, seed: int, per_type: int = 10) -> list[TaskSpec]:
    """Deterministic task suite covering all eight types.

    ``per_type`` tasks are generated for each type (annotation tasks each
    bring a paired oracle variant over the same lesion).
    """
    builder = _SuiteBuilder(env, seed)
    builder.viewer_control(per_type)
    builder.metadata_qa(per_type)
    builder.vision_probe(per_type)
    builder.annotation_and_oracle(per_type)
    builder.oracle_birads(per_type)
    builder.longitudinal(per_type)
    builder.birads_report(per_type)
    return builder.tasks


# ---------------------------------------------------------------------------
# suite files


def write_suite(tasks: list[TaskSpec], out_dir, seed: int | None = None) -> Path:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for task in tasks:
        filename = f"{task.task_id}.yaml"
        (root / filename).write_text(
            yaml.safe_dump(task.to_dict(), sort_keys=True, default_flow_style=False)
        )
        entries.append(
            {
                "file": filename,
                "task_id": task.task_id,
                "task_type": task.task_type,
                "tier": task.tier,
            }
        )
    manifest = {"seed": seed, "tasks": entries}
    path = root / "suite.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=True))
    return path


def load_suite(suite_dir) -> list[TaskSpec]:
    root = Path(suite_dir)
    manifest_path = root / "suite.yaml" if root.is_dir() else root
    manifest = yaml.safe_load(manifest_path.read_text())
    tasks = []
    for entry in manifest["tasks"]:
        data = yaml.safe_load((manifest_path.parent / entry["file"]).read_text())
        tasks.append(TaskSpec.from_dict(data))
    return tasks
