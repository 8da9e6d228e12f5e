"""Deterministic synthetic study generators with exact ground truth.

Three study families stand in for real cohorts at desk scale: thoracic CT
with spherical nodules, dynamic contrast-enhanced breast MR with a known
report, and baseline/follow-up CT pairs with new lesions.  Tissue layout
is stylized (concentric ellipses), which is all the scorers need: ground
truth is analytic, so every mask can be recomputed exactly.

Conventions: laterality "left" means the left half of the image
(x < cols/2); volumes are (slices, rows, cols); lesion centers are
(x, y, z) voxels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dicom
from .dicom import InstanceDataset, TagValue, make_uid
from .errors import EmptyInput, LesionOutOfBounds
from .geometry import rasterize_sphere

HU_AIR = -1000
HU_BODY = 0
HU_LUNG = -850
HU_NODULE = 20
NOISE_HU = 10
RESCALE_INTERCEPT = -1024

MR_BACKGROUND = 20
MR_TISSUE = 200
MR_LESION = 300
MR_ENHANCEMENT_FACTOR = 2.2

PROFILES = ("ct", "breast_mr", "longitudinal_ct")

QUADRANTS = ("upper outer", "upper inner", "lower outer", "lower inner")


@dataclass(frozen=True)
class LesionSpec:
    """Spherical lesion: center voxel (x, y, z) and radius in pixels."""

    center: tuple[float, float, float]
    radius: float
    label: str = ""

    @property
    def slice_range(self) -> tuple[int, int]:
        cz = self.center[2]
        lo = int(np.ceil(cz - self.radius))
        hi = int(np.floor(cz + self.radius))
        return lo, hi

    def occupied_slices(self, shape: tuple[int, int, int]) -> list[int]:
        """Slices whose rasterized cross-section is non-empty."""
        volume = rasterize_sphere(self.center, self.radius, shape)
        return [int(z) for z in np.nonzero(volume.any(axis=(1, 2)))[0]]


@dataclass(frozen=True)
class BiradsRecord:
    laterality: str
    lesion_count: int
    birads_category: int
    enhancement_present: bool
    quadrant: str | None = None

    def to_dict(self) -> dict:
        out = {
            "laterality": self.laterality,
            "lesion_count": self.lesion_count,
            "birads_category": self.birads_category,
            "enhancement_present": self.enhancement_present,
        }
        if self.quadrant is not None:
            out["quadrant"] = self.quadrant
        return out


@dataclass
class PhantomSpec:
    seed: int
    profile: str
    rows: int = 64
    cols: int = 64
    slices: int = 20
    patient_id: str = "PH0001"
    study_date: str = "20000101"
    lesions: list[LesionSpec] = field(default_factory=list)
    # breast MR only
    birads: BiradsRecord | None = None
    # longitudinal only
    interval_days: int = 365
    followup_slices: int | None = None
    new_lesions: list[LesionSpec] = field(default_factory=list)

    @property
    def volume_shape(self) -> tuple[int, int, int]:
        return (self.slices, self.rows, self.cols)

    def validate(self) -> None:
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.slices < 8:
            raise ValueError("phantom volumes need at least 8 slices")
        total_slices = {
            "followup": self.followup_slices or self.slices,
            "baseline": self.slices,
        }
        for lesion in self.lesions:
            _check_bounds(lesion, self.rows, self.cols, self.slices)
        for lesion in self.new_lesions:
            _check_bounds(lesion, self.rows, self.cols, total_slices["followup"])


def _check_bounds(lesion: LesionSpec, rows: int, cols: int, slices: int) -> None:
    if lesion.radius < 2:
        raise LesionOutOfBounds(f"lesion radius {lesion.radius} < 2 px")
    x, y, z = lesion.center
    if not (0 <= x < cols and 0 <= y < rows and 0 <= z < slices):
        raise LesionOutOfBounds(f"lesion center {lesion.center} outside volume")


@dataclass
class LesionTruth:
    label: str
    center: tuple[float, float, float]
    radius: float
    slices: list[int]
    study_uid: str
    series_uid: str

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "center": list(self.center),
            "radius": self.radius,
            "slices": self.slices,
            "study_uid": self.study_uid,
            "series_uid": self.series_uid,
        }


@dataclass
class GroundTruth:
    """Sidecar payload for one study family."""

    family_id: str
    profile: str
    study_uids: list[str]
    patient_id: str
    frame_shape: tuple[int, int]
    structure: dict
    lesions: list[LesionTruth] = field(default_factory=list)
    birads: BiradsRecord | None = None
    findings: list[dict] = field(default_factory=list)
    vision_probe: dict = field(default_factory=dict)
    interval_days: int | None = None
    slice_diff: int | None = None

    def to_dict(self) -> dict:
        return {
            "family_id": self.family_id,
            "profile": self.profile,
            "study_uids": self.study_uids,
            "patient_id": self.patient_id,
            "frame_shape": list(self.frame_shape),
            "structure": self.structure,
            "lesions": [l.to_dict() for l in self.lesions],
            "birads": self.birads.to_dict() if self.birads else None,
            "findings": self.findings,
            "vision_probe": self.vision_probe,
            "interval_days": self.interval_days,
            "slice_diff": self.slice_diff,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        birads = None
        if data.get("birads"):
            b = data["birads"]
            birads = BiradsRecord(
                laterality=b["laterality"],
                lesion_count=b["lesion_count"],
                birads_category=b["birads_category"],
                enhancement_present=b["enhancement_present"],
                quadrant=b.get("quadrant"),
            )
        return cls(
            family_id=data["family_id"],
            profile=data["profile"],
            study_uids=list(data["study_uids"]),
            patient_id=data["patient_id"],
            frame_shape=tuple(data["frame_shape"]),
            structure=data["structure"],
            lesions=[
                LesionTruth(
                    label=l["label"],
                    center=tuple(l["center"]),
                    radius=l["radius"],
                    slices=list(l["slices"]),
                    study_uid=l["study_uid"],
                    series_uid=l["series_uid"],
                )
                for l in data.get("lesions", [])
            ],
            birads=birads,
            findings=list(data.get("findings", [])),
            vision_probe=dict(data.get("vision_probe", {})),
            interval_days=data.get("interval_days"),
            slice_diff=data.get("slice_diff"),
        )


# ---------------------------------------------------------------------------
# volume synthesis


def _ellipse_mask(rows: int, cols: int, cx: float, cy: float, rx: float, ry: float):
    ys, xs = np.mgrid[0:rows, 0:cols]
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _ct_volume(spec_seed: int, shape: tuple[int, int, int], lesions: list[LesionSpec]):
    slices, rows, cols = shape
    vol = np.full(shape, HU_AIR, dtype=np.int32)
    body = _ellipse_mask(rows, cols, cols / 2, rows / 2, 0.45 * cols, 0.38 * rows)
    lung_l = _ellipse_mask(rows, cols, 0.32 * cols, rows / 2, 0.17 * cols, 0.24 * rows)
    lung_r = _ellipse_mask(rows, cols, 0.68 * cols, rows / 2, 0.17 * cols, 0.24 * rows)
    vol[:, body] = HU_BODY
    vol[:, lung_l | lung_r] = HU_LUNG
    for lesion in lesions:
        vol[rasterize_sphere(lesion.center, lesion.radius, shape)] = HU_NODULE
    rng = np.random.default_rng(spec_seed)
    vol += rng.integers(-NOISE_HU, NOISE_HU + 1, size=shape, dtype=np.int32)
    return vol


def _stored_ct(volume_hu: np.ndarray) -> np.ndarray:
    return np.clip(volume_hu - RESCALE_INTERCEPT, 0, 65535).astype(np.uint16)


def lung_field_mask(rows: int, cols: int) -> np.ndarray:
    """In-plane region where CT nodules may be placed."""
    lung_l = _ellipse_mask(rows, cols, 0.32 * cols, rows / 2, 0.17 * cols, 0.24 * rows)
    lung_r = _ellipse_mask(rows, cols, 0.68 * cols, rows / 2, 0.17 * cols, 0.24 * rows)
    return lung_l | lung_r


def _base_instance(
    *,
    sop_class: str,
    sop_uid: str,
    study_uid: str,
    series_uid: str,
    spec: PhantomSpec,
    modality: str,
    study_description: str,
    series_description: str,
    series_number: int,
    instance_number: int,
    z_position: float,
    frame: np.ndarray,
    rescale_intercept: float,
    window: tuple[float, float],
    study_date: str,
    slice_thickness: float = 2.5,
) -> InstanceDataset:
    ds = InstanceDataset()
    for tv in dicom.file_meta_tags(sop_class, sop_uid):
        ds.tags[tv.tag] = tv
    ds.set("SOPClassUID", sop_class)
    ds.set("SOPInstanceUID", sop_uid)
    ds.set("StudyDate", study_date)
    ds.set("StudyTime", "090000")
    ds.set("Modality", modality)
    ds.set("StudyDescription", study_description)
    ds.set("SeriesDescription", series_description)
    ds.set("PatientName", f"PHANTOM^{spec.patient_id}")
    ds.set("PatientID", spec.patient_id)
    ds.set("SliceThickness", slice_thickness)
    ds.set("StudyInstanceUID", study_uid)
    ds.set("SeriesInstanceUID", series_uid)
    ds.set("SeriesNumber", series_number)
    ds.set("InstanceNumber", instance_number)
    ds.set("ImagePositionPatient", (0.0, 0.0, z_position))
    ds.set("ImageOrientationPatient", (1.0, 0.0, 0.0, 0.0, 1.0, 0.0))
    ds.set("SamplesPerPixel", 1)
    ds.set("PhotometricInterpretation", "MONOCHROME2")
    ds.set("Rows", frame.shape[0])
    ds.set("Columns", frame.shape[1])
    ds.set("PixelSpacing", (0.7, 0.7))
    ds.set("BitsAllocated", 16)
    ds.set("BitsStored", 16)
    ds.set("HighBit", 15)
    ds.set("PixelRepresentation", 0)
    ds.set("WindowCenter", window[1])
    ds.set("WindowWidth", window[0])
    ds.set("RescaleIntercept", rescale_intercept)
    ds.set("RescaleSlope", 1.0)
    ds.pixel_data = frame
    return ds


def _ct_series_instances(
    spec: PhantomSpec,
    study_uid: str,
    series_uid: str,
    stored: np.ndarray,
    *,
    study_description: str,
    series_description: str = "Axial CT",
    series_number: int = 1,
    study_date: str | None = None,
    uid_salt: str = "",
) -> list[InstanceDataset]:
    instances = []
    for i in range(stored.shape[0]):
        sop_uid = make_uid(spec.seed, uid_salt, series_uid, "sop", i)
        instances.append(
            _base_instance(
                sop_class=dicom.CT_IMAGE_STORAGE,
                sop_uid=sop_uid,
                study_uid=study_uid,
                series_uid=series_uid,
                spec=spec,
                modality="CT",
                study_description=study_description,
                series_description=series_description,
                series_number=series_number,
                instance_number=i + 1,
                z_position=i * 2.5,
                frame=stored[i],
                rescale_intercept=RESCALE_INTERCEPT,
                window=(400.0, 40.0),
                study_date=study_date or spec.study_date,
            )
        )
    return instances


def _structure_entry(instances: list[InstanceDataset]) -> dict:
    index = dicom.build_index(instances)
    out: dict = {}
    for study_uid, study in index.studies.items():
        out[study_uid] = {
            "study_date": study.study_date,
            "patient_id": study.patient_id,
            "series": [
                {
                    "series_uid": uid,
                    "modality": index.series[uid].modality,
                    "description": index.series[uid].description,
                    "instance_count": index.series[uid].instance_count,
                    "rows": index.series[uid].rows,
                    "columns": index.series[uid].columns,
                }
                for uid in study.series_uids
            ],
        }
    return out


def generate_ct_study(spec: PhantomSpec) -> tuple[list[InstanceDataset], GroundTruth]:
    """Thoracic CT: axial series with nodules plus a derived SC scout."""
    spec.validate()
    if spec.profile != "ct":
        raise ValueError("spec profile must be 'ct'")
    lesions = [
        LesionSpec(l.center, l.radius, l.label or f"Nodule {i + 1}")
        for i, l in enumerate(spec.lesions)
    ]
    volume = _ct_volume(spec.seed, spec.volume_shape, lesions)
    stored = _stored_ct(volume)

    study_uid = make_uid(spec.seed, "ct", "study")
    series_uid = make_uid(spec.seed, "ct", "series", 1)
    scout_uid = make_uid(spec.seed, "ct", "series", 2)
    instances = _ct_series_instances(
        spec, study_uid, series_uid, stored, study_description="Chest CT phantom"
    )
    scout = np.clip(stored.mean(axis=0), 0, 65535).astype(np.uint16)
    instances.append(
        _base_instance(
            sop_class=dicom.SECONDARY_CAPTURE_STORAGE,
            sop_uid=make_uid(spec.seed, "ct", scout_uid, "sop", 0),
            study_uid=study_uid,
            series_uid=scout_uid,
            spec=spec,
            modality="SC",
            study_description="Chest CT phantom",
            series_description="Scout",
            series_number=2,
            instance_number=1,
            z_position=0.0,
            frame=scout,
            rescale_intercept=RESCALE_INTERCEPT,
            window=(400.0, 40.0),
            study_date=spec.study_date,
        )
    )
    truth = GroundTruth(
        family_id=f"ct_{spec.seed}",
        profile="ct",
        study_uids=[study_uid],
        patient_id=spec.patient_id,
        frame_shape=(spec.rows, spec.cols),
        structure=_structure_entry(instances),
        lesions=[
            LesionTruth(
                label=l.label,
                center=l.center,
                radius=l.radius,
                slices=l.occupied_slices(spec.volume_shape),
                study_uid=study_uid,
                series_uid=series_uid,
            )
            for l in lesions
        ],
        vision_probe={"modality_letter": "A"},
    )
    return instances, truth


def _breast_volume(
    seed: int,
    shape: tuple[int, int, int],
    lesions: list[LesionSpec],
    lesion_value: float,
) -> np.ndarray:
    slices, rows, cols = shape
    vol = np.full(shape, MR_BACKGROUND, dtype=np.int32)
    left = _ellipse_mask(rows, cols, 0.27 * cols, rows / 2, 0.2 * cols, 0.3 * rows)
    right = _ellipse_mask(rows, cols, 0.73 * cols, rows / 2, 0.2 * cols, 0.3 * rows)
    vol[:, left | right] = MR_TISSUE
    for lesion in lesions:
        vol[rasterize_sphere(lesion.center, lesion.radius, shape)] = int(lesion_value)
    rng = np.random.default_rng(seed)
    vol += rng.integers(-NOISE_HU, NOISE_HU + 1, size=shape, dtype=np.int32)
    return np.clip(vol, 0, 65535).astype(np.uint16)


def breast_lesion_center(
    rows: int, cols: int, slices: int, laterality: str, quadrant: str | None
) -> tuple[float, float, float]:
    """Deterministic lesion placement honouring laterality and quadrant.

    "outer" is toward the nearest image edge, "inner" toward the midline.
    """
    breast_cx = 0.27 * cols if laterality == "left" else 0.73 * cols
    cx, cy = breast_cx, rows / 2
    dx = 0.08 * cols
    dy = 0.12 * rows
    if quadrant:
        vert, horiz = quadrant.split()
        cy += -dy if vert == "upper" else dy
        outward = -dx if laterality == "left" else dx
        cx += outward if horiz == "outer" else -outward
    return (cx, cy, slices // 2)


def generate_breast_mr_study(
    spec: PhantomSpec,
) -> tuple[list[InstanceDataset], GroundTruth]:
    """Breast MR: one pre-contrast pass plus four post-contrast DCE passes.

    Lesions brighten in the post-contrast passes iff the ground-truth
    record says enhancement is present.
    """
    spec.validate()
    if spec.profile != "breast_mr":
        raise ValueError("spec profile must be 'breast_mr'")
    if spec.birads is None:
        raise ValueError("breast MR spec requires a BI-RADS record")
    record = spec.birads
    lesions = [
        LesionSpec(l.center, l.radius, l.label or f"Lesion {i + 1}")
        for i, l in enumerate(spec.lesions)
    ]
    for lesion in lesions:
        on_left = lesion.center[0] < spec.cols / 2
        if (record.laterality == "left") != on_left:
            raise LesionOutOfBounds(
                f"lesion at x={lesion.center[0]} contradicts laterality "
                f"{record.laterality!r}"
            )

    study_uid = make_uid(spec.seed, "mr", "study")
    passes = ["Pre-contrast"] + [f"Post-contrast {k}" for k in range(1, 5)]
    instances: list[InstanceDataset] = []
    series_uids = []
    for number, description in enumerate(passes, start=1):
        enhanced = number > 1 and record.enhancement_present
        value = MR_LESION * MR_ENHANCEMENT_FACTOR if enhanced else MR_LESION
        stored = _breast_volume(spec.seed + number, spec.volume_shape, lesions, value)
        series_uid = make_uid(spec.seed, "mr", "series", number)
        series_uids.append(series_uid)
        for i in range(spec.slices):
            instances.append(
                _base_instance(
                    sop_class=dicom.MR_IMAGE_STORAGE,
                    sop_uid=make_uid(spec.seed, "mr", series_uid, "sop", i),
                    study_uid=study_uid,
                    series_uid=series_uid,
                    spec=spec,
                    modality="MR",
                    study_description="Breast MR phantom",
                    series_description=description,
                    series_number=number,
                    instance_number=i + 1,
                    z_position=i * 2.5,
                    frame=stored[i],
                    rescale_intercept=0.0,
                    window=(400.0, 200.0),
                    study_date=spec.study_date,
                )
            )
    truth = GroundTruth(
        family_id=f"mr_{spec.seed}",
        profile="breast_mr",
        study_uids=[study_uid],
        patient_id=spec.patient_id,
        frame_shape=(spec.rows, spec.cols),
        structure=_structure_entry(instances),
        lesions=[
            LesionTruth(
                label=l.label,
                center=l.center,
                radius=l.radius,
                slices=l.occupied_slices(spec.volume_shape),
                study_uid=study_uid,
                series_uid=series_uids[0],
            )
            for l in lesions
        ],
        birads=record,
        vision_probe={"modality_letter": "B"},
    )
    return instances, truth


def shift_study_date(start: str, days: int) -> str:
    """Calendar arithmetic on YYYYMMDD strings."""
    d = date(int(start[:4]), int(start[4:6]), int(start[6:8])) + timedelta(days=days)
    return f"{d.year:04d}{d.month:02d}{d.day:02d}"


def generate_longitudinal_pair(
    spec: PhantomSpec,
) -> tuple[list[InstanceDataset], list[InstanceDataset], GroundTruth]:
    """Baseline/follow-up CT pair; new lesions appear only on follow-up."""
    spec.validate()
    if spec.profile != "longitudinal_ct":
        raise ValueError("spec profile must be 'longitudinal_ct'")
    if not 1 <= len(spec.new_lesions) <= 6:
        raise LesionOutOfBounds("longitudinal pairs need 1..6 new lesions")
    followup_slices = spec.followup_slices or spec.slices
    new_lesions = [
        LesionSpec(l.center, l.radius, l.label or f"New lesion {i + 1}")
        for i, l in enumerate(spec.new_lesions)
    ]

    base_shape = (spec.slices, spec.rows, spec.cols)
    follow_shape = (followup_slices, spec.rows, spec.cols)
    baseline_stored = _stored_ct(_ct_volume(spec.seed, base_shape, spec.lesions))
    followup_stored = _stored_ct(
        _ct_volume(spec.seed + 1, follow_shape, spec.lesions + new_lesions)
    )

    baseline_uid = make_uid(spec.seed, "long", "baseline", "study")
    followup_uid = make_uid(spec.seed, "long", "followup", "study")
    followup_date = shift_study_date(spec.study_date, spec.interval_days)
    baseline = _ct_series_instances(
        spec,
        baseline_uid,
        make_uid(spec.seed, "long", "baseline", "series"),
        baseline_stored,
        study_description="Baseline chest CT phantom",
        uid_salt="baseline",
    )
    followup = _ct_series_instances(
        spec,
        followup_uid,
        make_uid(spec.seed, "long", "followup", "series"),
        followup_stored,
        study_description="Follow-up chest CT phantom",
        study_date=followup_date,
        uid_salt="followup",
    )
    truth = GroundTruth(
        family_id=f"long_{spec.seed}",
        profile="longitudinal_ct",
        study_uids=[baseline_uid, followup_uid],
        patient_id=spec.patient_id,
        frame_shape=(spec.rows, spec.cols),
        structure={**_structure_entry(baseline), **_structure_entry(followup)},
        lesions=[
            LesionTruth(
                label=l.label,
                center=l.center,
                radius=l.radius,
                slices=l.occupied_slices(follow_shape),
                study_uid=followup_uid,
                series_uid=followup[0].string("SeriesInstanceUID"),
            )
            for l in new_lesions
        ],
        findings=[
            {
                "slice_index": int(round(l.center[2])),
                "x": float(l.center[0]),
                "y": float(l.center[1]),
            }
            for l in new_lesions
        ],
        vision_probe={"modality_letter": "A"},
        interval_days=spec.interval_days,
        slice_diff=followup_slices - spec.slices,
    )
    return baseline, followup, truth


# ---------------------------------------------------------------------------
# simulated readers and consensus


def simulate_reader_masks(
    true_mask: np.ndarray,
    readers: int,
    seed: int,
    max_jitter: int = 2,
    end_slice_drop: float = 0.3,
) -> list[np.ndarray]:
    """Per-reader contours: in-plane boundary jitter plus end-slice drops.

    Each reader dilates or erodes every slice by a radius drawn from
    {0..max_jitter} and drops each end slice of the lesion with
    probability ``end_slice_drop``.  With ``max_jitter=0`` and
    ``end_slice_drop=0`` every reader reproduces the true mask.
    """
    if not 1 <= readers <= 4:
        raise ValueError("readers must be in [1, 4]")
    rng = np.random.default_rng(seed)
    masks = []
    occupied = [int(z) for z in np.nonzero(true_mask.any(axis=(1, 2)))[0]]
    for _ in range(readers):
        radius = int(rng.integers(0, max_jitter + 1))
        dilate = bool(rng.integers(0, 2))
        mask = true_mask.copy()
        if radius > 0:
            footprint = _disk_footprint(radius)
            op = ndimage.binary_dilation if dilate else ndimage.binary_erosion
            for z in occupied:
                mask[z] = op(mask[z], structure=footprint)
        if occupied and end_slice_drop > 0:
            if rng.random() < end_slice_drop:
                mask[occupied[0]] = False
            if len(occupied) > 1 and rng.random() < end_slice_drop:
                mask[occupied[-1]] = False
        masks.append(mask)
    return masks


def _disk_footprint(radius: int) -> np.ndarray:
    ys, xs = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return xs**2 + ys**2 <= radius * radius


def consensus_mask(masks: list[np.ndarray]) -> np.ndarray:
    """Majority vote: voxels where the mean over readers is >= 0.5.

    Masks may differ in slice count; shorter ones contribute zeros over
    the union z-range.
    """
    if not masks:
        raise EmptyInput("no reader masks")
    in_plane = {m.shape[1:] for m in masks}
    if len(in_plane) != 1:
        raise ValueError("reader masks must share in-plane shape")
    depth = max(m.shape[0] for m in masks)
    padded = []
    for m in masks:
        if m.shape[0] < depth:
            pad = np.zeros((depth - m.shape[0],) + m.shape[1:], dtype=bool)
            m = np.concatenate([m.astype(bool), pad], axis=0)
        padded.append(m.astype(bool))
    votes = np.mean(np.stack(padded), axis=0)
    return votes >= 0.5


# ---------------------------------------------------------------------------
# archive layout


def write_archive(families: list[tuple[list[list[InstanceDataset]], GroundTruth]], out_dir) -> int:
    """Write ``<archive>/<study_uid>/<series_uid>/<sop_uid>.dcm`` plus one
    ``ground_truth.json`` per family (stored in its first study directory).

    Returns the number of instances written.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = 0
    for study_groups, truth in families:
        for instances in study_groups:
            for ds in instances:
                study_uid = ds.string("StudyInstanceUID")
                series_uid = ds.string("SeriesInstanceUID")
                sop_uid = ds.string("SOPInstanceUID")
                path = root / study_uid / series_uid / f"{sop_uid}.dcm"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(dicom.write_instance(ds))
                written += 1
        sidecar = root / truth.study_uids[0] / "ground_truth.json"
        sidecar.write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True))
    return written


def load_ground_truth(archive_dir) -> dict[str, GroundTruth]:
    """Sidecars keyed by every study UID they cover."""
    registry: dict[str, GroundTruth] = {}
    for path in sorted(Path(archive_dir).glob("*/ground_truth.json")):
        truth = GroundTruth.from_dict(json.loads(path.read_text()))
        for study_uid in truth.study_uids:
            registry[study_uid] = truth
    return registry


def default_archive_specs(seed: int) -> list[PhantomSpec]:
    """The stock desk-scale archive: 4 CT, 3 breast MR, 3 longitudinal."""
    rng = np.random.default_rng(seed)
    specs: list[PhantomSpec] = []
    rows = cols = 64

    def lung_point(z: int) -> tuple[float, float, float]:
        side = rng.integers(0, 2)
        cx = (0.32 if side == 0 else 0.68) * cols + float(rng.integers(-3, 4))
        cy = rows / 2 + float(rng.integers(-6, 7))
        return (cx, cy, float(z))

    for i in range(4):
        slices = 20 + 2 * i
        lesions = [
            LesionSpec(lung_point(int(rng.integers(6, slices - 6))), float(rng.integers(4, 7)))
            for _ in range(2)
        ]
        specs.append(
            PhantomSpec(
                seed=seed * 100 + i,
                profile="ct",
                rows=rows,
                cols=cols,
                slices=slices,
                patient_id=f"CT{i + 1:04d}",
                study_date=f"200{i}0115",
                lesions=lesions,
            )
        )
    for i in range(3):
        laterality = "left" if i % 2 == 0 else "right"
        quadrant = QUADRANTS[i % len(QUADRANTS)] if i != 2 else None
        record = BiradsRecord(
            laterality=laterality,
            lesion_count=1,
            birads_category=int(rng.integers(2, 6)),
            enhancement_present=bool(i % 2 == 0),
            quadrant=quadrant,
        )
        center = breast_lesion_center(rows, cols, 10, laterality, quadrant)
        specs.append(
            PhantomSpec(
                seed=seed * 100 + 10 + i,
                profile="breast_mr",
                rows=rows,
                cols=cols,
                slices=10,
                patient_id=f"MR{i + 1:04d}",
                study_date=f"200{i}0301",
                lesions=[LesionSpec(center, 4.0)],
                birads=record,
            )
        )
    for i in range(3):
        baseline_slices = 16 + 2 * i
        followup_slices = baseline_slices + (17 if i == 0 else (-4 if i == 1 else 6))
        count = i + 1
        new_lesions = [
            LesionSpec(
                lung_point(int(rng.integers(5, followup_slices - 5))),
                float(rng.integers(3, 6)),
            )
            for _ in range(count)
        ]
        specs.append(
            PhantomSpec(
                seed=seed * 100 + 20 + i,
                profile="longitudinal_ct",
                rows=rows,
                cols=cols,
                slices=baseline_slices,
                patient_id=f"LG{i + 1:04d}",
                study_date=f"200{i}0601",
                interval_days=365 + 30 * i,
                followup_slices=followup_slices,
                new_lesions=new_lesions,
            )
        )
    return specs


def generate_archive(seed: int, out_dir, specs: list[PhantomSpec] | None = None) -> int:
    """Generate and write a full archive; returns instance count."""
    specs = specs if specs is not None else default_archive_specs(seed)
    families = []
    for spec in specs:
        if spec.profile == "ct":
            instances, truth = generate_ct_study(spec)
            families.append(([instances], truth))
        elif spec.profile == "breast_mr":
            instances, truth = generate_breast_mr_study(spec)
            families.append(([instances], truth))
        else:
            baseline, followup, truth = generate_longitudinal_pair(spec)
            families.append(([baseline, followup], truth))
    return write_archive(families, out_dir)
