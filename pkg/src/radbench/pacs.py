"""Read-only study store: archive loading, metadata queries, frame fetch."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dicom
from .dicom import StudyIndex
from .errors import DicomError, NoInstancesFound, SliceOutOfRange, UnknownUID

QUERY_LEVELS = ("study", "series-list", "series", "instance")
SAMPLE_INSTANCES_PER_SERIES = 3


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray
    rescale_slope: float
    rescale_intercept: float
    pixel_spacing: tuple[float, ...]

    def to_hu(self) -> np.ndarray:
        return self.pixels.astype(np.float64) * self.rescale_slope + self.rescale_intercept


@dataclass(frozen=True)
class Store:
    """Immutable after load; safe for concurrent readers."""

    index: StudyIndex
    frames: dict[tuple[str, int], Frame]
    datasets: dict[str, dicom.InstanceDataset]
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def study(self, study_uid: str) -> dicom.StudyRecord:
        try:
            return self.index.studies[study_uid]
        except KeyError:
            raise UnknownUID("study", study_uid) from None

    def series(self, series_uid: str) -> dicom.SeriesRecord:
        try:
            return self.index.series[series_uid]
        except KeyError:
            raise UnknownUID("series", series_uid) from None


def load_archive(path) -> Store:
    """Parse every ``.dcm`` under ``path`` and build the store.

    Per-file parse errors are collected as warnings, never fatal; an
    archive yielding zero instances raises :class:`NoInstancesFound`.
    """
    root = Path(path)
    instances: list[dicom.InstanceDataset] = []
    warnings: list[str] = []
    for file in sorted(root.rglob("*.dcm")):
        try:
            instances.append(dicom.parse_instance(file.read_bytes()))
        except DicomError as exc:
            warnings.append(f"{file}: {exc}")
    if not instances:
        raise NoInstancesFound(f"no parseable instances under {root}")
    index = dicom.build_index(instances)

    datasets = {ds.string("SOPInstanceUID"): ds for ds in instances}
    frames: dict[tuple[str, int], Frame] = {}
    for series_uid, series in index.series.items():
        for slice_index, record in enumerate(series.instances):
            ds = datasets[record.sop_uid]
            if ds.pixel_data is None:
                continue
            frames[(series_uid, slice_index)] = Frame(
                pixels=ds.pixel_data,
                rescale_slope=ds.decimal("RescaleSlope"),
                rescale_intercept=ds.decimal("RescaleIntercept"),
                pixel_spacing=ds.decimals("PixelSpacing"),
            )
    return Store(
        index=index, frames=frames, datasets=datasets, warnings=tuple(warnings)
    )


def _series_summary(store: Store, series_uid: str, samples: bool = False) -> dict:
    series = store.series(series_uid)
    out = {
        "SeriesInstanceUID": series.series_uid,
        "SeriesDescription": series.description,
        "Modality": series.modality,
        "SeriesNumber": series.series_number,
        "InstanceCount": series.instance_count,
    }
    if samples:
        out["SampleSOPInstanceUIDs"] = [
            r.sop_uid for r in series.instances[:SAMPLE_INSTANCES_PER_SERIES]
        ]
    return out


def query_metadata(store: Store, level: str, **uids) -> dict:
    """Structured metadata at one of the four query levels.

    Keys are DICOM keywords; the returned key set per level is part of
    the external contract (agents parse these strings).
    """
    if level not in QUERY_LEVELS:
        raise ValueError(f"unknown query level {level!r}")
    if level in ("study", "series-list"):
        study = store.study(uids["study_uid"])
        return {
            "StudyInstanceUID": study.study_uid,
            "StudyDate": study.study_date,
            "PatientID": study.patient_id,
            "PatientName": study.patient_name,
            "Modality": list(study.modalities),
            "StudyDescription": study.description,
            "Series": [
                _series_summary(store, uid, samples=level == "series-list")
                for uid in study.series_uids
            ],
        }
    if level == "series":
        series = store.series(uids["series_uid"])
        return {
            "SeriesInstanceUID": series.series_uid,
            "Modality": series.modality,
            "SeriesDescription": series.description,
            "SeriesNumber": series.series_number,
            "InstanceCount": series.instance_count,
            "SliceThickness": series.slice_thickness,
            "PixelSpacing": list(series.pixel_spacing),
            "ImageOrientationPatient": list(series.image_orientation),
            "Rows": series.rows,
            "Columns": series.columns,
        }
    # instance level: the full supported tag set
    store.study(uids["study_uid"])
    series = store.series(uids["series_uid"])
    sop_uid = uids["sop_uid"]
    if sop_uid not in store.datasets:
        raise UnknownUID("instance", sop_uid)
    ds = store.datasets[sop_uid]
    out: dict = {}
    for tag in sorted(ds.tags):
        tv = ds.tags[tag]
        if tv.group == 0x0002 or tv.vr not in dicom.DECODED_VRS:
            continue
        if tv.vr in ("US", "SS"):
            value: object = tv.as_int()
        elif tv.vr == "IS":
            value = tv.as_int()
        elif tv.vr == "DS":
            decimals = tv.as_decimals()
            value = list(decimals) if len(decimals) > 1 else decimals[0]
        else:
            value = tv.as_string()
        out[tv.keyword] = value
    return out


def fetch_frame(store: Store, series_uid: str, slice_index: int) -> Frame:
    series = store.series(series_uid)
    if not 0 <= slice_index < series.instance_count:
        raise SliceOutOfRange(slice_index, series.instance_count)
    return store.frames[(series_uid, slice_index)]
