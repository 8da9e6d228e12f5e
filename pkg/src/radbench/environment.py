"""Loaded benchmark world: the read-only store plus ground-truth sidecars."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pacs, phantom
from .errors import UnknownUID
from .geometry import sphere_slice_mask


@dataclass(frozen=True)
class Environment:
    store: pacs.Store
    ground_truth: dict[str, phantom.GroundTruth]
    archive_path: str

    def truth_for_study(self, study_uid: str) -> phantom.GroundTruth:
        try:
            return self.ground_truth[study_uid]
        except KeyError:
            raise UnknownUID("study", study_uid) from None

    def families(self, profile: str) -> list[phantom.GroundTruth]:
        seen: dict[str, phantom.GroundTruth] = {}
        for truth in self.ground_truth.values():
            if truth.profile == profile:
                seen[truth.family_id] = truth
        return [seen[k] for k in sorted(seen)]


def load_environment(archive_dir) -> Environment:
    root = Path(archive_dir)
    return Environment(
        store=pacs.load_archive(root),
        ground_truth=phantom.load_ground_truth(root),
        archive_path=str(root),
    )


def lesion_slice_mask(
    lesion: phantom.LesionTruth, slice_index: int, frame_shape: tuple[int, int]
) -> np.ndarray:
    return sphere_slice_mask(lesion.center, lesion.radius, slice_index, frame_shape)


def representative_slice(
    lesion: phantom.LesionTruth, frame_shape: tuple[int, int]
) -> int:
    """The lesion's widest in-plane slice (ties resolve to the lowest)."""
    best_slice, best_area = lesion.slices[0], -1
    for z in lesion.slices:
        area = int(lesion_slice_mask(lesion, z, frame_shape).sum())
        if area > best_area:
            best_slice, best_area = z, area
    return best_slice
