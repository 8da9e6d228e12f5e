from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radbench import dicom, phantom
from radbench.errors import (
    DuplicateSOPInstanceUID,
    InvariantViolation,
    MissingMagic,
    TruncatedElement,
    UnsupportedTransferSyntax,
)

from brute_force import dump_elements


def _ct_instances(seed=3, lesions=((20, 32, 10, 5.0),)):
    spec = phantom.PhantomSpec(
        seed=seed,
        profile="ct",
        lesions=[phantom.LesionSpec((x, y, z), r) for x, y, z, r in lesions],
    )
    instances, _ = phantom.generate_ct_study(spec)
    return instances


def test_round_trip_identity():
    for ds in _ct_instances()[:5]:
        again = dicom.parse_instance(dicom.write_instance(ds))
        assert dicom.datasets_equal(ds, again)


def test_write_is_deterministic():
    ds = _ct_instances()[0]
    assert dicom.write_instance(ds) == dicom.write_instance(ds)


def test_short_input_is_missing_magic():
    with pytest.raises(MissingMagic) as err:
        dicom.parse_instance(b"\x00" * 100)
    assert err.value.offset == 100


def test_wrong_magic_reports_offset_128():
    data = b"\x00" * 128 + b"NOPE" + b"\x00" * 16
    with pytest.raises(MissingMagic) as err:
        dicom.parse_instance(data)
    assert err.value.offset == 128


def test_truncated_element_reports_offset():
    good = dicom.write_instance(_ct_instances()[0])
    with pytest.raises(TruncatedElement) as err:
        dicom.parse_instance(good[:200])
    assert err.value.offset >= 132


def test_unsupported_transfer_syntax():
    ds = dicom.InstanceDataset()
    ds.set("SOPInstanceUID", "1.2.3")
    ds.set("TransferSyntaxUID", "1.2.840.10008.1.2")  # implicit VR LE
    data = dicom.write_instance(ds)
    with pytest.raises(UnsupportedTransferSyntax):
        dicom.parse_instance(data)


def test_pixel_data_element_length():
    ds = _ct_instances()[0]
    elements = dump_elements(dicom.write_instance(ds))
    pixel = [e for e in elements if (e[0], e[1]) == (0x7FE0, 0x0010)]
    assert len(pixel) == 1
    assert len(pixel[0][3]) == 64 * 64 * 2 == 8192


def test_missing_rows_with_pixels_is_invariant_violation():
    ds = _ct_instances()[0]
    del ds.tags[dicom.TAG_DICT["Rows"][:2]]
    with pytest.raises(InvariantViolation) as err:
        dicom.write_instance(ds)
    assert err.value.keyword == "Rows"


def test_missing_sop_uid_is_invariant_violation():
    ds = dicom.InstanceDataset()
    ds.set("Modality", "CT")
    with pytest.raises(InvariantViolation) as err:
        dicom.write_instance(ds)
    assert err.value.keyword == "SOPInstanceUID"


def test_unknown_tags_round_trip_as_opaque_bytes():
    ds = dicom.InstanceDataset()
    ds.set("SOPInstanceUID", "1.2.3")
    # OB and an unregistered private tag survive untouched
    ds.tags[(0x0009, 0x0010)] = dicom.TagValue(0x0009, 0x0010, "OB", b"\x01\x02\x03\x04")
    ds.tags[(0x0009, 0x0011)] = dicom.TagValue(0x0009, 0x0011, "FD", b"\x00" * 8)
    again = dicom.parse_instance(dicom.write_instance(ds))
    assert again.tags[(0x0009, 0x0010)].value == b"\x01\x02\x03\x04"
    assert again.tags[(0x0009, 0x0011)].vr == "FD"


def test_ds_tolerance_in_dataset_equality():
    a = dicom.InstanceDataset()
    a.set("SOPInstanceUID", "1.2.3")
    a.tags[dicom.TAG_DICT["RescaleSlope"][:2]] = dicom.TagValue.encode(
        0x0028, 0x1053, "DS", 1.0
    )
    b = dicom.InstanceDataset()
    b.set("SOPInstanceUID", "1.2.3")
    b.tags[dicom.TAG_DICT["RescaleSlope"][:2]] = dicom.TagValue(
        0x0028, 0x1053, "DS", b"1.0000000000"
    )
    assert dicom.datasets_equal(a, b)


def test_multivalued_decimals_split_on_backslash():
    tv = dicom.TagValue.encode(0x0028, 0x0030, "DS", (0.7, 0.7))
    assert tv.as_decimals() == (0.7, 0.7)
    ipp = dicom.TagValue(0x0020, 0x0032, "DS", b"0\\0\\12.5 ")
    assert ipp.as_decimals() == (0.0, 0.0, 12.5)


# ---------------------------------------------------------------------------
# build_index


def test_empty_index():
    index = dicom.build_index([])
    assert index.studies == {} and index.series == {}


def test_index_counts_and_slice_order():
    instances = _ct_instances()
    index = dicom.build_index(instances)
    assert len(index.studies) == 1
    study = next(iter(index.studies.values()))
    ct_series = [
        index.series[uid] for uid in study.series_uids
        if index.series[uid].modality == "CT"
    ]
    assert len(ct_series) == 1
    series = ct_series[0]
    assert series.instance_count == 20
    zs = [rec.z_position for rec in series.instances]
    assert zs == sorted(zs)
    assert zs[0] == min(zs)


def test_index_permutation_invariant():
    instances = _ct_instances()
    index_a = dicom.build_index(instances)
    for seed in range(3):
        shuffled = list(instances)
        random.Random(seed).shuffle(shuffled)
        index_b = dicom.build_index(shuffled)
        assert index_a == index_b


def test_duplicate_sop_uid_rejected():
    instances = _ct_instances()
    with pytest.raises(DuplicateSOPInstanceUID):
        dicom.build_index(instances + [instances[0]])


def test_index_tie_break_on_instance_number():
    datasets = []
    for number in (2, 1):
        ds = dicom.InstanceDataset()
        ds.set("SOPInstanceUID", f"1.2.3.{number}")
        ds.set("StudyInstanceUID", "1.2.100")
        ds.set("SeriesInstanceUID", "1.2.200")
        ds.set("Modality", "CT")
        ds.set("InstanceNumber", number)
        ds.set("ImagePositionPatient", (0.0, 0.0, 5.0))
        datasets.append(ds)
    index = dicom.build_index(datasets)
    series = index.series["1.2.200"]
    assert [r.instance_number for r in series.instances] == [1, 2]


# ---------------------------------------------------------------------------
# property tests

_uid = st.from_regex(r"1\.2\.[0-9]{1,8}(\.[0-9]{1,6}){0,3}", fullmatch=True)
_text = st.text(
    alphabet=st.sampled_from("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-^"),
    min_size=0,
    max_size=16,
)


@st.composite
def _datasets(draw):
    ds = dicom.InstanceDataset()
    ds.set("SOPInstanceUID", draw(_uid))
    ds.set("StudyInstanceUID", draw(_uid))
    ds.set("SeriesInstanceUID", draw(_uid))
    ds.set("Modality", draw(st.sampled_from(["CT", "MR", "SC"])))
    ds.set("PatientName", draw(_text))
    ds.set("InstanceNumber", draw(st.integers(0, 9999)))
    ds.set(
        "ImagePositionPatient",
        tuple(
            draw(
                st.floats(
                    min_value=-1e4,
                    max_value=1e4,
                    allow_nan=False,
                    allow_infinity=False,
                )
            )
            for _ in range(3)
        ),
    )
    if draw(st.booleans()):
        rows = draw(st.integers(1, 16))
        cols = draw(st.integers(1, 16))
        pixels = draw(
            st.integers(0, 2**16 - 1).map(
                lambda s: (
                    np.random.default_rng(s).integers(
                        0, 2**16, size=(rows, cols), dtype=np.uint16
                    )
                )
            )
        )
        ds.set("Rows", rows)
        ds.set("Columns", cols)
        ds.set("BitsAllocated", 16)
        ds.set("BitsStored", 16)
        ds.set("HighBit", 15)
        ds.set("PixelRepresentation", 0)
        ds.set("RescaleIntercept", -1024.0)
        ds.set("RescaleSlope", 1.0)
        ds.pixel_data = pixels
    return ds


@settings(max_examples=60, deadline=None)
@given(_datasets())
def test_parse_write_round_trip_property(ds):
    assert dicom.datasets_equal(ds, dicom.parse_instance(dicom.write_instance(ds)))


def test_round_trip_over_phantom_corpus(env):
    for sop_uid, ds in list(env.store.datasets.items())[::7]:
        assert dicom.datasets_equal(ds, dicom.parse_instance(dicom.write_instance(ds)))
