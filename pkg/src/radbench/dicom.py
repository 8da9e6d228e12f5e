"""Constrained DICOM reader/writer and the study/series/instance index.

Scope is deliberately narrow: Part 10 files (128-byte zero preamble +
``DICM``), explicit VR little endian, uncompressed 16-bit grayscale
pixels.  Tags with a value representation outside the decoded set
round-trip as opaque bytes, so externally produced files survive a
parse/write cycle unchanged.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateSOPInstanceUID,
    InvariantViolation,
    MissingMagic,
    TruncatedElement,
    UnsupportedTransferSyntax,
)

PREAMBLE_SIZE = 128
MAGIC = b"DICM"
EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"

CT_IMAGE_STORAGE = "1.2.840.10008.5.1.4.1.1.2"
MR_IMAGE_STORAGE = "1.2.840.10008.5.1.4.1.1.4"
SECONDARY_CAPTURE_STORAGE = "1.2.840.10008.5.1.4.1.1.7"

#: VRs this module decodes into typed values.  Everything else is opaque.
DECODED_VRS = frozenset(
    {"UI", "SH", "LO", "DA", "TM", "CS", "IS", "DS", "US", "SS", "PN", "OW"}
)

# VRs that use the 2-byte length form in explicit VR little endian.
# Everything else (OB, OW, OF, SQ, UT, UN, unknown codes) uses the
# 2-byte-reserved + 4-byte length form.
_SHORT_FORM_VRS = frozenset(
    "AE AS AT CS DA DS DT FL FD IS LO LT PN SH SL SS ST TM UI UL US".split()
)

PIXEL_DATA_TAG = (0x7FE0, 0x0010)
TRANSFER_SYNTAX_TAG = (0x0002, 0x0010)

#: keyword -> (group, element, vr) for the tags this package manipulates.
TAG_DICT: dict[str, tuple[int, int, str]] = {
    "FileMetaInformationGroupLength": (0x0002, 0x0000, "UL"),
    "FileMetaInformationVersion": (0x0002, 0x0001, "OB"),
    "MediaStorageSOPClassUID": (0x0002, 0x0002, "UI"),
    "MediaStorageSOPInstanceUID": (0x0002, 0x0003, "UI"),
    "TransferSyntaxUID": (0x0002, 0x0010, "UI"),
    "SOPClassUID": (0x0008, 0x0016, "UI"),
    "SOPInstanceUID": (0x0008, 0x0018, "UI"),
    "StudyDate": (0x0008, 0x0020, "DA"),
    "StudyTime": (0x0008, 0x0030, "TM"),
    "Modality": (0x0008, 0x0060, "CS"),
    "StudyDescription": (0x0008, 0x1030, "LO"),
    "SeriesDescription": (0x0008, 0x103E, "LO"),
    "PatientName": (0x0010, 0x0010, "PN"),
    "PatientID": (0x0010, 0x0020, "LO"),
    "SliceThickness": (0x0018, 0x0050, "DS"),
    "StudyInstanceUID": (0x0020, 0x000D, "UI"),
    "SeriesInstanceUID": (0x0020, 0x000E, "UI"),
    "SeriesNumber": (0x0020, 0x0011, "IS"),
    "InstanceNumber": (0x0020, 0x0013, "IS"),
    "ImagePositionPatient": (0x0020, 0x0032, "DS"),
    "ImageOrientationPatient": (0x0020, 0x0037, "DS"),
    "SamplesPerPixel": (0x0028, 0x0002, "US"),
    "PhotometricInterpretation": (0x0028, 0x0004, "CS"),
    "Rows": (0x0028, 0x0010, "US"),
    "Columns": (0x0028, 0x0011, "US"),
    "PixelSpacing": (0x0028, 0x0030, "DS"),
    "BitsAllocated": (0x0028, 0x0100, "US"),
    "BitsStored": (0x0028, 0x0101, "US"),
    "HighBit": (0x0028, 0x0102, "US"),
    "PixelRepresentation": (0x0028, 0x0103, "US"),
    "WindowCenter": (0x0028, 0x1050, "DS"),
    "WindowWidth": (0x0028, 0x1051, "DS"),
    "RescaleIntercept": (0x0028, 0x1052, "DS"),
    "RescaleSlope": (0x0028, 0x1053, "DS"),
}

_KEYWORD_BY_TAG = {(g, e): kw for kw, (g, e, _vr) in TAG_DICT.items()}

DS_TOLERANCE = 1e-9


def keyword_for(group: int, element: int) -> str:
    return _KEYWORD_BY_TAG.get((group, element), f"({group:04X},{element:04X})")


def _pad_value(vr: str, value: bytes) -> bytes:
    if len(value) % 2 == 0:
        return value
    return value + (b"\x00" if vr in ("UI", "OB", "OW", "UN") else b" ")


def _format_decimal(v: float) -> str:
    # DS values are capped at 16 bytes; integers stay integral.
    if float(v) == int(v) and abs(v) < 1e15:
        return str(int(v))
    text = repr(float(v))
    if len(text) > 16:
        text = f"{float(v):.10g}"
    return text


@dataclass(frozen=True)
class TagValue:
    """One data element: tag, VR code, and the raw (padded) value bytes."""

    group: int
    element: int
    vr: str
    value: bytes

    @property
    def tag(self) -> tuple[int, int]:
        return (self.group, self.element)

    @property
    def keyword(self) -> str:
        return keyword_for(self.group, self.element)

    # -- constructors ------------------------------------------------

    @classmethod
    def from_keyword(cls, keyword: str, value) -> "TagValue":
        group, element, vr = TAG_DICT[keyword]
        return cls.encode(group, element, vr, value)

    @classmethod
    def encode(cls, group: int, element: int, vr: str, value) -> "TagValue":
        if vr in ("UI", "SH", "LO", "DA", "TM", "CS", "PN"):
            raw = str(value).encode("ascii")
        elif vr == "IS":
            raw = str(int(value)).encode("ascii")
        elif vr == "DS":
            if isinstance(value, (list, tuple)):
                raw = "\\".join(_format_decimal(v) for v in value).encode("ascii")
            else:
                raw = _format_decimal(float(value)).encode("ascii")
        elif vr == "US":
            raw = struct.pack("<H", int(value))
        elif vr == "SS":
            raw = struct.pack("<h", int(value))
        elif vr == "UL":
            raw = struct.pack("<I", int(value))
        else:
            raw = bytes(value)
        return cls(group, element, vr, _pad_value(vr, raw))

    # -- typed accessors ---------------------------------------------

    def as_string(self) -> str:
        return self.value.decode("ascii", errors="replace").rstrip(" \x00")

    def as_uid(self) -> str:
        return self.as_string()

    def as_uint(self) -> int:
        if self.vr == "US":
            return struct.unpack("<H", self.value[:2])[0]
        if self.vr == "UL":
            return struct.unpack("<I", self.value[:4])[0]
        return int(self.as_string())

    def as_int(self) -> int:
        if self.vr == "SS":
            return struct.unpack("<h", self.value[:2])[0]
        if self.vr == "US":
            return self.as_uint()
        return int(self.as_string())

    def as_decimal(self) -> float:
        return float(self.as_string().split("\\")[0])

    def as_decimals(self) -> tuple[float, ...]:
        text = self.as_string()
        if not text:
            return ()
        return tuple(float(part) for part in text.split("\\"))


@dataclass
class InstanceDataset:
    """Ordered tag map plus the optional decoded pixel frame.

    The PixelData element never appears in ``tags``; it is decoded into
    ``pixel_data`` on parse and re-encoded on write.
    """

    tags: dict[tuple[int, int], TagValue] = field(default_factory=dict)
    pixel_data: np.ndarray | None = None

    def set(self, keyword: str, value) -> None:
        tv = TagValue.from_keyword(keyword, value)
        self.tags[tv.tag] = tv

    def get(self, keyword: str) -> TagValue | None:
        group, element, _vr = TAG_DICT[keyword]
        return self.tags.get((group, element))

    def require(self, keyword: str) -> TagValue:
        tv = self.get(keyword)
        if tv is None:
            raise InvariantViolation(keyword, "required tag missing")
        return tv

    def string(self, keyword: str) -> str:
        return self.require(keyword).as_string()

    def uint(self, keyword: str) -> int:
        return self.require(keyword).as_uint()

    def decimal(self, keyword: str) -> float:
        return self.require(keyword).as_decimal()

    def decimals(self, keyword: str) -> tuple[float, ...]:
        return self.require(keyword).as_decimals()


def tag_values_equal(a: TagValue, b: TagValue) -> bool:
    if a.tag != b.tag or a.vr != b.vr:
        return False
    if a.vr == "DS":
        try:
            va, vb = a.as_decimals(), b.as_decimals()
        except ValueError:
            return a.value == b.value
        return len(va) == len(vb) and all(
            abs(x - y) <= DS_TOLERANCE for x, y in zip(va, vb)
        )
    return a.value == b.value


def datasets_equal(a: InstanceDataset, b: InstanceDataset) -> bool:
    """Field-by-field comparison; DS values compared to 1e-9 absolute."""
    if set(a.tags) != set(b.tags):
        return False
    if any(not tag_values_equal(a.tags[t], b.tags[t]) for t in a.tags):
        return False
    if (a.pixel_data is None) != (b.pixel_data is None):
        return False
    if a.pixel_data is not None:
        return bool(np.array_equal(a.pixel_data, b.pixel_data))
    return True


# ---------------------------------------------------------------------------
# parse


def parse_instance(data: bytes) -> InstanceDataset:
    """Decode one Part 10 file into an :class:`InstanceDataset`.

    Raises :class:`MissingMagic`, :class:`TruncatedElement`, or
    :class:`UnsupportedTransferSyntax`; each carries the byte offset at
    which decoding failed.
    """
    if len(data) < PREAMBLE_SIZE + 4:
        raise MissingMagic(len(data), "input shorter than preamble+magic")
    if data[PREAMBLE_SIZE : PREAMBLE_SIZE + 4] != MAGIC:
        raise MissingMagic(PREAMBLE_SIZE)

    ds = InstanceDataset()
    pixel_raw: bytes | None = None
    offset = PREAMBLE_SIZE + 4
    end = len(data)
    while offset < end:
        start = offset
        if end - offset < 8:
            raise TruncatedElement(start, "element header incomplete")
        group, element = struct.unpack_from("<HH", data, offset)
        vr = data[offset + 4 : offset + 6].decode("ascii", errors="replace")
        if not vr.isalpha() or not vr.isupper():
            raise TruncatedElement(start, f"invalid VR code {vr!r}")
        offset += 6
        if vr in _SHORT_FORM_VRS:
            length = struct.unpack_from("<H", data, offset)[0]
            offset += 2
        else:
            if end - offset < 6:
                raise TruncatedElement(start, "long-form length incomplete")
            length = struct.unpack_from("<I", data, offset + 2)[0]
            offset += 6
        if end - offset < length:
            raise TruncatedElement(start, "value runs past end of input")
        value = data[offset : offset + length]
        offset += length

        tv = TagValue(group, element, vr, value)
        if tv.tag == TRANSFER_SYNTAX_TAG:
            uid = tv.as_uid()
            if uid != EXPLICIT_VR_LITTLE_ENDIAN:
                raise UnsupportedTransferSyntax(start, uid)
        if tv.tag == PIXEL_DATA_TAG:
            pixel_raw = value
        else:
            ds.tags[tv.tag] = tv

    if pixel_raw is not None:
        ds.pixel_data = _decode_pixels(ds, pixel_raw)
    return ds


def _decode_pixels(ds: InstanceDataset, raw: bytes) -> np.ndarray:
    rows = ds.uint("Rows")
    cols = ds.uint("Columns")
    bits = ds.uint("BitsAllocated")
    if bits != 16:
        raise InvariantViolation("BitsAllocated", f"expected 16, got {bits}")
    expected = rows * cols * 2
    if len(raw) < expected:
        raise TruncatedElement(0, "pixel data shorter than Rows*Columns*2")
    signed = ds.uint("PixelRepresentation") == 1
    dtype = np.dtype("<i2") if signed else np.dtype("<u2")
    return np.frombuffer(raw[:expected], dtype=dtype).reshape(rows, cols).copy()


# ---------------------------------------------------------------------------
# write


def write_instance(ds: InstanceDataset) -> bytes:
    """Serialize to deterministic bytes: tags sorted by (group, element)."""
    _check_write_invariants(ds)
    out = bytearray(b"\x00" * PREAMBLE_SIZE)
    out += MAGIC
    elements = [ds.tags[t] for t in sorted(ds.tags)]
    if ds.pixel_data is not None:
        frame = np.ascontiguousarray(ds.pixel_data)
        raw = frame.astype("<i2" if frame.dtype.kind == "i" else "<u2").tobytes()
        elements.append(TagValue(*PIXEL_DATA_TAG, "OW", raw))
        elements.sort(key=lambda tv: tv.tag)
    for tv in elements:
        out += _encode_element(tv)
    return bytes(out)


def _encode_element(tv: TagValue) -> bytes:
    value = _pad_value(tv.vr, tv.value)
    head = struct.pack("<HH", tv.group, tv.element) + tv.vr.encode("ascii")
    if tv.vr in _SHORT_FORM_VRS:
        if len(value) > 0xFFFF:
            raise InvariantViolation(tv.keyword, "value too long for short form")
        return head + struct.pack("<H", len(value)) + value
    return head + b"\x00\x00" + struct.pack("<I", len(value)) + value


def _check_write_invariants(ds: InstanceDataset) -> None:
    if ds.get("SOPInstanceUID") is None:
        raise InvariantViolation("SOPInstanceUID", "required tag missing")
    if ds.pixel_data is None:
        return
    for keyword in (
        "Rows",
        "Columns",
        "BitsAllocated",
        "PixelRepresentation",
        "RescaleSlope",
        "RescaleIntercept",
    ):
        if ds.get(keyword) is None:
            raise InvariantViolation(keyword, "required with pixel data")
    if ds.uint("BitsAllocated") != 16:
        raise InvariantViolation("BitsAllocated", "only 16-bit samples supported")
    rows, cols = ds.uint("Rows"), ds.uint("Columns")
    if ds.pixel_data.shape != (rows, cols):
        raise InvariantViolation(
            "Rows", f"pixel array {ds.pixel_data.shape} != ({rows}, {cols})"
        )


def file_meta_tags(sop_class_uid: str, sop_instance_uid: str) -> list[TagValue]:
    """Standard group-0002 header with a correctly computed group length."""
    members = [
        TagValue.from_keyword("FileMetaInformationVersion", b"\x00\x01"),
        TagValue.from_keyword("MediaStorageSOPClassUID", sop_class_uid),
        TagValue.from_keyword("MediaStorageSOPInstanceUID", sop_instance_uid),
        TagValue.from_keyword("TransferSyntaxUID", EXPLICIT_VR_LITTLE_ENDIAN),
    ]
    group_length = sum(len(_encode_element(tv)) for tv in members)
    head = TagValue.from_keyword("FileMetaInformationGroupLength", group_length)
    return [head] + members


def make_uid(*parts) -> str:
    """Deterministic UID under the 2.25 (UUID-derived) root."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return "2.25." + str(int.from_bytes(digest[:16], "big"))


# ---------------------------------------------------------------------------
# index


@dataclass(frozen=True)
class InstanceRecord:
    sop_uid: str
    instance_number: int
    z_position: float


@dataclass(frozen=True)
class SeriesRecord:
    series_uid: str
    study_uid: str
    modality: str
    description: str
    series_number: int
    slice_thickness: float | None
    pixel_spacing: tuple[float, ...]
    image_orientation: tuple[float, ...]
    rows: int
    columns: int
    instances: tuple[InstanceRecord, ...]

    @property
    def instance_count(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class StudyRecord:
    study_uid: str
    study_date: str
    patient_id: str
    patient_name: str
    description: str
    modalities: tuple[str, ...]
    series_uids: tuple[str, ...]


@dataclass(frozen=True)
class StudyIndex:
    """Immutable study -> series -> ordered-instance hierarchy."""

    studies: dict[str, StudyRecord]
    series: dict[str, SeriesRecord]

    @property
    def instance_count(self) -> int:
        return sum(s.instance_count for s in self.series.values())


def build_index(instances: list[InstanceDataset]) -> StudyIndex:
    """Group instances by study/series and order slices by z position.

    Instances within a series are sorted by the z component of
    ImagePositionPatient, ties broken by InstanceNumber.
    """
    by_series: dict[str, list[InstanceDataset]] = {}
    series_study: dict[str, str] = {}
    for ds in instances:
        study_uid = ds.string("StudyInstanceUID")
        series_uid = ds.string("SeriesInstanceUID")
        ds.require("SOPInstanceUID")
        by_series.setdefault(series_uid, []).append(ds)
        series_study[series_uid] = study_uid

    series_map: dict[str, SeriesRecord] = {}
    study_series: dict[str, list[str]] = {}
    study_repr: dict[str, InstanceDataset] = {}
    for series_uid in sorted(by_series):
        members = by_series[series_uid]
        records = []
        seen: set[str] = set()
        for ds in members:
            sop = ds.string("SOPInstanceUID")
            if sop in seen:
                raise DuplicateSOPInstanceUID(sop)
            seen.add(sop)
            ipp = ds.get("ImagePositionPatient")
            z = ipp.as_decimals()[2] if ipp and len(ipp.as_decimals()) >= 3 else 0.0
            number = ds.get("InstanceNumber")
            records.append(
                (z, number.as_int() if number else 0, sop, ds)
            )
        records.sort(key=lambda r: (r[0], r[1]))
        first = records[0][3]
        spacing = first.get("PixelSpacing")
        orientation = first.get("ImageOrientationPatient")
        thickness = first.get("SliceThickness")
        number = first.get("SeriesNumber")
        description = first.get("SeriesDescription")
        series_map[series_uid] = SeriesRecord(
            series_uid=series_uid,
            study_uid=series_study[series_uid],
            modality=first.string("Modality") if first.get("Modality") else "",
            description=description.as_string() if description else "",
            series_number=number.as_int() if number else 0,
            slice_thickness=thickness.as_decimal() if thickness else None,
            pixel_spacing=spacing.as_decimals() if spacing else (),
            image_orientation=orientation.as_decimals() if orientation else (),
            rows=first.uint("Rows") if first.get("Rows") else 0,
            columns=first.uint("Columns") if first.get("Columns") else 0,
            instances=tuple(
                InstanceRecord(sop, num, z) for z, num, sop, _ in records
            ),
        )
        study_series.setdefault(series_study[series_uid], []).append(series_uid)
        study_repr.setdefault(series_study[series_uid], first)

    studies: dict[str, StudyRecord] = {}
    for study_uid in sorted(study_series):
        uids = sorted(
            study_series[study_uid],
            key=lambda u: (series_map[u].series_number, u),
        )
        first = study_repr[study_uid]
        date = first.get("StudyDate")
        pid = first.get("PatientID")
        pname = first.get("PatientName")
        desc = first.get("StudyDescription")
        studies[study_uid] = StudyRecord(
            study_uid=study_uid,
            study_date=date.as_string() if date else "",
            patient_id=pid.as_string() if pid else "",
            patient_name=pname.as_string() if pname else "",
            description=desc.as_string() if desc else "",
            modalities=tuple(
                sorted({series_map[u].modality for u in uids if series_map[u].modality})
            ),
            series_uids=tuple(uids),
        )
    return StudyIndex(studies=studies, series=series_map)
