"""Exception hierarchy shared across the package.

Every error carries a stable ``code`` (the class name) that the tool
bridge serializes into failed tool results.
"""

from __future__ import annotations


class RadBenchError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class DicomError(RadBenchError):
    """Base class for DICOM encode/decode errors."""


class MissingMagic(DicomError):
    def __init__(self, offset: int, message: str = "missing DICM magic"):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class TruncatedElement(DicomError):
    def __init__(self, offset: int, message: str = "truncated data element"):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnsupportedTransferSyntax(DicomError):
    def __init__(self, offset: int, uid: str):
        super().__init__(f"unsupported transfer syntax {uid!r} at byte offset {offset}")
        self.offset = offset
        self.uid = uid


class InvariantViolation(DicomError):
    def __init__(self, keyword: str, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"dataset invariant violated on {keyword}{detail}")
        self.keyword = keyword


class DuplicateSOPInstanceUID(DicomError):
    def __init__(self, sop_uid: str):
        super().__init__(f"duplicate SOPInstanceUID {sop_uid}")
        self.sop_uid = sop_uid


class LesionOutOfBounds(RadBenchError):
    pass


class EmptyInput(RadBenchError):
    pass


class NoInstancesFound(RadBenchError):
    pass


class UnknownUID(RadBenchError):
    def __init__(self, level: str, uid: str):
        super().__init__(f"unknown {level} UID {uid!r}")
        self.level = level
        self.uid = uid


class SliceOutOfRange(RadBenchError):
    def __init__(self, slice_index: int, total: int):
        super().__init__(f"slice index {slice_index} outside [0, {total})")
        self.slice_index = slice_index
        self.total = total


class NonPositiveWidth(RadBenchError):
    pass


class NonPositiveZoom(RadBenchError):
    pass


class UnknownPipeline(RadBenchError):
    pass


class InvalidShape(RadBenchError):
    pass


class ToolNotVisible(RadBenchError):
    pass


class SchemaValidationError(RadBenchError):
    pass


class UnknownTaskType(RadBenchError):
    pass


class NoFindingOnSlice(RadBenchError):
    pass


class InsufficientArchive(RadBenchError):
    def __init__(self, profile: str):
        super().__init__(f"archive has no study with profile {profile!r}")
        self.profile = profile


class UnboundPlaceholder(RadBenchError):
    def __init__(self, name: str):
        super().__init__(f"unbound template placeholder {{{name}}}")
        self.name = name


class UnknownSubtype(RadBenchError):
    pass


class AgentTransportError(RadBenchError):
    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries


class EmptyReference(RadBenchError):
    pass


class EmptyMask(RadBenchError):
    pass


class EmptyTruth(RadBenchError):
    pass


class MalformedReport(RadBenchError):
    pass


class MissingScorecard(RadBenchError):
    pass
