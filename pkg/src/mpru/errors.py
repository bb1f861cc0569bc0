"""Exception hierarchy shared by all mpru modules."""


class MpruError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MpruError, ValueError):
    """Input data violates a format or value constraint."""


class NegativeEntry(ValidationError):
    """A confidence entry is below zero."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"entry {index} is negative: {value!r}")


class EntryAboveOne(ValidationError):
    """A confidence entry exceeds one."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"entry {index} exceeds 1: {value!r}")


class SumOutOfTolerance(ValidationError):
    """Confidence entries do not sum to one within the ingest tolerance."""

    def __init__(self, total: float, tolerance: float):
        self.total = total
        self.tolerance = tolerance
        super().__init__(
            f"entries sum to {total!r}, off by {abs(total - 1.0):.3e} "
            f"(tolerance {tolerance:.3e})"
        )


class DuplicateId(ValidationError):
    """Two records in one prediction set share an id."""


class ForgetClassOutOfRange(MpruError, ValueError):
    """The forget class id is not addressable in the target label space."""


class EmptyForgetSet(MpruError):
    """No records carry the forget class; nothing to fit on."""


class ZeroCentroid(MpruError):
    """Centroid has (numerically) zero norm; no projection direction exists."""


class RankDeficiency(MpruError):
    """Orthonormalization produced fewer basis vectors than required."""


class AssumptionViolated(MpruError):
    """Fit diagnostics fall below the required confidence thresholds."""


class DimensionMismatch(MpruError, ValueError):
    """Vector or set dimensions disagree with what an operation expects."""


class EmptyRestriction(MpruError, ValueError):
    """Accuracy restriction selects no records."""


class IdMismatch(MpruError):
    """Paired prediction sets do not share the same ids in the same order."""


class ParseError(MpruError):
    """A prediction file line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class InconsistentDimensions(ParseError):
    """A record's probability count disagrees with the rest of the file."""


class VersionMismatch(MpruError):
    """Artifact format version is not supported."""


class SchemaError(MpruError):
    """Artifact document violates its schema."""


class NoDataForLabel(MpruError):
    """Training data contains no samples for a requested label."""
