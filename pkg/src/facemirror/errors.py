"""Exception types shared across the engine."""


class FaceMirrorError(Exception):
    """Base class for all engine errors."""


# --- model container / model structure ---

class MalformedContainer(FaceMirrorError):
    """Model container file is structurally invalid."""


class DimensionMismatch(FaceMirrorError):
    """Array sizes are inconsistent with each other or with a manifest."""


class NonOrthonormalBasis(FaceMirrorError):
    """A PCA basis fails the unit-norm / orthogonality check."""


class NonPositiveSigma(FaceMirrorError):
    """A per-component standard deviation is zero or negative."""


class TooManyComponents(FaceMirrorError):
    """Requested more basis components than the vertex count allows."""


class CoefficientLengthMismatch(FaceMirrorError):
    """Coefficient vector length does not match the model basis."""


class NoColorModel(FaceMirrorError):
    """Color synthesis requested on a model without a color model."""


class IoFailure(FaceMirrorError):
    """Underlying file write/read failed."""


# --- landmarks ---

class DegenerateEyes(FaceMirrorError):
    """Eye centers coincide; alignment is undefined."""


class MalformedRecord(FaceMirrorError):
    """A landmark stream line is not a valid record."""

    def __init__(self, line_number: int, detail: str = ""):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {detail}" if detail else f"line {line_number}")


class WrongPointCount(MalformedRecord):
    """A landmark record does not carry exactly 68 points."""


class NonMonotonicTimestamp(MalformedRecord):
    """Timestamps in a landmark stream decreased."""


# --- fitting ---

class RankDeficient(FaceMirrorError):
    """Pose system is rank deficient (coplanar or collinear model points)."""


class NumericalFailure(FaceMirrorError):
    """A numerical step produced an unusable result."""


class SolverNonConvergence(FaceMirrorError):
    """Active-set solver exceeded its iteration budget."""


class EmptyCalibration(FaceMirrorError):
    """Calibration was requested with no frames."""


# --- collective ---

class GroupUnknown(FaceMirrorError):
    """Contribution addressed to an unregistered collective group."""


class LengthMismatch(FaceMirrorError):
    """Contribution vector length does not match the group state."""


class EmptyGroup(FaceMirrorError):
    """Requested a collective face for a group with no contributions."""


# --- render ---

class UnsupportedFormat(FaceMirrorError):
    """Mesh export format is not one of the supported formats."""


# --- service ---

class InvalidPhase(FaceMirrorError):
    """Command not allowed in the session's current phase."""


class UnknownModelTag(FaceMirrorError):
    """No loaded model carries the requested tag."""


class UnknownCommand(FaceMirrorError):
    """Command name is not part of the protocol."""


class BindFailure(FaceMirrorError):
    """Server could not bind its listen address."""


class ModelLoadFailure(FaceMirrorError):
    """Server could not load the model directory at startup."""
