"""Exception types and exclusion reason strings."""

# Exclusion verdicts, worded as in the published cohort table.
NO_SIMULTANEOUS_SAGITTAL = "No simultaneous sagittal planes imaging"
NO_FULL_CYCLE = "No full opening-closing cycle"
SAGITTAL_MASKS_OUT = "Masks in the sagittal plane are out of the axial plane"
BOTH_CONDYLES_OUT = "Condyles in the sagittal plane are out of the axial plane"
RIGHT_CONDYLE_OUT = "The right condyle in the sagittal plane is out of the axial plane"
LEFT_CONDYLE_OUT = "The left condyle in the sagittal plane is out of the axial plane"
MISSING_FRAMES = "Too many frames without a condyle mask"


class TrajectoryError(Exception):
    """Base class for pipeline failures."""


class InvalidArgument(TrajectoryError, ValueError):
    pass


class DegenerateGeometry(TrajectoryError):
    pass


class CoverageError(TrajectoryError):
    """The condyles are not seen where the method needs them.

    ``reason`` carries the exclusion verdict when one applies.
    """

    def __init__(self, message, reason=None):
        super().__init__(message)
        self.reason = reason


class EmptyMaskError(TrajectoryError):
    pass


class InsufficientMaskError(TrajectoryError):
    pass


class NoMotionError(TrajectoryError):
    pass


class NoFullCycleError(TrajectoryError):
    pass


class DegenerateAmplitude(TrajectoryError):
    pass


class InvalidSpec(TrajectoryError, ValueError):
    pass


class ManifestError(TrajectoryError):
    pass
