"""Exception hierarchy for the multibind engine."""


class MultibindError(Exception):
    """Base class for all engine errors."""


class GeometryError(MultibindError):
    """Mask/box geometry violation (dimension mismatch, empty operand)."""


class IngestError(MultibindError):
    """Malformed input file. Carries the offending field path when known."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(IngestError):
    """Well-formed input that violates a semantic invariant."""


class FeatureError(MultibindError):
    """Unusable specialist feature (zero-norm embedding, empty keypoint support)."""


class CalibrationError(MultibindError):
    """Calibration/AUC input problem (one-class labels, unresolved joins)."""


class AggregationError(MultibindError):
    """Cross-model aggregation cannot proceed (e.g. empty fair intersection)."""
