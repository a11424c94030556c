"""Domain types: dimensions, specialist features, slots, detections, manifests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Union

import numpy as np

from .errors import ValidationError
from .geometry import BBox, BitMask, centroid


class Dimension(str, Enum):
    FACE_IDENTITY = "face_identity"
    APPEARANCE = "appearance"
    POSE = "pose"
    EXPRESSION = "expression"


DIMENSIONS: tuple[Dimension, ...] = tuple(Dimension)

VALID_SUBJECT_COUNTS = (2, 3, 4)


class EmbeddingVector:
    """Finite real feature vector (compared with cosine similarity)."""

    __slots__ = ("values", "_norm", "_unit")

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding contains non-finite entries")
        arr.setflags(write=False)
        self.values = arr
        self._norm = None
        self._unit = None

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.values))
        return self._norm

    @property
    def unit(self) -> np.ndarray:
        if self._unit is None:
            self._unit = self.values / self.norm
        return self._unit

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return isinstance(other, EmbeddingVector) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"EmbeddingVector(dim={self.values.size})"


class KeypointSet:
    """Skeleton keypoints in crop-pixel coordinates: rows of (x, y, visible, conf)."""

    __slots__ = ("points", "crop_width", "crop_height", "_cache")

    def __init__(self, points, crop_width: float, crop_height: float):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4 or arr.shape[0] == 0:
            raise ValidationError("keypoints must be a non-empty (K, 4) array")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("keypoints contain non-finite entries")
        if np.any(arr[:, 3] < 0) or np.any(arr[:, 3] > 1):
            raise ValidationError("keypoint confidences must lie in [0, 1]")
        if crop_width <= 0 or crop_height <= 0:
            raise ValidationError("crop dimensions must be positive")
        arr.setflags(write=False)
        self.points = arr
        self.crop_width = float(crop_width)
        self.crop_height = float(crop_height)
        self._cache: dict = {}

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def visible_mask(self, vis_conf: float) -> np.ndarray:
        """Keypoints that are flagged visible and confident enough to use."""
        key = ("vis", vis_conf)
        if key not in self._cache:
            self._cache[key] = (self.points[:, 2] > 0) & (self.points[:, 3] >= vis_conf)
        return self._cache[key]

    def __eq__(self, other):
        return (
            isinstance(other, KeypointSet)
            and np.array_equal(self.points, other.points)
            and self.crop_width == other.crop_width
            and self.crop_height == other.crop_height
        )

    def __repr__(self):
        return f"KeypointSet(K={self.count}, crop={self.crop_width}x{self.crop_height})"


FeaturePayload = Union[EmbeddingVector, KeypointSet]


@dataclass(frozen=True)
class FeatureRecord:
    """Producer-declared specialist output for one (subject, dimension)."""

    valid: bool
    payload: Optional[FeaturePayload] = None

    def __post_init__(self):
        if self.valid and self.payload is None:
            raise ValidationError("record declared valid must carry a payload")


@dataclass(frozen=True, eq=False)
class GtSlot:
    slot_index: int
    mask: BitMask
    box: BBox
    features: Mapping[Dimension, FeatureRecord] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Detection:
    index: int
    mask: BitMask
    box: BBox
    confidence: float
    features: Mapping[Dimension, FeatureRecord] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.confidence):
            raise ValidationError("detection confidence must be finite")


def slot_sort_key(mask: BitMask, box: BBox) -> tuple[float, float, int]:
    """Left-to-right ordering: centroid x, then centroid y, then box x1."""
    cx, cy = centroid(mask)
    return (cx, cy, box.x1)


@dataclass(frozen=True, eq=False)
class InstanceManifest:
    instance_id: str
    width: int
    height: int
    gt_slots: tuple[GtSlot, ...]
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        n = len(self.gt_slots)
        if n not in VALID_SUBJECT_COUNTS:
            raise ValidationError(
                f"instance {self.instance_id!r}: subject count {n} not in {VALID_SUBJECT_COUNTS}"
            )
        for slot in self.gt_slots:
            if slot.mask.width != self.width or slot.mask.height != self.height:
                raise ValidationError(
                    f"instance {self.instance_id!r} slot {slot.slot_index}: "
                    "mask does not fit the image size"
                )
        for det in self.detections:
            if det.mask.width != self.width or det.mask.height != self.height:
                raise ValidationError(
                    f"instance {self.instance_id!r} detection {det.index}: "
                    "mask does not fit the image size"
                )
        indices = [s.slot_index for s in self.gt_slots]
        if indices != list(range(1, n + 1)):
            raise ValidationError(
                f"instance {self.instance_id!r}: slot indices must be 1..{n} in order"
            )

    @property
    def n_slots(self) -> int:
        return len(self.gt_slots)

    @property
    def image_area(self) -> int:
        return self.width * self.height

    def with_detections(self, detections) -> "InstanceManifest":
        return replace(self, detections=tuple(detections))


@dataclass(frozen=True)
class DimensionThresholds:
    cons: float
    conf: float

    def __post_init__(self):
        if not (np.isfinite(self.cons) and np.isfinite(self.conf)):
            raise ValidationError("thresholds must be finite")


@dataclass(frozen=True)
class ThresholdTable:
    """Per-dimension consistency/confusion binarization thresholds."""

    values: Mapping[Dimension, DimensionThresholds]

    def __post_init__(self):
        missing = [d.value for d in DIMENSIONS if d not in self.values]
        if missing:
            raise ValidationError(f"threshold table missing dimensions: {missing}")

    def cons(self, d: Dimension) -> float:
        return self.values[d].cons

    def conf(self, d: Dimension) -> float:
        return self.values[d].conf


@dataclass(frozen=True)
class HumanLabel:
    instance_id: str
    model_id: str
    dimension: Dimension
    i: int
    j: int
    kind: str  # "consistency" | "confusion"
    label: bool

    def __post_init__(self):
        if self.kind not in ("consistency", "confusion"):
            raise ValidationError(f"unknown label kind {self.kind!r}")
        if (self.kind == "consistency") != (self.i == self.j):
            raise ValidationError(
                f"label kind {self.kind!r} disagrees with indices ({self.i}, {self.j})"
            )

    @property
    def key(self):
        return (self.instance_id, self.model_id, self.dimension, self.i, self.j)
