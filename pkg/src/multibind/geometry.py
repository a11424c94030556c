"""Mask and box geometry: packed bitmasks, IoU/overlap, centroids, COCO RLE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, IngestError
from . import kernels


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: [x1, x2) x [y1, y2)."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise GeometryError(f"degenerate box {(self.x1, self.y1, self.x2, self.y2)}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height


class BitMask:
    """Immutable binary occupancy grid, packed row-major (MSB-first bytes)."""

    __slots__ = ("width", "height", "_packed", "_area", "_centroid")

    def __init__(self, width: int, height: int, packed: np.ndarray):
        if width <= 0 or height <= 0:
            raise GeometryError(f"mask dimensions must be positive, got {width}x{height}")
        stride = (width + 7) // 8
        if packed.shape != (height, stride) or packed.dtype != np.uint8:
            raise GeometryError("packed buffer does not match mask dimensions")
        # Padding bits beyond `width` must be zero so popcounts equal pixel counts.
        pad = stride * 8 - width
        if pad and np.any(packed[:, -1] & ((1 << pad) - 1)):
            raise GeometryError("non-zero padding bits in packed mask")
        packed = np.ascontiguousarray(packed)
        packed.setflags(write=False)
        self.width = width
        self.height = height
        self._packed = packed
        self._area = -1
        self._centroid = None

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitMask":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise GeometryError("mask array must be 2-D")
        h, w = arr.shape
        packed = np.packbits(arr.astype(bool), axis=1)
        return cls(w, h, packed)

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "BitMask":
        arr = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            arr[y, x] = True
        return cls.from_array(arr)

    @classmethod
    def empty(cls, width: int, height: int) -> "BitMask":
        return cls.from_array(np.zeros((height, width), dtype=bool))

    def to_array(self) -> np.ndarray:
        return np.unpackbits(self._packed, axis=1, count=self.width).astype(bool)

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    @property
    def area(self) -> int:
        if self._area < 0:
            object.__setattr__(self, "_area", kernels.popcount(self._packed.reshape(-1)))
        return self._area

    def is_empty(self) -> bool:
        return self.area == 0

    def same_shape(self, other: "BitMask") -> bool:
        return self.width == other.width and self.height == other.height

    def tight_box(self) -> BBox:
        if self.is_empty():
            raise GeometryError("tight_box of empty mask")
        arr = self.to_array()
        ys, xs = np.nonzero(arr)
        return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)

    def __eq__(self, other):
        return (
            isinstance(other, BitMask)
            and self.same_shape(other)
            and np.array_equal(self._packed, other._packed)
        )

    def __hash__(self):
        return hash((self.width, self.height, self._packed.tobytes()))

    def __repr__(self):
        return f"BitMask({self.width}x{self.height}, area={self.area})"

    def __setattr__(self, name, value):
        if name not in ("_area", "_centroid") and hasattr(self, "_area"):
            raise AttributeError("BitMask is immutable")
        object.__setattr__(self, name, value)


def _check_shapes(a: BitMask, b: BitMask):
    if not a.same_shape(b):
        raise GeometryError(
            f"mask dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def intersection_area(a: BitMask, b: BitMask) -> int:
    _check_shapes(a, b)
    return kernels.popcount_and(a.packed.reshape(-1), b.packed.reshape(-1))


def union_area(a: BitMask, b: BitMask) -> int:
    _check_shapes(a, b)
    return kernels.popcount_or(a.packed.reshape(-1), b.packed.reshape(-1))


def mask_iou(a: BitMask, b: BitMask) -> float:
    """Intersection over union; 0.0 when the union is empty."""
    inter = intersection_area(a, b)
    union = union_area(a, b)
    return inter / union if union else 0.0


def mask_overlap_min(a: BitMask, b: BitMask) -> float:
    """Intersection over the smaller mask's area. Both operands must be non-empty."""
    _check_shapes(a, b)
    if a.is_empty() or b.is_empty():
        raise GeometryError("mask_overlap_min requires non-empty masks")
    return intersection_area(a, b) / min(a.area, b.area)


def centroid(m: BitMask) -> tuple[float, float]:
    """Mean (x, y) over occupied pixels."""
    if m._centroid is None:
        count, sx, sy = kernels.centroid_sums(m.packed, m.width)
        if count == 0:
            raise GeometryError("centroid of empty mask")
        m._centroid = (sx / count, sy / count)
    return m._centroid


# ---------------------------------------------------------------------------
# COCO-style RLE (column-major runs, optional LEB128-like string compression)
# ---------------------------------------------------------------------------

def rle_decode(rle: dict) -> BitMask:
    """Decode {'size': [h, w], 'counts': list|str} into a BitMask."""
    try:
        h, w = (int(v) for v in rle["size"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"bad RLE size field: {exc}", "mask.size")
    counts = rle.get("counts")
    if isinstance(counts, str):
        counts = _rle_string_decode(counts)
    if not isinstance(counts, (list, tuple)):
        raise IngestError("RLE counts must be a list or string", "mask.counts")
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise IngestError("negative run length", "mask.counts")
    if counts.sum() != h * w:
        raise IngestError(
            f"run lengths sum to {counts.sum()}, expected {h * w}", "mask.counts"
        )
    vals = np.zeros(counts.size, dtype=np.uint8)
    vals[1::2] = 1
    flat = np.repeat(vals, counts)
    arr = flat.reshape((h, w), order="F")
    return BitMask.from_array(arr)


def rle_encode(mask: BitMask, compress: bool = False) -> dict:
    """Encode a BitMask as COCO-style column-major RLE."""
    flat = mask.to_array().ravel(order="F").astype(np.int8)
    if flat.size == 0:
        counts = []
    else:
        changes = np.nonzero(np.diff(flat))[0] + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        counts = np.diff(bounds).tolist()
        if flat[0] == 1:
            counts = [0] + counts
    out = {"size": [mask.height, mask.width], "counts": counts}
    if compress:
        out["counts"] = _rle_string_encode(counts)
    return out


def _rle_string_encode(counts) -> str:
    chars = []
    for i, cnt in enumerate(counts):
        x = int(cnt)
        if i > 2:
            x -= int(counts[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            chars.append(chr(c + 48))
    return "".join(chars)


def _rle_string_decode(s: str) -> list[int]:
    counts: list[int] = []
    pos = 0
    n = len(s)
    while pos < n:
        x = 0
        k = 0
        more = True
        while more:
            if pos >= n:
                raise IngestError("truncated compressed RLE string", "mask.counts")
            c = ord(s[pos]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            pos += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * (k + 1))
            k += 1
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts
