import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibind.errors import GeometryError, IngestError
from multibind.geometry import (
    BBox,
    BitMask,
    centroid,
    mask_iou,
    mask_overlap_min,
    rle_decode,
    rle_encode,
)


def mask_of(pts, w=2, h=2):
    return BitMask.from_pixels(w, h, pts)


class TestMaskIoU:
    def test_identical_masks(self):
        a = mask_of([(0, 0), (1, 1)])
        assert mask_iou(a, a) == 1.0

    def test_disjoint(self):
        assert mask_iou(mask_of([(0, 0)]), mask_of([(1, 1)])) == 0.0

    def test_hand_counted(self):
        a = mask_of([(0, 0), (0, 1)])
        b = mask_of([(0, 1), (1, 1)])
        assert mask_iou(a, b) == pytest.approx(1 / 3, abs=0)

    def test_empty_union_is_zero(self):
        e = BitMask.empty(2, 2)
        assert mask_iou(e, e) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(GeometryError):
            mask_iou(mask_of([(0, 0)]), BitMask.empty(3, 2))


class TestOverlapMin:
    def test_nested(self):
        inner = mask_of([(0, 0)], 3, 3)
        outer = mask_of([(0, 0), (1, 0), (1, 1)], 3, 3)
        assert mask_overlap_min(inner, outer) == 1.0

    def test_disjoint(self):
        assert mask_overlap_min(mask_of([(0, 0)]), mask_of([(1, 1)])) == 0.0

    def test_hand_counted(self):
        a = mask_of([(0, 0), (0, 1)])
        b = mask_of([(0, 1), (1, 1), (1, 0)])
        assert mask_overlap_min(a, b) == 0.5

    def test_empty_operand_raises(self):
        with pytest.raises(GeometryError):
            mask_overlap_min(BitMask.empty(2, 2), mask_of([(0, 0)]))


class TestCentroid:
    def test_single_pixel(self):
        m = BitMask.from_pixels(8, 8, [(3, 5)])
        assert centroid(m) == (3.0, 5.0)

    def test_symmetric_pair(self):
        m = BitMask.from_pixels(4, 2, [(0, 0), (2, 0)])
        assert centroid(m) == (1.0, 0.0)

    def test_full_grid(self):
        m = BitMask.from_array(np.ones((2, 4), dtype=bool))
        assert centroid(m) == (1.5, 0.5)

    def test_empty_raises(self):
        with pytest.raises(GeometryError):
            centroid(BitMask.empty(4, 4))


class TestBBox:
    def test_area(self):
        assert BBox(1, 2, 4, 6).area == 12

    @pytest.mark.parametrize("coords", [(2, 0, 2, 3), (0, 5, 4, 5), (3, 0, 1, 2)])
    def test_degenerate_rejected(self, coords):
        with pytest.raises(GeometryError):
            BBox(*coords)


@st.composite
def random_mask(draw, max_side=24):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    bits = draw(st.binary(min_size=w * h, max_size=w * h))
    arr = (np.frombuffer(bits, dtype=np.uint8).reshape(h, w) % 2).astype(bool)
    return BitMask.from_array(arr)


class TestMaskProperties:
    @settings(max_examples=60, deadline=None)
    @given(random_mask(), random_mask())
    def test_iou_symmetric_and_bounded_by_overlap(self, a, b):
        if not a.same_shape(b):
            return
        assert mask_iou(a, b) == mask_iou(b, a)
        if not a.is_empty() and not b.is_empty():
            assert mask_iou(a, b) <= mask_overlap_min(a, b) + 1e-15

    @settings(max_examples=60, deadline=None)
    @given(random_mask())
    def test_self_iou(self, a):
        if a.is_empty():
            assert mask_iou(a, a) == 0.0
        else:
            assert mask_iou(a, a) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(random_mask())
    def test_area_matches_dense(self, a):
        assert a.area == int(a.to_array().sum())


class TestRle:
    @settings(max_examples=60, deadline=None)
    @given(random_mask(), st.booleans())
    def test_roundtrip(self, m, compress):
        assert rle_decode(rle_encode(m, compress=compress)) == m

    def test_known_column_major(self):
        # 2x2 with left column set: Fortran order (1,1,0,0) -> leading-zero run 0
        m = BitMask.from_pixels(2, 2, [(0, 0), (0, 1)])
        assert rle_encode(m)["counts"] == [0, 2, 2]

    def test_bad_total_rejected(self):
        with pytest.raises(IngestError):
            rle_decode({"size": [2, 2], "counts": [1, 1]})

    def test_negative_run_rejected(self):
        with pytest.raises(IngestError):
            rle_decode({"size": [2, 2], "counts": [-1, 5]})

    def test_compressed_string_roundtrip_large(self):
        rng = np.random.default_rng(7)
        arr = rng.random((37, 53)) > 0.6
        m = BitMask.from_array(arr)
        enc = rle_encode(m, compress=True)
        assert isinstance(enc["counts"], str)
        assert rle_decode(enc) == m


class TestBitMaskInvariants:
    def test_padding_bits_must_be_zero(self):
        bad = np.full((1, 1), 0xFF, dtype=np.uint8)
        with pytest.raises(GeometryError):
            BitMask(5, 1, bad)

    def test_immutable(self):
        m = BitMask.empty(4, 4)
        with pytest.raises(AttributeError):
            m.width = 8

    def test_tight_box(self):
        m = BitMask.from_pixels(8, 8, [(2, 3), (5, 6)])
        assert m.tight_box() == BBox(2, 3, 6, 7)
