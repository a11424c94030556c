import math

import numpy as np
import pytest

from multibind.errors import FeatureError
from multibind.matching import match_instance
from multibind.model import Dimension, FeatureRecord, KeypointSet
from multibind.similarity import (
    SimilarityConfig,
    build_bundle,
    cosine_sim,
    oks_sim,
)

from conftest import basis_features, embed, make_manifest

FACE = Dimension.FACE_IDENTITY
POSE = Dimension.POSE


class TestCosine:
    def test_identity(self):
        assert cosine_sim([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        assert cosine_sim([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            0.7071067811865475, abs=1e-15
        )

    def test_zero_norm_raises(self):
        with pytest.raises(FeatureError):
            cosine_sim([0.0, 0.0], [1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(FeatureError):
            cosine_sim([1.0], [1.0, 0.0])

    def test_scale_invariance(self, rng):
        for _ in range(20):
            u = rng.normal(size=6)
            v = rng.normal(size=6)
            assert cosine_sim(u, v) == pytest.approx(cosine_sim(3.7 * u, v), abs=1e-12)


def kp_two(points, crop=100.0):
    """Two-keypoint skeleton padded in a (K=2) config."""
    return KeypointSet(np.asarray(points, dtype=float), crop, crop)


class TestOks:
    def test_identical_skeletons(self):
        cfg = SimilarityConfig()
        pts = np.full((17, 4), [10.0, 20.0, 1.0, 0.9])
        a = KeypointSet(pts, 50.0, 50.0)
        assert oks_sim(a, a, cfg) == 1.0

    def test_all_invisible_raises(self):
        cfg = SimilarityConfig()
        pts = np.zeros((17, 4))
        pts[:, :2] = 10.0
        a = KeypointSet(pts, 50.0, 50.0)
        b = KeypointSet(np.full((17, 4), [10.0, 10.0, 1.0, 0.9]), 50.0, 50.0)
        with pytest.raises(FeatureError):
            oks_sim(a, b, cfg)

    def test_single_displaced_term(self):
        # two visible keypoints, one coincident, one displaced by d:
        # OKS = (1 + exp(-d^2 / (2 s^2 kappa^2))) / 2
        kappa = 0.2
        cfg = SimilarityConfig(kappas=(kappa, kappa))
        crop = 100.0
        # visible keypoints span a 40x40 normalized 0.4x0.4 box -> s^2 = 0.16
        b = kp_two([[10.0, 10.0, 1.0, 0.9], [50.0, 50.0, 1.0, 0.9]], crop)
        d_pix = 8.0
        a = kp_two([[10.0, 10.0, 1.0, 0.9], [50.0 + d_pix, 50.0, 1.0, 0.9]], crop)
        d = d_pix / crop
        s2 = 0.4 * 0.4
        expected = (1.0 + math.exp(-(d ** 2) / (2 * s2 * kappa ** 2))) / 2.0
        got = oks_sim(a, b, cfg)  # scale from b (the GT side)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_low_confidence_counts_invisible(self):
        kappa = 0.2
        cfg = SimilarityConfig(kappas=(kappa, kappa), vis_conf=0.3)
        b = kp_two([[10.0, 10.0, 1.0, 0.9], [50.0, 50.0, 1.0, 0.9]])
        a = kp_two([[10.0, 10.0, 1.0, 0.9], [90.0, 50.0, 1.0, 0.1]])  # second too unsure
        # only the coincident keypoint is jointly visible
        assert oks_sim(a, b, cfg) == 1.0

    def test_symmetric_flag_averages_scales(self):
        kappa = 0.2
        cfg = SimilarityConfig(kappas=(kappa, kappa))
        small = kp_two([[10.0, 10.0, 1.0, 0.9], [30.0, 30.0, 1.0, 0.9]])  # s = 0.2
        big = kp_two([[10.0, 10.0, 1.0, 0.9], [70.0, 70.0, 1.0, 0.9]])  # s = 0.6
        asym_ab = oks_sim(small, big, cfg)
        asym_ba = oks_sim(big, small, cfg)
        sym_ab = oks_sim(small, big, cfg, symmetric=True)
        sym_ba = oks_sim(big, small, cfg, symmetric=True)
        assert asym_ab != asym_ba  # column-scale convention is order dependent
        assert sym_ab == pytest.approx(sym_ba, abs=1e-15)

    def test_keypoint_count_mismatch(self):
        cfg = SimilarityConfig(kappas=(0.2, 0.2))
        a = kp_two([[1, 1, 1, 0.9], [2, 2, 1, 0.9]])
        b = KeypointSet(np.full((3, 4), [1.0, 1.0, 1.0, 0.9]), 100.0, 100.0)
        with pytest.raises(FeatureError):
            oks_sim(a, b, cfg)


def pose_record(offset, visible=True):
    pts = np.zeros((17, 4))
    pts[:, 0] = 50.0
    pts[:, 1] = 50.0
    corners = ((30.0, 30.0), (70.0, 30.0), (30.0, 70.0), (70.0, 70.0))
    for (x, y), idx in zip(corners, (5, 6, 11, 12)):
        pts[idx] = (x + offset[0], y + offset[1], 1.0 if visible else 0.0, 0.9)
    return FeatureRecord(valid=True, payload=KeypointSet(pts, 100.0, 100.0))


class TestBuildBundle:
    def test_perfect_reconstruction_zero_delta(self):
        n = 3
        gt = basis_features(n)
        for i in range(1, n + 1):
            gt[i][POSE] = pose_record((6.0 * i, 4.0 * i))
        m = make_manifest(n=n, gt_features=gt, det_features=gt)
        a = match_instance(m)
        for dim in Dimension:
            bundle = build_bundle(m, a, dim)
            assert bundle is not None
            assert bundle.rows == (1, 2, 3) and bundle.cols == (1, 2, 3)
            np.testing.assert_allclose(bundle.delta, 0.0, atol=0)
            # GT self-similarity diagonal is exactly 1
            for r, c in bundle.diag_positions():
                assert bundle.s_gt[r, c] == 1.0

    def test_identity_swap_rows(self):
        gt = {1: {FACE: embed([1.0, 0.0])}, 2: {FACE: embed([0.0, 1.0])}}
        gen = {1: {FACE: embed([0.0, 1.0])}, 2: {FACE: embed([0.0, 1.0])}}
        m = make_manifest(n=2, gt_features=gt, det_features=gen)
        a = match_instance(m)
        bundle = build_bundle(m, a, FACE)
        np.testing.assert_allclose(bundle.s_gen[0], [0.0, 1.0], atol=0)
        np.testing.assert_allclose(bundle.s_gt[0], [1.0, 0.0], atol=0)
        np.testing.assert_allclose(bundle.delta[0], [-1.0, 1.0], atol=0)

    def test_invalid_gt_slot_excluded_from_columns(self):
        gt = basis_features(3)
        gt[2][FACE] = FeatureRecord(valid=False)  # no face found on GT side
        m = make_manifest(n=3, gt_features=gt, det_features=basis_features(3))
        bundle = build_bundle(m, match_instance(m), FACE)
        assert bundle.cols == (1, 3)
        assert bundle.rows == (1, 3)
        assert bundle.s_gt.shape == (2, 2)

    def test_invalid_gen_feature_drops_row_only(self):
        gt = basis_features(3)
        gen = basis_features(3)
        gen[2][FACE] = FeatureRecord(valid=False)
        m = make_manifest(n=3, gt_features=gt, det_features=gen)
        bundle = build_bundle(m, match_instance(m), FACE)
        assert bundle.cols == (1, 2, 3)
        assert bundle.rows == (1, 3)
        assert bundle.dropped_rows == ((2, "invalid generated-crop feature"),)

    def test_zero_norm_gen_embedding_drops_row(self):
        gt = basis_features(2)
        gen = basis_features(2)
        gen[1][FACE] = embed([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        m = make_manifest(n=2, gt_features=gt, det_features=gen)
        bundle = build_bundle(m, match_instance(m), FACE)
        assert bundle.rows == (2,)

    def test_no_valid_gt_slots_skips_dimension(self):
        m = make_manifest(n=2, gt_features={}, det_features=basis_features(2))
        assert build_bundle(m, match_instance(m), FACE) is None

    def test_unmatched_slot_shrinks_rows_not_cols(self):
        gt = basis_features(3)
        m = make_manifest(n=3, gt_features=gt, det_features=basis_features(3),
                          confidences={2: 0.05})
        bundle = build_bundle(m, match_instance(m), FACE)
        assert bundle.cols == (1, 2, 3)
        assert bundle.rows == (1, 3)

    def test_pose_s_gt_symmetric(self):
        gt = {i: {POSE: pose_record((8.0 * i, 3.0 * i))} for i in range(1, 4)}
        m = make_manifest(n=3, gt_features=gt, det_features=gt)
        bundle = build_bundle(m, match_instance(m), POSE)
        np.testing.assert_allclose(bundle.s_gt, bundle.s_gt.T, atol=1e-15)

    def test_pose_disjoint_visibility_drops_row(self):
        # gen skeleton of slot 1 shares no visible keypoint with GT slots
        def half_visible(vis_idx):
            pts = np.zeros((17, 4))
            pts[:, :2] = 50.0
            for idx in vis_idx:
                pts[idx] = (40.0 + idx, 40.0, 1.0, 0.9)
            return FeatureRecord(valid=True, payload=KeypointSet(pts, 100.0, 100.0))

        gt = {1: {POSE: half_visible((5, 6))}, 2: {POSE: half_visible((5, 6))}}
        gen = {1: {POSE: half_visible((11, 12))}, 2: {POSE: half_visible((5, 6))}}
        m = make_manifest(n=2, gt_features=gt, det_features=gen)
        bundle = build_bundle(m, match_instance(m), POSE)
        assert bundle.rows == (2,)
        assert bundle.dropped_rows[0][0] == 1
