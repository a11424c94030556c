import math

import numpy as np
import pytest

from multibind.calibration import (
    ScoredLabel,
    calibrate_threshold,
    candidate_thresholds,
    collect_scores,
    roc_auc,
)
from multibind.errors import CalibrationError
from multibind.model import Dimension, HumanLabel
from multibind.similarity import SimilarityBundle

from oracles import auc_oracle, f1_oracle

FACE = Dimension.FACE_IDENTITY


def samples(scores, labels):
    return [
        ScoredLabel(score=float(s), label=bool(l), key=("i", "m", FACE, k, k))
        for k, (s, l) in enumerate(zip(scores, labels))
    ]


class TestCalibrate:
    def test_separable_midpoint(self):
        res = calibrate_threshold(samples([0.9, 0.1], [1, 0]))
        assert res.threshold == 0.5
        assert res.f1_at_threshold == 1.0
        assert (res.n_pos, res.n_neg) == (1, 1)

    def test_worked_three_sample_case(self):
        res = calibrate_threshold(samples([0.9, 0.8, 0.3], [1, 0, 1]))
        assert res.f1_at_threshold == pytest.approx(0.8, abs=0)
        # best F1 first reached with every sample predicted positive
        assert res.threshold == -math.inf

    def test_planted_threshold_recovery(self, rng):
        scores = rng.normal(size=1000)
        labels = scores >= 0.2
        res = calibrate_threshold(samples(scores, labels))
        assert res.f1_at_threshold == 1.0
        pred = scores >= res.threshold
        assert np.array_equal(pred, labels)

    def test_one_class_rejected(self):
        with pytest.raises(CalibrationError):
            calibrate_threshold(samples([0.1, 0.2], [1, 1]))
        with pytest.raises(CalibrationError):
            calibrate_threshold(samples([0.1, 0.2], [0, 0]))

    def test_returned_f1_maximal_over_sweep(self, rng):
        for _ in range(30):
            n = int(rng.integers(4, 40))
            scores = rng.normal(size=n)
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            res = calibrate_threshold(samples(scores, labels))
            for t in candidate_thresholds(scores):
                assert res.f1_at_threshold >= f1_oracle(scores.tolist(), labels.tolist(), t)

    def test_tie_breaks_toward_smallest_threshold(self):
        # two candidates reach the same F1; the smaller must win
        res = calibrate_threshold(samples([1.0, 2.0, 3.0, 4.0], [0, 1, 0, 1]))
        sweep = [
            (t, f1_oracle([1.0, 2.0, 3.0, 4.0], [0, 1, 0, 1], t))
            for t in candidate_thresholds(np.array([1.0, 2.0, 3.0, 4.0]))
        ]
        best = max(f1 for _, f1 in sweep)
        smallest_best = min(t for t, f1 in sweep if f1 == best)
        assert res.threshold == smallest_best

    def test_monotone_transform_preserves_predictions(self, rng):
        scores = rng.normal(size=200)
        labels = rng.random(200) < 0.4
        if labels.all() or not labels.any():
            labels[0] = True
            labels[1] = False
        res = calibrate_threshold(samples(scores, labels))
        pred = scores >= res.threshold
        warped = np.exp(scores)  # strictly increasing
        res_w = calibrate_threshold(samples(warped, labels))
        pred_w = warped >= res_w.threshold
        assert np.array_equal(pred, pred_w)


class TestAuc:
    def test_perfectly_separated(self):
        assert roc_auc(samples([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])) == 1.0

    def test_worked_case(self):
        assert roc_auc(samples([0.9, 0.8, 0.3], [1, 0, 1])) == 0.5

    def test_all_ties(self):
        assert roc_auc(samples([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])) == 0.5

    def test_one_class_rejected(self):
        with pytest.raises(CalibrationError):
            roc_auc(samples([0.5, 0.6], [1, 1]))

    def test_matches_pairwise_oracle(self, rng):
        for _ in range(25):
            n = 200
            scores = np.round(rng.normal(size=n), 2)  # rounding forces ties
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            got = roc_auc(samples(scores, labels))
            want = auc_oracle(scores.tolist(), labels.tolist())
            assert got == pytest.approx(want, abs=1e-12)


class TestCollectScores:
    def _bundle(self, rows, cols, delta):
        delta = np.asarray(delta, dtype=float)
        return SimilarityBundle(
            dimension=FACE, rows=tuple(rows), cols=tuple(cols),
            s_gt=np.zeros_like(delta), s_gen=delta, delta=delta,
        )

    def _label(self, i, j, instance="a", model="m", label=True):
        kind = "consistency" if i == j else "confusion"
        return HumanLabel(instance_id=instance, model_id=model, dimension=FACE,
                          i=i, j=j, kind=kind, label=label)

    def test_join_diagonal(self):
        bundles = {("a", "m", FACE): self._bundle((1, 2), (1, 2), [[0.3, 0.0], [0.0, -0.1]])}
        scored, unresolved = collect_scores(bundles, [self._label(1, 1)], "consistency")
        assert not unresolved
        assert scored[0].score == 0.3

    def test_unresolved_reported_not_dropped_silently(self):
        bundles = {("a", "m", FACE): self._bundle((2,), (1, 2), [[0.1, 0.2]])}
        labels = [self._label(1, 1), self._label(2, 2)]
        scored, unresolved = collect_scores(bundles, labels, "consistency")
        assert len(scored) == 1 and len(unresolved) == 1
        assert unresolved[0].i == 1

    def test_strict_mode_raises(self):
        labels = [self._label(1, 1)]
        with pytest.raises(CalibrationError):
            collect_scores({}, labels, "consistency", strict=True)

    def test_kind_filter_and_counts(self):
        bundles = {("a", "m", FACE): self._bundle((1, 2), (1, 2), [[0.3, 0.6], [0.2, -0.1]])}
        labels = [self._label(1, 1), self._label(1, 2), self._label(2, 1, label=False)]
        cons, _ = collect_scores(bundles, labels, "consistency")
        conf, _ = collect_scores(bundles, labels, "confusion")
        assert len(cons) == 1 and len(conf) == 2
        assert {s.score for s in conf} == {0.6, 0.2}
