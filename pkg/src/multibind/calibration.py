"""Threshold calibration by F1 maximization and ROC-AUC meta-evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import CalibrationError
from .model import Dimension, HumanLabel


@dataclass(frozen=True)
class ScoredLabel:
    score: float
    label: bool
    key: tuple  # (instance_id, model_id, dimension, i, j)

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise CalibrationError(f"non-finite score for {self.key}")


@dataclass(frozen=True)
class CalibrationResult:
    dimension: Optional[Dimension]
    kind: str  # consistency | confusion
    threshold: float
    f1_at_threshold: float
    n_pos: int
    n_neg: int


def _f1(scores: np.ndarray, labels: np.ndarray, t: float) -> float:
    pred = scores >= t
    tp = int(np.count_nonzero(pred & labels))
    fp = int(np.count_nonzero(pred & ~labels))
    fn = int(np.count_nonzero(~pred & labels))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def candidate_thresholds(scores: np.ndarray) -> list[float]:
    """Midpoints between consecutive distinct sorted scores, plus both infinities."""
    uniq = np.unique(scores)
    mids = [(a + b) / 2.0 for a, b in zip(uniq[:-1], uniq[1:])]
    return [-math.inf, *mids, math.inf]


def calibrate_threshold(
    samples: list[ScoredLabel], dimension: Optional[Dimension] = None, kind: str = "consistency"
) -> CalibrationResult:
    """Pick the score >= t rule maximizing F1; ties go to the smallest t."""
    if not samples:
        raise CalibrationError("no samples to calibrate on")
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError(f"labels are one-class (pos={n_pos}, neg={n_neg})")
    best_t = None
    best_f1 = -1.0
    for t in candidate_thresholds(scores):
        f1 = _f1(scores, labels, t)
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    return CalibrationResult(
        dimension=dimension,
        kind=kind,
        threshold=float(best_t),
        f1_at_threshold=float(best_f1),
        n_pos=n_pos,
        n_neg=n_neg,
    )


def roc_auc(samples: list[ScoredLabel]) -> float:
    """ROC-AUC via the rank statistic, ties counted as one half."""
    if not samples:
        raise CalibrationError("no samples for AUC")
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError(f"labels are one-class (pos={n_pos}, neg={n_neg})")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def collect_scores(
    bundles: dict, labels: list[HumanLabel], kind: str, strict: bool = False
) -> tuple[list[ScoredLabel], list[HumanLabel]]:
    """Join labels of one kind against computed delta cells.

    `bundles` maps (instance_id, model_id, Dimension) -> SimilarityBundle.
    Returns (scored, unresolved); in strict mode unresolved labels raise.
    """
    scored = []
    unresolved = []
    for lb in labels:
        if lb.kind != kind:
            continue
        bundle = bundles.get((lb.instance_id, lb.model_id, lb.dimension))
        if bundle is None:
            unresolved.append(lb)
            continue
        if lb.i not in bundle.rows or lb.j not in bundle.cols:
            unresolved.append(lb)
            continue
        r = bundle.rows.index(lb.i)
        c = bundle.cols.index(lb.j)
        scored.append(ScoredLabel(score=float(bundle.delta[r, c]), label=lb.label, key=lb.key))
    if unresolved and strict:
        raise CalibrationError(
            f"{len(unresolved)} labels did not resolve to a delta cell "
            f"(first: {unresolved[0].key})"
        )
    scored.sort(key=lambda s: s.key)
    return scored, unresolved
