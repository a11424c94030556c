"""Detection-to-slot assignment: filter, de-duplicate, rank-pair or Hungarian.

The default rule keeps confident, large-enough, de-duplicated detections;
with at least N survivors the top-N by area are paired to GT slots by
left-to-right rank. With fewer survivors a Hungarian assignment maximizes
total mask IoU over the surviving detections, with no IoU floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import mask_iou, mask_overlap_min
from .model import Detection, GtSlot, InstanceManifest, slot_sort_key


@dataclass(frozen=True)
class MatchConfig:
    det_conf: float = 0.3  # detector confidence floor
    alpha: float = 0.35  # area factor for the adaptive size threshold
    dup_thresh: float = 0.5  # min-overlap ratio at which two masks are duplicates

    def __post_init__(self):
        for name in ("det_conf", "alpha", "dup_thresh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class Assignment:
    """Slot-to-detection pairing for one instance."""

    pairs: tuple[tuple[int, int], ...]  # (slot_index, detection_index), sorted by slot
    ious: tuple[float, ...]  # mask IoU per pair, parallel to `pairs`
    n_slots: int

    @property
    def matched(self) -> frozenset:
        return frozenset(i for i, _ in self.pairs)

    @property
    def mean_iou(self) -> float | None:
        return float(np.mean(self.ious)) if self.ious else None

    def detection_for(self, slot_index: int) -> int | None:
        for i, j in self.pairs:
            if i == slot_index:
                return j
        return None


def filter_detections(
    dets: list[Detection], gt: list[GtSlot], cfg: MatchConfig, image_area: int
) -> list[Detection]:
    """Drop low-confidence, empty-mask, and too-small detections."""
    if not gt:
        raise ValueError("GT slot list must be non-empty")
    min_gt_area = min(s.box.area for s in gt) / image_area
    t_area = cfg.alpha * min_gt_area
    kept = []
    for det in dets:
        if det.confidence < cfg.det_conf:
            continue
        if det.mask.is_empty():
            continue
        if det.box.area / image_area < t_area:
            continue
        kept.append(det)
    return kept


def _area_order(dets):
    # Decreasing box area, ties by decreasing confidence; stable beyond that.
    return sorted(dets, key=lambda d: (-d.box.area, -d.confidence))


def dedup_detections(dets: list[Detection], dup_thresh: float) -> list[Detection]:
    """Greedy duplicate removal in decreasing-area order."""
    kept: list[Detection] = []
    for det in _area_order(dets):
        if all(mask_overlap_min(det.mask, k.mask) < dup_thresh for k in kept):
            kept.append(det)
    return kept


def _rank_pair(kept: list[Detection], gt: list[GtSlot]) -> list[tuple[int, int]]:
    top = _area_order(kept)[: len(gt)]
    gt_sorted = sorted(gt, key=lambda s: slot_sort_key(s.mask, s.box))
    det_sorted = sorted(top, key=lambda d: slot_sort_key(d.mask, d.box))
    return [(s.slot_index, d.index) for s, d in zip(gt_sorted, det_sorted)]


def _hungarian_pair(kept: list[Detection], gt: list[GtSlot]) -> list[tuple[int, int]]:
    # Min-cost on (1 - IoU); rectangular, so every surviving detection is
    # assigned. Among equal-cost optima the lexicographically smallest pair
    # set (by slot then detection index) is returned for determinism.
    iou = np.array([[mask_iou(s.mask, d.mask) for d in kept] for s in gt])
    cost = 1.0 - iou
    rows, cols = linear_sum_assignment(cost)
    opt_total = math.fsum(cost[r, c] for r, c in zip(rows, cols))

    n, k = cost.shape
    if n <= 6:
        best = None
        for slots in permutations(range(n), k):
            total = math.fsum(cost[s, d] for d, s in enumerate(slots))
            if total != opt_total:
                continue
            pair_set = sorted((gt[s].slot_index, kept[d].index) for d, s in enumerate(slots))
            if best is None or pair_set < best:
                best = pair_set
        if best is not None:
            return best
    return sorted((gt[r].slot_index, kept[c].index) for r, c in zip(rows, cols))


def assign_slots(kept: list[Detection], gt: list[GtSlot]) -> Assignment:
    """Pair surviving detections with GT slots (rank pairing or Hungarian)."""
    n = len(gt)
    if not kept:
        return Assignment(pairs=(), ious=(), n_slots=n)
    if len(kept) >= n:
        pairs = _rank_pair(kept, gt)
    else:
        pairs = _hungarian_pair(kept, gt)
    pairs = sorted(pairs)
    by_slot = {s.slot_index: s for s in gt}
    by_det = {d.index: d for d in kept}
    ious = tuple(mask_iou(by_slot[i].mask, by_det[j].mask) for i, j in pairs)
    return Assignment(pairs=tuple(pairs), ious=ious, n_slots=n)


def match_instance(manifest: InstanceManifest, cfg: MatchConfig | None = None) -> Assignment:
    """Full matching pipeline for one instance: filter, dedup, assign."""
    cfg = cfg or MatchConfig()
    gt = list(manifest.gt_slots)
    kept = filter_detections(list(manifest.detections), gt, cfg, manifest.image_area)
    kept = dedup_detections(kept, cfg.dup_thresh)
    return assign_slots(kept, gt)
