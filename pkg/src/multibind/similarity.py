"""Dimension-wise similarity matrices and baseline-corrected deltas.

For a dimension d the bundle holds S_gt[i,j] = sim_d(gt_i, gt_j) and
S_gen[i,j] = sim_d(gen_i, gt_j) over rows i in I (matched slots with valid
features) and columns j in V (valid GT slots), plus delta = S_gen - S_gt.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FeatureError
from .matching import Assignment
from .model import (
    Dimension,
    EmbeddingVector,
    FeatureRecord,
    InstanceManifest,
    KeypointSet,
)

log = logging.getLogger("multibind")

# Per-keypoint Gaussian falloff constants of the standard 17-keypoint pose
# benchmark (twice the published per-keypoint sigmas).
COCO_SIGMAS = (
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
)
DEFAULT_KAPPAS = tuple(2.0 * s for s in COCO_SIGMAS)


@dataclass(frozen=True)
class SimilarityConfig:
    vis_conf: float = 0.3  # min keypoint confidence to count as visible
    eps_s: float = 1e-4  # floor for the squared OKS scale
    kappas: tuple = DEFAULT_KAPPAS


def cosine_sim(u, v) -> float:
    """Cosine similarity of two embeddings; zero-norm operands are errors."""
    a = u.values if isinstance(u, EmbeddingVector) else np.asarray(u, dtype=np.float64)
    b = v.values if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise FeatureError(f"embedding length mismatch: {a.size} vs {b.size}")
    na = u.norm if isinstance(u, EmbeddingVector) else float(np.linalg.norm(a))
    nb = v.norm if isinstance(v, EmbeddingVector) else float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise FeatureError("zero-norm embedding")
    return float(np.dot(a, b) / (na * nb))


def _normalized_xy(kp: KeypointSet):
    key = "xy"
    if key not in kp._cache:
        kp._cache[key] = (kp.points[:, 0] / kp.crop_width, kp.points[:, 1] / kp.crop_height)
    return kp._cache[key]


def _scale_sq(kp: KeypointSet, cfg: SimilarityConfig) -> float:
    """Squared OKS scale: tight-bbox area of the visible keypoints, floored."""
    key = ("s2", cfg.vis_conf, cfg.eps_s)
    if key not in kp._cache:
        vis = kp.visible_mask(cfg.vis_conf)
        if not vis.any():
            raise FeatureError("skeleton has no visible keypoint")
        x, y = _normalized_xy(kp)
        area = float((x[vis].max() - x[vis].min()) * (y[vis].max() - y[vis].min()))
        kp._cache[key] = max(area, cfg.eps_s)
    return kp._cache[key]


def oks_sim(a: KeypointSet, b_gt: KeypointSet, cfg: SimilarityConfig | None = None,
            symmetric: bool = False) -> float:
    """Object keypoint similarity between two skeletons.

    The scale comes from the second (ground-truth) skeleton; symmetric=True
    averages the two scales instead, which is the convention the bundle
    builder applies to both matrices.
    """
    cfg = cfg or SimilarityConfig()
    if a.count != b_gt.count:
        raise FeatureError(f"keypoint count mismatch: {a.count} vs {b_gt.count}")
    if a.count != len(cfg.kappas):
        raise FeatureError(f"expected {len(cfg.kappas)} keypoints, got {a.count}")
    av = a.visible_mask(cfg.vis_conf)
    bv = b_gt.visible_mask(cfg.vis_conf)
    if not (av & bv).any():
        raise FeatureError("no jointly visible keypoint")
    if symmetric:
        s2 = ((math.sqrt(_scale_sq(a, cfg)) + math.sqrt(_scale_sq(b_gt, cfg))) / 2.0) ** 2
    else:
        s2 = _scale_sq(b_gt, cfg)
    ax, ay = _normalized_xy(a)
    bx, by = _normalized_xy(b_gt)
    out = kernels.oks_matrix(
        ax[None, :], ay[None, :], av[None, :].astype(np.float64),
        bx[None, :], by[None, :], bv[None, :].astype(np.float64),
        np.array([[s2]]), np.asarray(cfg.kappas, dtype=np.float64),
    )
    return float(out[0, 0])


@dataclass(frozen=True)
class SimilarityBundle:
    dimension: Dimension
    rows: tuple[int, ...]  # I: matched slots with valid gen features
    cols: tuple[int, ...]  # V: GT slots with valid features
    s_gt: np.ndarray
    s_gen: np.ndarray
    delta: np.ndarray
    dropped_rows: tuple[tuple[int, str], ...] = ()

    def diag_positions(self):
        """(row, col) positions where the row slot equals the column slot."""
        col_of = {slot: c for c, slot in enumerate(self.cols)}
        return [(r, col_of[slot]) for r, slot in enumerate(self.rows)]


def _usable(rec: FeatureRecord | None, dim: Dimension, cfg: SimilarityConfig) -> bool:
    if rec is None or not rec.valid or rec.payload is None:
        return False
    if dim == Dimension.POSE:
        if not isinstance(rec.payload, KeypointSet):
            return False
        return bool(rec.payload.visible_mask(cfg.vis_conf).any())
    if not isinstance(rec.payload, EmbeddingVector):
        return False
    return rec.payload.norm > 0.0


def _embedding_matrix(payloads) -> np.ndarray:
    dims = {p.values.size for p in payloads}
    if len(dims) > 1:
        raise FeatureError(f"inconsistent embedding lengths in one dimension: {sorted(dims)}")
    return np.stack([p.unit for p in payloads])


def _oks_pair_matrix(row_kps, col_kps, cfg: SimilarityConfig) -> np.ndarray:
    k = len(cfg.kappas)
    for kp in (*row_kps, *col_kps):
        if kp.count != k:
            raise FeatureError(f"expected {k} keypoints, got {kp.count}")
    rx = np.stack([_normalized_xy(kp)[0] for kp in row_kps])
    ry = np.stack([_normalized_xy(kp)[1] for kp in row_kps])
    rv = np.stack([kp.visible_mask(cfg.vis_conf) for kp in row_kps]).astype(np.float64)
    cx = np.stack([_normalized_xy(kp)[0] for kp in col_kps])
    cy = np.stack([_normalized_xy(kp)[1] for kp in col_kps])
    cv = np.stack([kp.visible_mask(cfg.vis_conf) for kp in col_kps]).astype(np.float64)
    rs = np.array([math.sqrt(_scale_sq(kp, cfg)) for kp in row_kps])
    cs = np.array([math.sqrt(_scale_sq(kp, cfg)) for kp in col_kps])
    s2 = ((rs[:, None] + cs[None, :]) / 2.0) ** 2
    return kernels.oks_matrix(rx, ry, rv, cx, cy, cv, s2, np.asarray(cfg.kappas, dtype=np.float64))


def build_bundle(
    manifest: InstanceManifest,
    assignment: Assignment,
    dimension: Dimension,
    cfg: SimilarityConfig | None = None,
) -> SimilarityBundle | None:
    """Build S_gt / S_gen / delta for one dimension; None when no GT slot is valid."""
    cfg = cfg or SimilarityConfig()
    slots = {s.slot_index: s for s in manifest.gt_slots}
    dets = {d.index: d for d in manifest.detections}

    cols = tuple(
        i for i in sorted(slots) if _usable(slots[i].features.get(dimension), dimension, cfg)
    )
    if not cols:
        return None

    dropped: list[tuple[int, str]] = []
    rows = []
    for i in sorted(assignment.matched):
        if i not in cols:
            continue
        det_idx = assignment.detection_for(i)
        rec = dets[det_idx].features.get(dimension) if det_idx in dets else None
        if _usable(rec, dimension, cfg):
            rows.append(i)
        else:
            dropped.append((i, "invalid generated-crop feature"))
            log.debug(
                "instance %s dim %s: row %d dropped (invalid gen feature)",
                manifest.instance_id, dimension.value, i,
            )
    rows = tuple(rows)

    col_gt = [slots[j].features[dimension].payload for j in cols]
    row_gt = [slots[i].features[dimension].payload for i in rows]
    row_gen = [dets[assignment.detection_for(i)].features[dimension].payload for i in rows]

    if dimension == Dimension.POSE:
        if rows:
            s_gt = _oks_pair_matrix(row_gt, col_gt, cfg)
            s_gen = _oks_pair_matrix(row_gen, col_gt, cfg)
            # A NaN cell means the pair shares no visible keypoint; such a row
            # cannot be compared against every valid GT slot, so it is dropped.
            bad = np.isnan(s_gt).any(axis=1) | np.isnan(s_gen).any(axis=1)
            if bad.any():
                for r in np.nonzero(bad)[0]:
                    dropped.append((rows[r], "no jointly visible keypoints with some GT slot"))
                keep = ~bad
                rows = tuple(slot for slot, k in zip(rows, keep) if k)
                s_gt = s_gt[keep]
                s_gen = s_gen[keep]
        else:
            s_gt = np.zeros((0, len(cols)))
            s_gen = np.zeros((0, len(cols)))
    else:
        col_mat = _embedding_matrix(col_gt)
        if rows:
            gt_mat = _embedding_matrix(row_gt)
            gen_mat = _embedding_matrix(row_gen)
            if gt_mat.shape[1] != col_mat.shape[1] or gen_mat.shape[1] != col_mat.shape[1]:
                raise FeatureError("embedding length mismatch between rows and columns")
            s_gt = gt_mat @ col_mat.T
            s_gen = gen_mat @ col_mat.T
        else:
            s_gt = np.zeros((0, len(cols)))
            s_gen = np.zeros((0, len(cols)))

    return SimilarityBundle(
        dimension=dimension,
        rows=rows,
        cols=cols,
        s_gt=s_gt,
        s_gen=s_gen,
        delta=s_gen - s_gt,
        dropped_rows=tuple(dropped),
    )
