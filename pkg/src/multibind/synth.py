"""Deterministic synthetic fixtures exhibiting chosen failure modes.

Failure modes are planted directly in feature space: swap exchanges the
generated features of slots 1 and 2, dominance copies slot 1's features onto
every subject, blending mixes slots 1 and 2 into row 1, drift replaces each
subject's features with ones far from every reference. Detections reuse the
GT masks, so matching is exact and Mean IoU is 1.0 by construction.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import ingest
from .geometry import BBox, BitMask
from .model import (
    DIMENSIONS,
    Detection,
    Dimension,
    EmbeddingVector,
    FeatureRecord,
    GtSlot,
    HumanLabel,
    InstanceManifest,
    KeypointSet,
)

MODES = ("perfect", "drift", "swap", "dominance", "blending")

EMBED_DIM = 8
KEYPOINT_COUNT = 17
CROP = 100.0
# Visible keypoints form a square (shoulder/hip indices of the 17-point
# skeleton); per-slot skeletons are pure translations, so the OKS scale is
# identical for every skeleton and similarity values follow closed forms.
VISIBLE_IDX = (5, 6, 11, 12)
SQUARE = ((30.0, 30.0), (70.0, 30.0), (30.0, 70.0), (70.0, 70.0))
SLOT_OFFSETS = ((10.0, 0.0), (0.0, 10.0), (-10.0, 0.0), (0.0, -10.0))
DRIFT_OFFSET = (0.0, -30.0)


def _embedding(basis_index: int) -> EmbeddingVector:
    v = np.zeros(EMBED_DIM)
    v[basis_index] = 1.0
    return EmbeddingVector(v)


def _blend_embedding(a: int, b: int) -> EmbeddingVector:
    v = np.zeros(EMBED_DIM)
    v[a] = 1.0 / np.sqrt(2.0)
    v[b] = 1.0 / np.sqrt(2.0)
    return EmbeddingVector(v)


def _skeleton(offset) -> KeypointSet:
    pts = np.zeros((KEYPOINT_COUNT, 4))
    pts[:, 0] = CROP / 2.0
    pts[:, 1] = CROP / 2.0
    for (x, y), idx in zip(SQUARE, VISIBLE_IDX):
        pts[idx] = (x + offset[0], y + offset[1], 1.0, 0.9)
    return KeypointSet(pts, crop_width=CROP, crop_height=CROP)


def _mid_offset(a, b):
    return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)


def _gt_payload(dim: Dimension, slot: int):
    if dim == Dimension.POSE:
        return _skeleton(SLOT_OFFSETS[slot - 1])
    return _embedding(slot - 1)


def _gen_payload(dim: Dimension, slot: int, n: int, mode: str):
    if mode == "perfect":
        return _gt_payload(dim, slot)
    if mode == "drift":
        if dim == Dimension.POSE:
            return _skeleton(DRIFT_OFFSET)
        return _embedding(4 + slot - 1)
    if mode == "swap":
        target = {1: 2, 2: 1}.get(slot, slot)
        return _gt_payload(dim, target)
    if mode == "dominance":
        return _gt_payload(dim, 1)
    if mode == "blending":
        if slot != 1:
            return _gt_payload(dim, slot)
        if dim == Dimension.POSE:
            return _skeleton(_mid_offset(SLOT_OFFSETS[0], SLOT_OFFSETS[1]))
        return _blend_embedding(0, 1)
    raise ValueError(f"unknown mode {mode!r}")


def _planted_labels(mode: str, slot: int, n: int) -> tuple[bool, dict]:
    """Construction truth: (consistent, {j: confused_with_j})."""
    confused = {j: False for j in range(1, n + 1) if j != slot}
    if mode == "perfect":
        return True, confused
    if mode == "drift":
        return False, confused
    if mode == "swap":
        if slot in (1, 2) and n >= 2:
            confused[2 if slot == 1 else 1] = True
            return False, confused
        return True, confused
    if mode == "dominance":
        if slot == 1:
            return True, confused
        confused[1] = True
        return False, confused
    if mode == "blending":
        if slot == 1:
            confused[2] = True
        return True, confused
    raise ValueError(mode)


def _rect_mask(width, height, x0, y0, w, h) -> BitMask:
    arr = np.zeros((height, width), dtype=bool)
    arr[y0 : y0 + h, x0 : x0 + w] = True
    return BitMask.from_array(arr)


def _build_instance(instance_id, n, width, height, rng) -> InstanceManifest:
    gap = 4
    block = (width - gap * (n + 1)) // n
    slots = []
    for i in range(1, n + 1):
        x0 = gap + (i - 1) * (block + gap) + int(rng.integers(0, 2))
        y0 = 6 + int(rng.integers(0, 4))
        w = block - int(rng.integers(0, 3))
        h = height - y0 - 6 - int(rng.integers(0, 4))
        mask = _rect_mask(width, height, x0, y0, w, h)
        slots.append(GtSlot(slot_index=i, mask=mask, box=BBox(x0, y0, x0 + w, y0 + h)))
    return InstanceManifest(
        instance_id=instance_id, width=width, height=height, gt_slots=tuple(slots)
    )


def synth_dataset(
    out_dir,
    mode: str,
    instances: int = 4,
    model_ids=("synthetic",),
    slots=None,
    seed: int = 0,
    image_size=(96, 64),
    dims=DIMENSIONS,
    emit_labels: bool = False,
) -> dict:
    """Write a synthetic dataset + per-model outputs under out_dir."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    dims = tuple(Dimension(d) for d in dims)
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    width, height = image_size
    cycle = (2, 3, 4)
    labels: list[HumanLabel] = []
    instance_ids = []

    for k in range(instances):
        n = slots if slots else cycle[k % len(cycle)]
        instance_id = f"synth_{mode}_{k:04d}"
        instance_ids.append(instance_id)
        manifest = _build_instance(instance_id, n, width, height, rng)
        inst_dir = out / "dataset" / "instances" / instance_id
        ingest.write_json(inst_dir / "manifest.json", ingest.dump_manifest(manifest))

        gt_records = {}
        for slot in manifest.gt_slots:
            for dim in DIMENSIONS:
                gt_records[(slot.slot_index, dim)] = FeatureRecord(
                    valid=True, payload=_gt_payload(dim, slot.slot_index)
                )
        ingest.write_json(
            inst_dir / "features_gt.json",
            ingest.dump_features(instance_id, "gt", gt_records),
        )

        # Detections reuse the GT masks, listed right-to-left so the index
        # plumbing between detections.json and features_gen.json is exercised.
        confidences = [0.85 + 0.14 * float(rng.random()) for _ in range(n)]
        detections = []
        det_slot = {}
        for pos, slot in enumerate(reversed(manifest.gt_slots)):
            detections.append(
                Detection(
                    index=pos,
                    mask=slot.mask,
                    box=slot.box,
                    confidence=round(confidences[pos], 4),
                )
            )
            det_slot[pos] = slot.slot_index

        for model_id in model_ids:
            mdir = out / "models" / model_id / instance_id
            ingest.write_json(
                mdir / "detections.json",
                ingest.dump_detections(instance_id, model_id, width, height, detections),
            )
            gen_records = {}
            for pos, slot_index in det_slot.items():
                for dim in DIMENSIONS:
                    payload = (
                        _gen_payload(dim, slot_index, n, mode)
                        if dim in dims
                        else _gt_payload(dim, slot_index)
                    )
                    gen_records[(pos, dim)] = FeatureRecord(valid=True, payload=payload)
            ingest.write_json(
                mdir / "features_gen.json",
                ingest.dump_features(instance_id, "gen", gen_records, model_id=model_id),
            )

        if emit_labels:
            for model_id in model_ids:
                for slot in manifest.gt_slots:
                    consistent, confused = _planted_labels(mode, slot.slot_index, n)
                    for dim in dims:
                        labels.append(
                            HumanLabel(
                                instance_id=instance_id,
                                model_id=model_id,
                                dimension=dim,
                                i=slot.slot_index,
                                j=slot.slot_index,
                                kind="consistency",
                                label=consistent,
                            )
                        )
                        for j, flag in sorted(confused.items()):
                            labels.append(
                                HumanLabel(
                                    instance_id=instance_id,
                                    model_id=model_id,
                                    dimension=dim,
                                    i=slot.slot_index,
                                    j=j,
                                    kind="confusion",
                                    label=flag,
                                )
                            )

    if emit_labels:
        ingest.write_json(out / "labels.json", ingest.dump_labels(labels))

    return {
        "dataset": str(out / "dataset"),
        "models": {m: str(out / "models" / m) for m in model_ids},
        "instances": instance_ids,
        "labels": str(out / "labels.json") if emit_labels else None,
    }
