import numpy as np
import pytest

from multibind.geometry import BitMask
from multibind.model import (
    DIMENSIONS,
    Detection,
    Dimension,
    EmbeddingVector,
    FeatureRecord,
    GtSlot,
    InstanceManifest,
)


def pixels(w, h, pts):
    return BitMask.from_pixels(w, h, pts)


def rect(width, height, x0, y0, w, h):
    arr = np.zeros((height, width), dtype=bool)
    arr[y0 : y0 + h, x0 : x0 + w] = True
    return BitMask.from_array(arr)


def embed(values):
    return FeatureRecord(valid=True, payload=EmbeddingVector(values))


def make_manifest(instance_id="inst", width=60, height=30, n=2, gt_features=None,
                  det_features=None, det_order=None, confidences=None):
    """Rectangular side-by-side slots with detections equal to the GT masks.

    gt_features/det_features: {slot_index: {Dimension: FeatureRecord}}; det
    features are keyed by the slot whose mask the detection copies.
    """
    gt_features = gt_features or {}
    det_features = det_features or {}
    block = width // n
    slots = []
    for i in range(1, n + 1):
        x0 = (i - 1) * block + 2
        mask = rect(width, height, x0, 4, block - 4, height - 8)
        slots.append(
            GtSlot(
                slot_index=i,
                mask=mask,
                box=mask.tight_box(),
                features=gt_features.get(i, {}),
            )
        )
    order = det_order or list(range(1, n + 1))
    dets = []
    for pos, slot_i in enumerate(order):
        src = slots[slot_i - 1]
        conf = (confidences or {}).get(slot_i, 0.9)
        dets.append(
            Detection(
                index=pos,
                mask=src.mask,
                box=src.box,
                confidence=conf,
                features=det_features.get(slot_i, {}),
            )
        )
    return InstanceManifest(
        instance_id=instance_id,
        width=width,
        height=height,
        gt_slots=tuple(slots),
        detections=tuple(dets),
    )


def basis_features(n, dim_subset=DIMENSIONS, embed_dim=8, offset=0):
    """Orthonormal per-slot embeddings for the cosine dimensions."""
    out = {}
    for i in range(1, n + 1):
        v = np.zeros(embed_dim)
        v[offset + i - 1] = 1.0
        out[i] = {d: embed(v) for d in dim_subset if d != Dimension.POSE}
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_model_fixture(root):
    """Two-model synthetic run: model B misses one slot on the first instance
    and produced nothing for the second instance."""
    import json

    from multibind.synth import synth_dataset

    out = synth_dataset(
        root, "perfect", instances=2, model_ids=("modelA", "modelB"), slots=3, seed=5
    )
    i0, i1 = out["instances"]
    b_root = root / "models" / "modelB"

    # drop instance 2 for model B entirely (generation failure)
    import shutil

    shutil.rmtree(b_root / i1)

    # remove the detection covering slot 2 from B's first instance
    det_path = b_root / i0 / "detections.json"
    doc = json.loads(det_path.read_text())
    # detections are written right-to-left: position p covers slot N - p
    doc["detections"] = [d for d in doc["detections"] if d["index"] != 1]
    det_path.write_text(json.dumps(doc))
    feat_path = b_root / i0 / "features_gen.json"
    fdoc = json.loads(feat_path.read_text())
    fdoc["records"] = [r for r in fdoc["records"] if r["index"] != 1]
    feat_path.write_text(json.dumps(fdoc))
    return out
