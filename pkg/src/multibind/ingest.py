"""Readers and writers for the multibind/1 interchange files.

All inputs are JSON documents carrying a top-level "schema": "multibind/1"
and a "kind" discriminator. Masks are accepted as COCO-style RLE (list or
compressed string counts, column-major) or as grayscale raster paths
(nonzero = foreground) relative to the document.
"""

from __future__ import annotations

import json
import logging
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IngestError, ValidationError
from .geometry import BBox, BitMask, rle_decode, rle_encode
from .model import (
    DIMENSIONS,
    Detection,
    Dimension,
    DimensionThresholds,
    EmbeddingVector,
    FeatureRecord,
    GtSlot,
    HumanLabel,
    InstanceManifest,
    KeypointSet,
    ThresholdTable,
    slot_sort_key,
)

SCHEMA = "multibind/1"

log = logging.getLogger("multibind")


def _read_json(path) -> dict:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise IngestError("file not found", str(path))
    except json.JSONDecodeError as exc:
        raise IngestError(f"invalid JSON: {exc}", str(path))
    if not isinstance(doc, dict):
        raise IngestError("top-level document must be an object", str(path))
    return doc


def _check_header(doc: dict, kind: str, where: str):
    if doc.get("schema") != SCHEMA:
        raise IngestError(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA!r}", f"{where}.schema")
    if doc.get("kind") != kind:
        raise IngestError(f"expected kind {kind!r}, got {doc.get('kind')!r}", f"{where}.kind")


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise IngestError("missing required field", f"{where}.{key}")
    return doc[key]


def _parse_dimension(value, where: str) -> Dimension:
    try:
        return Dimension(value)
    except ValueError:
        raise IngestError(f"unknown dimension {value!r}", where)


def _parse_mask(node, base_dir: Path, where: str) -> BitMask:
    if not isinstance(node, dict):
        raise IngestError("mask must be an object", where)
    fmt = node.get("format", "rle")
    if fmt == "rle":
        return rle_decode(node)
    if fmt == "raster":
        rel = _require(node, "path", where)
        raster_path = base_dir / rel
        try:
            from PIL import Image

            with Image.open(raster_path) as img:
                arr = np.asarray(img.convert("L"))
        except FileNotFoundError:
            raise IngestError("raster file not found", f"{where}.path")
        return BitMask.from_array(arr > 0)
    raise IngestError(f"unknown mask format {fmt!r}", f"{where}.format")


def _parse_box(node, mask: BitMask, where: str) -> BBox:
    if node is None:
        return mask.tight_box()
    try:
        return BBox(int(node["x1"]), int(node["y1"]), int(node["x2"]), int(node["y2"]))
    except (KeyError, TypeError) as exc:
        raise IngestError(f"bad box: {exc}", where)


def _parse_detection(node, base_dir: Path, idx_seen: set, where: str) -> Detection:
    mask = _parse_mask(_require(node, "mask", where), base_dir, f"{where}.mask")
    box = _parse_box(node.get("box"), mask, f"{where}.box")
    conf = _require(node, "confidence", where)
    if not isinstance(conf, (int, float)) or not np.isfinite(conf):
        raise IngestError("confidence must be a finite number", f"{where}.confidence")
    index = _require(node, "index", where)
    if not isinstance(index, int) or index < 0:
        raise IngestError("detection index must be a non-negative integer", f"{where}.index")
    if index in idx_seen:
        raise ValidationError(f"duplicate detection index {index}", f"{where}.index")
    idx_seen.add(index)
    return Detection(index=index, mask=mask, box=box, confidence=float(conf))


def load_manifest(path, strict: bool = False) -> InstanceManifest:
    """Load one instance manifest; GT slots come out sorted left-to-right.

    The canonical slot index is assigned from the geometric order (mask
    centroid x, ties by centroid y then box x1). In strict mode a manifest
    whose on-disk slot_index labels contradict that order is rejected.
    """
    path = Path(path)
    doc = _read_json(path)
    _check_header(doc, "manifest", str(path))
    instance_id = _require(doc, "instance_id", str(path))
    size = _require(doc, "image_size", str(path))
    width, height = int(size["width"]), int(size["height"])

    raw_slots = _require(doc, "gt_slots", str(path))
    if not isinstance(raw_slots, list) or not raw_slots:
        raise IngestError("gt_slots must be a non-empty list", f"{path}.gt_slots")

    parsed = []
    disk_indices = []
    for pos, node in enumerate(raw_slots):
        where = f"{path}.gt_slots[{pos}]"
        mask = _parse_mask(_require(node, "mask", where), path.parent, f"{where}.mask")
        if mask.is_empty():
            raise ValidationError("GT slot mask is empty", f"{where}.mask")
        box = _parse_box(node.get("box"), mask, f"{where}.box")
        disk_indices.append(node.get("slot_index"))
        parsed.append((mask, box))

    given = [ix for ix in disk_indices if ix is not None]
    if len(set(given)) != len(given):
        raise ValidationError("duplicate slot index", f"{path}.gt_slots[].slot_index")

    order = sorted(range(len(parsed)), key=lambda p: slot_sort_key(*parsed[p]))
    slots = []
    for canonical, pos in enumerate(order, start=1):
        mask, box = parsed[pos]
        disk = disk_indices[pos]
        if disk is not None and disk != canonical:
            msg = (
                f"instance {instance_id!r}: on-disk slot_index {disk} disagrees with "
                f"left-to-right order (canonical {canonical})"
            )
            if strict:
                raise ValidationError(msg, f"{path}.gt_slots[{pos}].slot_index")
            log.warning("%s; re-indexed", msg)
        slots.append(GtSlot(slot_index=canonical, mask=mask, box=box))

    detections = []
    seen: set = set()
    for pos, node in enumerate(doc.get("detections", [])):
        detections.append(_parse_detection(node, path.parent, seen, f"{path}.detections[{pos}]"))
    detections.sort(key=lambda d: d.index)

    return InstanceManifest(
        instance_id=instance_id,
        width=width,
        height=height,
        gt_slots=tuple(slots),
        detections=tuple(detections),
    )


def load_detections(path, manifest: InstanceManifest) -> tuple[Detection, ...]:
    """Load a model's detections for one instance (masks at GT resolution)."""
    path = Path(path)
    doc = _read_json(path)
    _check_header(doc, "detections", str(path))
    instance_id = _require(doc, "instance_id", str(path))
    if instance_id != manifest.instance_id:
        raise ValidationError(
            f"detections for {instance_id!r} loaded against manifest {manifest.instance_id!r}",
            str(path),
        )
    size = _require(doc, "image_size", str(path))
    if int(size["width"]) != manifest.width or int(size["height"]) != manifest.height:
        raise ValidationError(
            "generated-image size must match the GT resolution (resize upstream)",
            f"{path}.image_size",
        )
    detections = []
    seen: set = set()
    for pos, node in enumerate(_require(doc, "detections", str(path))):
        det = _parse_detection(node, path.parent, seen, f"{path}.detections[{pos}]")
        if det.mask.width != manifest.width or det.mask.height != manifest.height:
            raise ValidationError("detection mask does not fit the image", f"{path}.detections[{pos}]")
        detections.append(det)
    detections.sort(key=lambda d: d.index)
    return tuple(detections)


def _parse_payload(node, where: str):
    if not isinstance(node, dict):
        raise IngestError("payload must be an object", where)
    ptype = node.get("type")
    if ptype == "embedding":
        return EmbeddingVector(_require(node, "values", where))
    if ptype == "keypoints":
        crop = _require(node, "crop", where)
        return KeypointSet(
            _require(node, "points", where),
            crop_width=float(crop["width"]),
            crop_height=float(crop["height"]),
        )
    raise IngestError(f"unknown payload type {ptype!r}", f"{where}.type")


def load_features(path) -> dict:
    """Load a feature file.

    Returns {"instance_id", "side", "model_id", "records"} where records maps
    (index, Dimension) -> FeatureRecord. GT-side indices are slot indices
    (1-based); gen-side indices are detection indices (0-based).
    """
    path = Path(path)
    doc = _read_json(path)
    _check_header(doc, "features", str(path))
    side = _require(doc, "side", str(path))
    if side not in ("gt", "gen"):
        raise IngestError(f"side must be 'gt' or 'gen', got {side!r}", f"{path}.side")
    records: dict = {}
    embed_dims: dict = {}
    for pos, node in enumerate(_require(doc, "records", str(path))):
        where = f"{path}.records[{pos}]"
        index = _require(node, "index", where)
        dim = _parse_dimension(_require(node, "dimension", where), f"{where}.dimension")
        key = (index, dim)
        if key in records:
            raise ValidationError(f"duplicate feature record for {key}", where)
        valid = bool(_require(node, "valid", where))
        payload = None
        if "payload" in node and node["payload"] is not None:
            payload = _parse_payload(node["payload"], f"{where}.payload")
        try:
            rec = FeatureRecord(valid=valid, payload=payload)
        except ValidationError as exc:
            raise ValidationError(str(exc), where)
        if isinstance(payload, EmbeddingVector):
            prev = embed_dims.setdefault(dim, len(payload))
            if prev != len(payload):
                raise ValidationError(
                    f"embedding length {len(payload)} differs from {prev} within {dim.value}",
                    where,
                )
        records[key] = rec
    return {
        "instance_id": _require(doc, "instance_id", str(path)),
        "side": side,
        "model_id": doc.get("model_id"),
        "records": records,
    }


def attach_gt_features(manifest: InstanceManifest, features: dict) -> InstanceManifest:
    if features["side"] != "gt":
        raise ValidationError("expected a gt-side feature file")
    if features["instance_id"] != manifest.instance_id:
        raise ValidationError(
            f"features for {features['instance_id']!r} attached to {manifest.instance_id!r}"
        )
    records = features["records"]
    slots = []
    for slot in manifest.gt_slots:
        per_dim = {
            dim: records[(slot.slot_index, dim)]
            for dim in DIMENSIONS
            if (slot.slot_index, dim) in records
        }
        slots.append(GtSlot(slot_index=slot.slot_index, mask=slot.mask, box=slot.box, features=per_dim))
    from dataclasses import replace

    return replace(manifest, gt_slots=tuple(slots))


def attach_gen_features(detections, features: dict):
    if features["side"] != "gen":
        raise ValidationError("expected a gen-side feature file")
    records = features["records"]
    out = []
    for det in detections:
        per_dim = {
            dim: records[(det.index, dim)] for dim in DIMENSIONS if (det.index, dim) in records
        }
        out.append(
            Detection(
                index=det.index,
                mask=det.mask,
                box=det.box,
                confidence=det.confidence,
                features=per_dim,
            )
        )
    return tuple(out)


def builtin_thresholds() -> ThresholdTable:
    """Shipped per-dimension defaults (calibrated on the human-labeled subset)."""
    text = resources.files("multibind").joinpath("data/thresholds_default.json").read_text()
    doc = json.loads(text)
    return _thresholds_from_doc(doc, "<builtin>")


def _thresholds_from_doc(doc: dict, where: str, base: Optional[ThresholdTable] = None) -> ThresholdTable:
    node = _require(doc, "thresholds", where)
    values = dict(base.values) if base is not None else {}
    for key, pair in node.items():
        dim = _parse_dimension(key, f"{where}.thresholds.{key}")
        try:
            values[dim] = DimensionThresholds(cons=float(pair["cons"]), conf=float(pair["conf"]))
        except (KeyError, TypeError) as exc:
            raise IngestError(f"bad threshold pair: {exc}", f"{where}.thresholds.{key}")
    return ThresholdTable(values=values)


def load_thresholds(path=None) -> ThresholdTable:
    """Load thresholds from a file, merged over the builtin defaults."""
    base = builtin_thresholds()
    if path is None:
        return base
    doc = _read_json(path)
    _check_header(doc, "thresholds", str(path))
    return _thresholds_from_doc(doc, str(path), base=base)


def load_labels(path) -> list[HumanLabel]:
    """Load human consistency/confusion labels; duplicate keys are rejected."""
    path = Path(path)
    doc = _read_json(path)
    _check_header(doc, "labels", str(path))
    labels = []
    seen = set()
    for pos, node in enumerate(_require(doc, "records", str(path))):
        where = f"{path}.records[{pos}]"
        try:
            label = HumanLabel(
                instance_id=str(_require(node, "instance_id", where)),
                model_id=str(_require(node, "model_id", where)),
                dimension=_parse_dimension(_require(node, "dimension", where), where),
                i=int(_require(node, "i", where)),
                j=int(_require(node, "j", where)),
                kind=str(_require(node, "kind", where)),
                label=bool(_require(node, "label", where)),
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), where)
        if label.key in seen:
            raise ValidationError(f"duplicate label for key {label.key}", where)
        seen.add(label.key)
        labels.append(label)
    return labels


# ---------------------------------------------------------------------------
# Writers (fixtures, synth, round-trip tests)
# ---------------------------------------------------------------------------

def _mask_to_node(mask: BitMask, compress: bool = False) -> dict:
    node = rle_encode(mask, compress=compress)
    node["format"] = "rle"
    return node


def _box_to_node(box: BBox) -> dict:
    return {"x1": box.x1, "y1": box.y1, "x2": box.x2, "y2": box.y2}


def _detection_to_node(det: Detection) -> dict:
    return {
        "index": det.index,
        "confidence": det.confidence,
        "mask": _mask_to_node(det.mask),
        "box": _box_to_node(det.box),
    }


def dump_manifest(manifest: InstanceManifest) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "manifest",
        "instance_id": manifest.instance_id,
        "image_size": {"width": manifest.width, "height": manifest.height},
        "gt_slots": [
            {
                "slot_index": s.slot_index,
                "mask": _mask_to_node(s.mask),
                "box": _box_to_node(s.box),
            }
            for s in manifest.gt_slots
        ],
        "detections": [_detection_to_node(d) for d in manifest.detections],
    }


def dump_detections(instance_id: str, model_id: str, width: int, height: int, detections) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "detections",
        "instance_id": instance_id,
        "model_id": model_id,
        "image_size": {"width": width, "height": height},
        "detections": [_detection_to_node(d) for d in detections],
    }


def _payload_to_node(payload) -> dict:
    if isinstance(payload, EmbeddingVector):
        return {"type": "embedding", "values": payload.values.tolist()}
    if isinstance(payload, KeypointSet):
        return {
            "type": "keypoints",
            "points": payload.points.tolist(),
            "crop": {"width": payload.crop_width, "height": payload.crop_height},
        }
    raise TypeError(f"unknown payload {payload!r}")


def dump_features(instance_id: str, side: str, records: dict, model_id=None) -> dict:
    out_records = []
    for (index, dim), rec in sorted(records.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        node = {"index": index, "dimension": dim.value, "valid": rec.valid}
        if rec.payload is not None:
            node["payload"] = _payload_to_node(rec.payload)
        out_records.append(node)
    doc = {
        "schema": SCHEMA,
        "kind": "features",
        "instance_id": instance_id,
        "side": side,
        "records": out_records,
    }
    if model_id is not None:
        doc["model_id"] = model_id
    return doc


def dump_labels(labels) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "labels",
        "records": [
            {
                "instance_id": lb.instance_id,
                "model_id": lb.model_id,
                "dimension": lb.dimension.value,
                "i": lb.i,
                "j": lb.j,
                "kind": lb.kind,
                "label": lb.label,
            }
            for lb in labels
        ],
    }


def dump_thresholds(table: ThresholdTable) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "thresholds",
        "thresholds": {
            dim.value: {"cons": table.cons(dim), "conf": table.conf(dim)} for dim in DIMENSIONS
        },
    }


def write_json(path, doc: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")
