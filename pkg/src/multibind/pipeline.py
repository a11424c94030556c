"""Batch evaluation: load, match, intersect, diagnose, one record per instance.

Workers are pure per-instance functions; results merge in instance-id order,
so parallel runs are bit-identical to serial ones.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import ingest, kernels
from .diagnostics import diagnose
from .errors import MultibindError
from .matching import Assignment, MatchConfig, match_instance
from .model import DIMENSIONS, Dimension, DimensionThresholds, ThresholdTable
from .similarity import SimilarityConfig, build_bundle


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    models: tuple[tuple[str, str], ...]  # (model_id, root) pairs
    thresholds: Optional[str] = None  # thresholds file; None = builtin defaults
    out: str = "report"
    jobs: int = 1
    strict: bool = False
    det_conf: float = 0.3
    alpha: float = 0.35
    dup_thresh: float = 0.5
    js_log_base: float = math.e
    aggregation: str = "pooled"  # pooled | instance
    dump_matrices: bool = False

    def match_config(self) -> MatchConfig:
        return MatchConfig(det_conf=self.det_conf, alpha=self.alpha, dup_thresh=self.dup_thresh)


def discover_instances(dataset_root) -> list[str]:
    base = Path(dataset_root) / "instances"
    if not base.is_dir():
        return []
    return sorted(p.name for p in base.iterdir() if (p / "manifest.json").is_file())


def fair_matched_set(matched_by_model: dict) -> Optional[frozenset]:
    """Common matched-slot set across models; None when any model lacks output."""
    sets = list(matched_by_model.values())
    if not sets or any(s is None for s in sets):
        return None
    common = frozenset(sets[0])
    for s in sets[1:]:
        common &= frozenset(s)
    return common


def restrict_assignment(assignment: Assignment, keep) -> Assignment:
    keep = frozenset(keep)
    kept = [(p, iou) for p, iou in zip(assignment.pairs, assignment.ious) if p[0] in keep]
    return Assignment(
        pairs=tuple(p for p, _ in kept),
        ious=tuple(iou for _, iou in kept),
        n_slots=assignment.n_slots,
    )


def _thresholds_from_plain(plain: dict) -> ThresholdTable:
    return ThresholdTable(
        values={
            Dimension(k): DimensionThresholds(cons=v[0], conf=v[1]) for k, v in plain.items()
        }
    )


def thresholds_to_plain(table: ThresholdTable) -> dict:
    return {d.value: [table.cons(d), table.conf(d)] for d in DIMENSIONS}


def _dim_entry(bundle, diag, cfg: dict) -> dict:
    delta = bundle.delta.tolist()
    s_gen = bundle.s_gen.tolist()
    col_idx = {slot: c for c, slot in enumerate(bundle.cols)}
    row_records = []
    for r, outcome in enumerate(diag.outcomes):
        slot = outcome.slot
        off = [
            max(delta[r][c], 0.0)
            for c in range(len(bundle.cols))
            if bundle.cols[c] != slot
        ]
        own = col_idx[slot]
        row_records.append(
            {
                "slot": slot,
                "outcome": outcome.outcome,
                "inconsistent": outcome.inconsistent,
                "delta_diag": delta[r][own],
                "sim_diag": s_gen[r][own],
                "js_row": diag.js_rows[r],
                "c_mean_term": sum(off) / len(off) if off else 0.0,
                "c_worst_term": max(off) if off else 0.0,
                "offdiag_degenerate": not off,
            }
        )
    return {
        "rows": list(bundle.rows),
        "cols": list(bundle.cols),
        "row_records": row_records,
        "eligible": diag.flags.eligible,
        "swap": diag.flags.swap,
        "dominance": diag.flags.dominance,
        "blending": diag.flags.blending,
        "n_conf": diag.flags.n_conf,
        "dropped_rows": [[slot, reason] for slot, reason in bundle.dropped_rows],
    }


def _matrix_dump(bundle, diag) -> dict:
    return {
        "rows": list(bundle.rows),
        "cols": list(bundle.cols),
        "s_gt": bundle.s_gt.tolist(),
        "s_gen": bundle.s_gen.tolist(),
        "delta": bundle.delta.tolist(),
        "cons": diag.cons.tolist(),
        "conf": diag.conf.tolist(),
    }


def evaluate_instance(dataset_root: str, instance_id: str, model_roots: tuple, cfg: dict) -> dict:
    """Worker: evaluate one instance across all models. Returns a plain dict."""
    mcfg = MatchConfig(
        det_conf=cfg["det_conf"], alpha=cfg["alpha"], dup_thresh=cfg["dup_thresh"]
    )
    simcfg = SimilarityConfig()
    thresholds = _thresholds_from_plain(cfg["thresholds"])
    inst_dir = Path(dataset_root) / "instances" / instance_id

    try:
        manifest = ingest.load_manifest(inst_dir / "manifest.json", strict=cfg["strict"])
        gt_feat_path = inst_dir / "features_gt.json"
        if gt_feat_path.is_file():
            manifest = ingest.attach_gt_features(manifest, ingest.load_features(gt_feat_path))

        per_model = {}
        matched_by_model = {}
        for model_id, root in model_roots:
            det_path = Path(root) / instance_id / "detections.json"
            if not det_path.is_file():
                per_model[model_id] = None
                matched_by_model[model_id] = None
                continue
            dets = ingest.load_detections(det_path, manifest)
            feat_path = Path(root) / instance_id / "features_gen.json"
            if feat_path.is_file():
                dets = ingest.attach_gen_features(dets, ingest.load_features(feat_path))
            manifest_m = manifest.with_detections(dets)
            assignment = match_instance(manifest_m, mcfg)
            per_model[model_id] = (manifest_m, assignment)
            matched_by_model[model_id] = assignment.matched

        fair = fair_matched_set(matched_by_model)
        record = {"instance_id": instance_id, "n_slots": manifest.n_slots, "models": {}}
        if fair is None:
            record["dropped"] = sorted(m for m, v in matched_by_model.items() if v is None)
            return record
        record["fair_matched"] = sorted(fair)

        for model_id, _ in model_roots:
            manifest_m, assignment = per_model[model_id]
            restricted = restrict_assignment(assignment, fair)
            entry = {
                "pairs": [list(p) for p in assignment.pairs],
                "ious": list(assignment.ious),
                "matched": sorted(assignment.matched),
                "dims": {},
            }
            for dim in DIMENSIONS:
                bundle = build_bundle(manifest_m, restricted, dim, simcfg)
                if bundle is None:
                    entry["dims"][dim.value] = {"skipped": "no_valid_gt_slots"}
                    continue
                diag = diagnose(bundle, thresholds, cfg["js_log_base"])
                entry["dims"][dim.value] = _dim_entry(bundle, diag, cfg)
                if cfg.get("matrices_dir"):
                    out = Path(cfg["matrices_dir"]) / instance_id / model_id / f"{dim.value}.json"
                    ingest.write_json(out, _matrix_dump(bundle, diag))
            record["models"][model_id] = entry
        return record
    except MultibindError as exc:
        if cfg["strict"]:
            raise
        return {"instance_id": instance_id, "skip": str(exc)}


def collect_bundles(run: RunConfig) -> tuple[dict, list[dict]]:
    """Similarity bundles keyed by (instance_id, model_id, Dimension).

    Uses each model's own assignment (no cross-model intersection): label
    joins for calibration reference the subjects each model matched itself.
    """
    kernels.warmup()
    mcfg = run.match_config()
    simcfg = SimilarityConfig()
    bundles: dict = {}
    skips: list[dict] = []
    for instance_id in discover_instances(run.dataset):
        inst_dir = Path(run.dataset) / "instances" / instance_id
        try:
            manifest = ingest.load_manifest(inst_dir / "manifest.json", strict=run.strict)
            gt_feat = inst_dir / "features_gt.json"
            if gt_feat.is_file():
                manifest = ingest.attach_gt_features(manifest, ingest.load_features(gt_feat))
            for model_id, root in run.models:
                det_path = Path(root) / instance_id / "detections.json"
                if not det_path.is_file():
                    continue
                dets = ingest.load_detections(det_path, manifest)
                feat_path = Path(root) / instance_id / "features_gen.json"
                if feat_path.is_file():
                    dets = ingest.attach_gen_features(dets, ingest.load_features(feat_path))
                manifest_m = manifest.with_detections(dets)
                assignment = match_instance(manifest_m, mcfg)
                for dim in DIMENSIONS:
                    bundle = build_bundle(manifest_m, assignment, dim, simcfg)
                    if bundle is not None:
                        bundles[(instance_id, model_id, dim)] = bundle
        except MultibindError as exc:
            if run.strict:
                raise
            skips.append({"instance_id": instance_id, "skip": str(exc)})
    return bundles, skips


def _init_worker():
    kernels.warmup()


def evaluate_many(run: RunConfig, thresholds: ThresholdTable) -> tuple[list[dict], list[dict]]:
    """Evaluate every discovered instance; returns (records, skips)."""
    instance_ids = discover_instances(run.dataset)
    cfg = {
        "det_conf": run.det_conf,
        "alpha": run.alpha,
        "dup_thresh": run.dup_thresh,
        "js_log_base": run.js_log_base,
        "strict": run.strict,
        "thresholds": thresholds_to_plain(thresholds),
        "matrices_dir": str(Path(run.out) / "matrices") if run.dump_matrices else None,
    }
    results: list[dict] = []
    if run.jobs <= 1:
        kernels.warmup()
        for iid in instance_ids:
            results.append(evaluate_instance(run.dataset, iid, run.models, cfg))
    else:
        chunk = max(1, len(instance_ids) // (run.jobs * 8))
        with ProcessPoolExecutor(max_workers=run.jobs, initializer=_init_worker) as pool:
            results = list(
                pool.map(
                    evaluate_instance,
                    (run.dataset for _ in instance_ids),
                    instance_ids,
                    (run.models for _ in instance_ids),
                    (cfg for _ in instance_ids),
                    chunksize=chunk,
                )
            )
    records = [r for r in results if "skip" not in r]
    skips = [r for r in results if "skip" in r]
    return records, skips
