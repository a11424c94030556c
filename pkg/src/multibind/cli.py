"""Command-line surface: match, eval, calibrate, auc, synth, validate."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from . import ingest
from .calibration import CalibrationResult, calibrate_threshold, collect_scores, roc_auc
from .errors import MultibindError
from .model import DIMENSIONS, Dimension
from .pipeline import RunConfig, collect_bundles, discover_instances, evaluate_many
from .reporting import aggregate, emit_report
from .synth import MODES, synth_dataset


def _parse_models(pairs) -> tuple:
    models = []
    seen = set()
    for item in pairs:
        if "=" not in item:
            raise click.UsageError(f"--model expects <id>=<path>, got {item!r}")
        model_id, root = item.split("=", 1)
        if model_id in seen:
            raise click.UsageError(f"duplicate model id {model_id!r}")
        seen.add(model_id)
        models.append((model_id, root))
    return tuple(models)


def _log_base(value: str) -> float:
    return math.e if value == "e" else 2.0


_shared = [
    click.option("--dataset", required=True, type=click.Path(exists=True), help="Dataset root."),
    click.option("--model", "models", multiple=True, required=True, metavar="ID=PATH",
                 help="Model output root; repeatable."),
    click.option("--out", envvar="MULTIBIND_OUT", default="report", show_default=True,
                 help="Output directory (env MULTIBIND_OUT as fallback)."),
    click.option("--strict", is_flag=True, help="Abort on the first ingest problem."),
    click.option("--det-conf", default=0.3, show_default=True, help="Detection confidence floor."),
    click.option("--alpha", default=0.35, show_default=True, help="Adaptive area factor."),
    click.option("--dup-thresh", default=0.5, show_default=True, help="De-dup overlap threshold."),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Binding diagnostics for multi-subject image generation."""


def _run_config(dataset, models, out, strict, det_conf, alpha, dup_thresh, **extra) -> RunConfig:
    return RunConfig(
        dataset=dataset,
        models=_parse_models(models),
        out=out,
        strict=strict,
        det_conf=det_conf,
        alpha=alpha,
        dup_thresh=dup_thresh,
        **extra,
    )


@main.command()
@shared_options
def match(dataset, models, out, strict, det_conf, alpha, dup_thresh):
    """Match detections to GT slots; emit per-instance assignment records."""
    from .matching import match_instance

    run = _run_config(dataset, models, out, strict, det_conf, alpha, dup_thresh)
    out_dir = Path(run.out)
    skips = []
    handles = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for model_id, _ in run.models:
            path = out_dir / model_id / "assignments.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            handles[model_id] = open(path, "w", encoding="utf-8")
        for instance_id in discover_instances(run.dataset):
            inst_dir = Path(run.dataset) / "instances" / instance_id
            try:
                manifest = ingest.load_manifest(inst_dir / "manifest.json", strict=run.strict)
            except MultibindError as exc:
                if run.strict:
                    raise
                skips.append({"instance_id": instance_id, "skip": str(exc)})
                continue
            for model_id, root in run.models:
                det_path = Path(root) / instance_id / "detections.json"
                if not det_path.is_file():
                    skips.append({"instance_id": instance_id, "model_id": model_id,
                                  "skip": "missing detections.json"})
                    continue
                try:
                    dets = ingest.load_detections(det_path, manifest)
                    assignment = match_instance(manifest.with_detections(dets), run.match_config())
                except MultibindError as exc:
                    if run.strict:
                        raise
                    skips.append({"instance_id": instance_id, "model_id": model_id,
                                  "skip": str(exc)})
                    continue
                handles[model_id].write(json.dumps({
                    "instance_id": instance_id,
                    "n_slots": assignment.n_slots,
                    "pairs": [list(p) for p in assignment.pairs],
                    "ious": list(assignment.ious),
                    "matched": sorted(assignment.matched),
                    "mean_iou": assignment.mean_iou,
                }) + "\n")
    except MultibindError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    finally:
        for fh in handles.values():
            fh.close()
    ingest.write_json(out_dir / "skips.json", {"skips": skips})
    click.echo(f"wrote assignments for {len(run.models)} model(s) to {out_dir}")


@main.command(name="eval")
@shared_options
@click.option("--thresholds", type=click.Path(exists=True), default=None,
              help="Threshold table file (merged over builtin defaults).")
@click.option("--jobs", default=1, show_default=True, help="Parallel workers.")
@click.option("--js-log-base", type=click.Choice(["e", "2"]), default="e", show_default=True)
@click.option("--aggregation", type=click.Choice(["pooled", "instance"]), default="pooled",
              show_default=True)
@click.option("--dump-matrices", is_flag=True, help="Write per-dimension matrix dumps.")
def eval_cmd(dataset, models, out, strict, det_conf, alpha, dup_thresh,
             thresholds, jobs, js_log_base, aggregation, dump_matrices):
    """Run the full evaluation pipeline and write the report."""
    run = _run_config(
        dataset, models, out, strict, det_conf, alpha, dup_thresh,
        thresholds=thresholds, jobs=jobs, js_log_base=_log_base(js_log_base),
        aggregation=aggregation, dump_matrices=dump_matrices,
    )
    try:
        table = ingest.load_thresholds(run.thresholds)
        records, skips = evaluate_many(run, table)
        report = aggregate(records, run, table)
        report["metadata"]["skipped_instances"] = skips
        emit_report(report, records, run.out)
    except MultibindError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"report written to {run.out}")


def _calibration_inputs(dataset, models, labels_path, run):
    labels = ingest.load_labels(labels_path)
    bundles, skips = collect_bundles(run)
    return labels, bundles, skips


def _result_node(res: CalibrationResult) -> dict:
    threshold = res.threshold
    if math.isinf(threshold):
        threshold = "-inf" if threshold < 0 else "+inf"
    return {
        "dimension": res.dimension.value if res.dimension else None,
        "kind": res.kind,
        "threshold": threshold,
        "f1": res.f1_at_threshold,
        "n_pos": res.n_pos,
        "n_neg": res.n_neg,
    }


@main.command()
@shared_options
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
def calibrate(dataset, models, out, strict, det_conf, alpha, dup_thresh, labels_path):
    """Calibrate per-dimension thresholds from human labels (F1 maximization)."""
    run = _run_config(dataset, models, out, strict, det_conf, alpha, dup_thresh)
    try:
        labels, bundles, skips = _calibration_inputs(dataset, models, labels_path, run)
        results = []
        for dim in DIMENSIONS:
            dim_labels = [lb for lb in labels if lb.dimension == dim]
            if not dim_labels:
                continue
            for kind in ("consistency", "confusion"):
                scored, unresolved = collect_scores(bundles, dim_labels, kind, strict=run.strict)
                if unresolved:
                    click.echo(f"warning: {len(unresolved)} unresolved {dim.value}/{kind} labels",
                               err=True)
                if not scored:
                    continue
                results.append(calibrate_threshold(scored, dimension=dim, kind=kind))
        doc = {"schema": "multibind/1", "kind": "calibration",
               "results": [_result_node(r) for r in results], "skips": skips}
        ingest.write_json(Path(run.out) / "calibration.json", doc)
    except MultibindError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for r in results:
        click.echo(f"{r.dimension.value:<14} {r.kind:<12} t={r.threshold:+.4f} F1={r.f1_at_threshold:.4f}")


@main.command()
@shared_options
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
def auc(dataset, models, out, strict, det_conf, alpha, dup_thresh, labels_path):
    """ROC-AUC of delta scores against human labels, per dimension and kind."""
    run = _run_config(dataset, models, out, strict, det_conf, alpha, dup_thresh)
    try:
        labels, bundles, skips = _calibration_inputs(dataset, models, labels_path, run)
        table = []
        for dim in DIMENSIONS:
            row = {"dimension": dim.value}
            for kind in ("consistency", "confusion"):
                scored, unresolved = collect_scores(
                    bundles, [lb for lb in labels if lb.dimension == dim], kind, strict=run.strict
                )
                if unresolved:
                    click.echo(f"warning: {len(unresolved)} unresolved {dim.value}/{kind} labels",
                               err=True)
                row[kind] = roc_auc(scored) if scored else None
            table.append(row)
        doc = {"schema": "multibind/1", "kind": "auc", "rows": table, "skips": skips}
        ingest.write_json(Path(run.out) / "auc.json", doc)
    except MultibindError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for row in table:
        cons = f"{row['consistency']:.4f}" if row["consistency"] is not None else "-"
        conf = f"{row['confusion']:.4f}" if row["confusion"] is not None else "-"
        click.echo(f"{row['dimension']:<14} consistency={cons} confusion={conf}")


@main.command()
@click.option("--out", envvar="MULTIBIND_OUT", default="synth_out", show_default=True)
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--instances", default=4, show_default=True)
@click.option("--models", "model_ids", multiple=True, default=("synthetic",), show_default=True)
@click.option("--slots", type=click.IntRange(2, 4), default=None,
              help="Fixed subject count (default: cycle 2,3,4).")
@click.option("--seed", default=0, show_default=True)
@click.option("--image-size", nargs=2, type=int, default=(96, 64), show_default=True)
@click.option("--dims", multiple=True,
              type=click.Choice([d.value for d in DIMENSIONS]),
              default=tuple(d.value for d in DIMENSIONS), show_default=True,
              help="Dimensions the failure mode is planted in.")
@click.option("--emit-labels", is_flag=True, help="Write construction-truth labels.json.")
def synth(out, mode, instances, model_ids, slots, seed, image_size, dims, emit_labels):
    """Generate a deterministic synthetic dataset exhibiting one failure mode."""
    summary = synth_dataset(
        out, mode, instances=instances, model_ids=model_ids, slots=slots, seed=seed,
        image_size=tuple(image_size), dims=[Dimension(d) for d in dims],
        emit_labels=emit_labels,
    )
    click.echo(json.dumps(summary, indent=1))


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--model", "models", multiple=True, metavar="ID=PATH")
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None)
@click.option("--thresholds", type=click.Path(exists=True), default=None)
def validate(dataset, models, labels_path, thresholds):
    """Strictly load every input file; exit non-zero on the first violation."""
    problems = 0
    try:
        instance_ids = discover_instances(dataset)
        if not instance_ids:
            raise MultibindError(f"no instances found under {dataset}")
        for instance_id in instance_ids:
            inst_dir = Path(dataset) / "instances" / instance_id
            manifest = ingest.load_manifest(inst_dir / "manifest.json", strict=True)
            gt_feat = inst_dir / "features_gt.json"
            if gt_feat.is_file():
                ingest.attach_gt_features(manifest, ingest.load_features(gt_feat))
            for model_id, root in _parse_models(models):
                det_path = Path(root) / instance_id / "detections.json"
                if not det_path.is_file():
                    continue
                dets = ingest.load_detections(det_path, manifest)
                feat_path = Path(root) / instance_id / "features_gen.json"
                if feat_path.is_file():
                    ingest.attach_gen_features(dets, ingest.load_features(feat_path))
        if labels_path:
            ingest.load_labels(labels_path)
        ingest.load_thresholds(thresholds)
    except MultibindError as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(2)
    click.echo(f"ok: {len(instance_ids)} instance(s) validated with 0 warnings")


if __name__ == "__main__":
    main()
