"""Cross-model aggregation and report emission.

Subject rates are pooled over the rows of all instances by default
(instance-weighted averaging is available behind a flag); image-level
pattern rates use instances with at least two evaluated rows as the
denominator. Zero-denominator metrics are reported as absent, never as 0.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AggregationError
from .ingest import write_json
from .model import DIMENSIONS
from .pipeline import RunConfig, thresholds_to_plain

OUTCOMES = ("success", "confused", "drift")


def _mean(values) -> Optional[float]:
    # fsum is exactly rounded, so pooling is invariant to record order
    values = list(values)
    return math.fsum(values) / len(values) if values else None


def _pct(count: int, total: int) -> Optional[float]:
    return 100.0 * count / total if total else None


def _aggregate_dim_pooled(entries: list[dict]) -> dict:
    rows = [r for e in entries for r in e["row_records"]]
    eligible = [e for e in entries if e["eligible"]]
    n_rows = len(rows)
    out = {
        "rows_evaluated": n_rows,
        "instances_evaluated": len(entries),
        "pattern_instances": len(eligible),
        "success_pct": _pct(sum(r["outcome"] == "success" for r in rows), n_rows),
        "confused_pct": _pct(sum(r["outcome"] == "confused" for r in rows), n_rows),
        "drift_pct": _pct(sum(r["outcome"] == "drift" for r in rows), n_rows),
        "inconsistent_pct": _pct(sum(r["inconsistent"] for r in rows), n_rows),
        "swap_pct": _pct(sum(e["swap"] for e in eligible), len(eligible)),
        "dominance_pct": _pct(sum(e["dominance"] for e in eligible), len(eligible)),
        "blending_pct": _pct(sum(e["blending"] for e in eligible), len(eligible)),
        "js": _mean(r["js_row"] for r in rows),
        "d_self": _mean(-r["delta_diag"] for r in rows),
        "c_mean": _mean(r["c_mean_term"] for r in rows),
        "c_worst": _mean(r["c_worst_term"] for r in rows),
        "sim_diag_mean": _mean(r["sim_diag"] for r in rows),
    }
    return out


def _aggregate_dim_instance(entries: list[dict]) -> dict:
    """Instance-weighted variant: average per-instance means."""
    populated = [e for e in entries if e["row_records"]]
    eligible = [e for e in entries if e["eligible"]]

    def inst_means(key, transform=lambda x: x):
        return [
            math.fsum(transform(r[key]) for r in e["row_records"]) / len(e["row_records"])
            for e in populated
        ]

    def inst_rate(pred):
        return [
            100.0 * sum(pred(r) for r in e["row_records"]) / len(e["row_records"])
            for e in populated
        ]

    out = {
        "rows_evaluated": sum(len(e["row_records"]) for e in entries),
        "instances_evaluated": len(entries),
        "pattern_instances": len(eligible),
        "success_pct": _mean(inst_rate(lambda r: r["outcome"] == "success")),
        "confused_pct": _mean(inst_rate(lambda r: r["outcome"] == "confused")),
        "drift_pct": _mean(inst_rate(lambda r: r["outcome"] == "drift")),
        "inconsistent_pct": _mean(inst_rate(lambda r: r["inconsistent"])),
        "swap_pct": _pct(sum(e["swap"] for e in eligible), len(eligible)),
        "dominance_pct": _pct(sum(e["dominance"] for e in eligible), len(eligible)),
        "blending_pct": _pct(sum(e["blending"] for e in eligible), len(eligible)),
        "js": _mean(inst_means("js_row")),
        "d_self": _mean(inst_means("delta_diag", lambda v: -v)),
        "c_mean": _mean(inst_means("c_mean_term")),
        "c_worst": _mean(inst_means("c_worst_term")),
        "sim_diag_mean": _mean(inst_means("sim_diag")),
    }
    return out


def aggregate(records: list[dict], run: RunConfig, thresholds) -> dict:
    """Fold per-instance records into the evaluation report."""
    model_ids = [m for m, _ in run.models]
    kept = [r for r in records if "dropped" not in r]
    dropped = [
        {"instance_id": r["instance_id"], "missing_models": r.get("dropped", [])}
        for r in records
        if "dropped" in r
    ]
    if len(model_ids) >= 2:
        if kept and all(not r["fair_matched"] for r in kept):
            raise AggregationError("fair intersection is empty for every instance")
    if not kept and records:
        raise AggregationError("no instance survived the success intersection")

    per_model = {}
    for model_id in model_ids:
        dims = {}
        for dim in DIMENSIONS:
            entries = [
                r["models"][model_id]["dims"][dim.value]
                for r in kept
                if "skipped" not in r["models"][model_id]["dims"][dim.value]
            ]
            skipped = sum(
                1
                for r in kept
                if "skipped" in r["models"][model_id]["dims"][dim.value]
            )
            agg = (
                _aggregate_dim_instance(entries)
                if run.aggregation == "instance"
                else _aggregate_dim_pooled(entries)
            )
            agg["skipped_instances"] = skipped
            dims[dim.value] = agg
        ious = [iou for r in kept for iou in r["models"][model_id]["ious"]]
        per_model[model_id] = {
            "model_id": model_id,
            "matched": sum(len(r["models"][model_id]["matched"]) for r in kept),
            "total_slots": sum(r["n_slots"] for r in kept),
            "mean_iou": _mean(ious),
            "dimensions": dims,
        }

    return {
        "schema": "multibind/1",
        "kind": "report",
        "metadata": {
            "models": model_ids,
            "dataset": run.dataset,
            "thresholds": thresholds_to_plain(thresholds),
            "aggregation": run.aggregation,
            "pattern_eligibility": "instances with >= 2 evaluated rows for the dimension",
            "js_log_base": "e" if run.js_log_base == np.e else run.js_log_base,
            "match_config": {
                "det_conf": run.det_conf,
                "alpha": run.alpha,
                "dup_thresh": run.dup_thresh,
            },
            "instances_evaluated": len(kept),
            "instances_dropped": dropped,
        },
        "models": per_model,
    }


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _fmt(value, decimals) -> str:
    return "" if value is None else f"{value:.{decimals}f}"


CSV_COLUMNS = [
    "model", "dimension", "matched", "total_slots", "mean_iou", "rows",
    "success_pct", "confused_pct", "inconsistent_pct", "drift_pct",
    "pattern_instances", "swap_pct", "dominance_pct", "blending_pct",
    "js", "d_self", "c_mean", "c_worst", "sim_diag_mean",
]


def _csv_rows(report: dict):
    for model_id in report["metadata"]["models"]:
        entry = report["models"][model_id]
        yield {
            "model": model_id,
            "dimension": "overall",
            "matched": entry["matched"],
            "total_slots": entry["total_slots"],
            "mean_iou": _fmt(entry["mean_iou"], 4),
        }
        for dim in DIMENSIONS:
            d = entry["dimensions"][dim.value]
            yield {
                "model": model_id,
                "dimension": dim.value,
                "rows": d["rows_evaluated"],
                "success_pct": _fmt(d["success_pct"], 1),
                "confused_pct": _fmt(d["confused_pct"], 1),
                "inconsistent_pct": _fmt(d["inconsistent_pct"], 1),
                "drift_pct": _fmt(d["drift_pct"], 1),
                "pattern_instances": d["pattern_instances"],
                "swap_pct": _fmt(d["swap_pct"], 1),
                "dominance_pct": _fmt(d["dominance_pct"], 1),
                "blending_pct": _fmt(d["blending_pct"], 1),
                "js": _fmt(d["js"], 4),
                "d_self": _fmt(d["d_self"], 4),
                "c_mean": _fmt(d["c_mean"], 4),
                "c_worst": _fmt(d["c_worst"], 4),
                "sim_diag_mean": _fmt(d["sim_diag_mean"], 4),
            }


def _summary_text(report: dict) -> str:
    lines = []
    header = (
        f"{'model':<22}{'dim':<14}{'Suc.':>7}{'Conf.':>7}{'Inc.':>7}{'Drift':>7}"
        f"{'Swap':>7}{'Dom.':>7}{'Bld.':>7}{'JS':>9}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for model_id in report["metadata"]["models"]:
        entry = report["models"][model_id]
        for dim in DIMENSIONS:
            d = entry["dimensions"][dim.value]
            lines.append(
                f"{model_id:<22}{dim.value:<14}"
                f"{_fmt(d['success_pct'], 1):>7}{_fmt(d['confused_pct'], 1):>7}"
                f"{_fmt(d['inconsistent_pct'], 1):>7}{_fmt(d['drift_pct'], 1):>7}"
                f"{_fmt(d['swap_pct'], 1):>7}{_fmt(d['dominance_pct'], 1):>7}"
                f"{_fmt(d['blending_pct'], 1):>7}{_fmt(d['js'], 4):>9}"
            )
        lines.append(
            f"{model_id:<22}{'overall':<14}matched={entry['matched']}/{entry['total_slots']}"
            f"  mean_iou={_fmt(entry['mean_iou'], 4)}"
        )
        lines.append("")
    return "\n".join(lines) + "\n"


def emit_report(report: dict, records: list[dict], out_dir) -> list[str]:
    """Write rates.json / rows.jsonl / images.jsonl per model plus summaries."""
    out = Path(out_dir)
    written = []
    model_ids = report["metadata"]["models"]
    if not model_ids:
        return written

    for model_id in model_ids:
        per_model = dict(report["models"][model_id])
        per_model["metadata"] = report["metadata"]
        path = out / model_id / "rates.json"
        write_json(path, per_model)
        written.append(str(path))

        rows_path = out / model_id / "rows.jsonl"
        images_path = out / model_id / "images.jsonl"
        rows_path.parent.mkdir(parents=True, exist_ok=True)
        with open(rows_path, "w", encoding="utf-8") as rfh, open(
            images_path, "w", encoding="utf-8"
        ) as ifh:
            for rec in records:
                if "dropped" in rec:
                    continue
                for dim in DIMENSIONS:
                    entry = rec["models"][model_id]["dims"][dim.value]
                    base = {"instance_id": rec["instance_id"], "dimension": dim.value}
                    if "skipped" in entry:
                        ifh.write(json.dumps({**base, "skipped": entry["skipped"]}) + "\n")
                        continue
                    ifh.write(
                        json.dumps(
                            {
                                **base,
                                "eligible": entry["eligible"],
                                "swap": entry["swap"],
                                "dominance": entry["dominance"],
                                "blending": entry["blending"],
                                "n_conf": entry["n_conf"],
                            }
                        )
                        + "\n"
                    )
                    for row in entry["row_records"]:
                        rfh.write(json.dumps({**base, **row}) + "\n")
        written.extend([str(rows_path), str(images_path)])

    csv_path = out / "summary.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, restval="")
        writer.writeheader()
        for row in _csv_rows(report):
            writer.writerow(row)
    written.append(str(csv_path))

    txt_path = out / "summary.txt"
    txt_path.write_text(_summary_text(report), encoding="utf-8")
    written.append(str(txt_path))

    meta_path = out / "run_meta.json"
    write_json(meta_path, report["metadata"])
    written.append(str(meta_path))
    return written
