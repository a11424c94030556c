"""Binary misbinding indicators, failure patterns, JS shift, continuous metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Dimension, ThresholdTable
from .similarity import SimilarityBundle

OUTCOME_SUCCESS = "success"
OUTCOME_DRIFT = "drift"
OUTCOME_CONFUSED = "confused"


def _diag_mask(rows, cols) -> np.ndarray:
    return np.equal.outer(np.asarray(rows), np.asarray(cols))


def binarize(
    delta: np.ndarray,
    rows: tuple[int, ...],
    cols: tuple[int, ...],
    tau_cons: float,
    tau_conf: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Threshold the delta matrix into consistency (diagonal) and confusion
    (off-diagonal) indicators. Comparisons are inclusive (>=)."""
    if delta.shape[0] == 0:
        z = np.zeros(delta.shape, dtype=np.uint8)
        return z, z.copy()
    diag = _diag_mask(rows, cols)
    cons = (diag & (delta >= tau_cons)).astype(np.uint8)
    conf = (~diag & (delta >= tau_conf)).astype(np.uint8)
    return cons, conf


@dataclass(frozen=True)
class RowOutcome:
    slot: int
    outcome: str  # success | drift | confused
    inconsistent: bool
    confused: bool


def subject_outcomes(
    cons: np.ndarray, conf: np.ndarray, rows: tuple[int, ...], cols: tuple[int, ...]
) -> list[RowOutcome]:
    """Per-row outcome: exactly one of success / drift / confused."""
    col_of = {slot: c for c, slot in enumerate(cols)}
    confused_rows = conf.any(axis=1).tolist()
    cons_l = cons.tolist()
    out = []
    for r, slot in enumerate(rows):
        confused = confused_rows[r]
        consistent = bool(cons_l[r][col_of[slot]])
        if confused:
            outcome = OUTCOME_CONFUSED
        elif consistent:
            outcome = OUTCOME_SUCCESS
        else:
            outcome = OUTCOME_DRIFT
        out.append(
            RowOutcome(slot=slot, outcome=outcome, inconsistent=not consistent, confused=confused)
        )
    return out


@dataclass(frozen=True)
class PatternFlags:
    eligible: bool
    swap: bool = False
    dominance: bool = False
    blending: bool = False
    n_conf: int = 0


def image_patterns(cons: np.ndarray, conf: np.ndarray) -> PatternFlags:
    """Image-level structure of the combined match matrix M = Cons | Conf.

    Requires at least two evaluated rows and two candidate columns; degenerate
    instances are ineligible and excluded from pattern denominators.
    """
    n_rows, n_cols = cons.shape
    cons_l = np.asarray(cons).tolist()
    conf_l = np.asarray(conf).tolist()
    n_conf = sum(v for row in conf_l for v in row)
    if n_rows < 2 or n_cols < 2:
        return PatternFlags(eligible=False, n_conf=n_conf)
    m = [[1 if (cons_l[i][j] or conf_l[i][j]) else 0 for j in range(n_cols)] for i in range(n_rows)]
    r = [sum(row) for row in m]
    c = [sum(m[i][j] for i in range(n_rows)) for j in range(n_cols)]
    swap = n_conf > 0 and max(r) <= 1 and max(c) <= 1
    dominance = sum(1 for cj in c if cj == n_rows) == 1
    blending = max(r) >= 2
    return PatternFlags(
        eligible=True, swap=bool(swap), dominance=bool(dominance), blending=bool(blending),
        n_conf=n_conf,
    )


def _row_softmax(row: np.ndarray) -> np.ndarray:
    e = np.exp(row - row.max())
    return e / e.sum()


def js_divergence(p: np.ndarray, q: np.ndarray, log_base: float = math.e) -> float:
    """Jensen-Shannon divergence with 1/2-weighted mixtures."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_pm = float(np.sum(np.where(p > 0, p * np.log(p / m), 0.0)))
        kl_qm = float(np.sum(np.where(q > 0, q * np.log(q / m), 0.0)))
    js = 0.5 * kl_pm + 0.5 * kl_qm
    if log_base != math.e:
        js /= math.log(log_base)
    return js


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def js_shift(
    s_gt: np.ndarray, s_gen: np.ndarray, log_base: float = math.e
) -> tuple[Optional[float], list[float]]:
    """Row-wise JS shift between softmax row distributions of the two matrices.

    Returns (mean over rows, per-row values); mean is None with zero rows.
    """
    if s_gt.shape[0] == 0:
        return None, []
    p = _softmax_rows(s_gt)
    q = _softmax_rows(s_gen)
    m = 0.5 * (p + q)
    # softmax outputs are strictly positive, so the logs are well defined
    js = 0.5 * np.sum(p * np.log(p / m), axis=1) + 0.5 * np.sum(q * np.log(q / m), axis=1)
    if log_base != math.e:
        js = js / math.log(log_base)
    per_row = js.tolist()
    return float(js.mean()), per_row


@dataclass(frozen=True)
class ContinuousDiagnostics:
    d_self: float
    c_mean: float
    c_worst: float
    sim_diag_mean: float
    offdiag_degenerate: bool  # |V| == 1: mixing terms defined as 0


def continuous_metrics(bundle: SimilarityBundle) -> Optional[ContinuousDiagnostics]:
    """Threshold-free summaries of the delta matrix; None with zero rows."""
    rows, cols = bundle.rows, bundle.cols
    if not rows:
        return None
    delta = bundle.delta.tolist()
    s_gen = bundle.s_gen.tolist()
    positions = bundle.diag_positions()
    diag = [delta[r][c] for r, c in positions]
    sim_diag = [s_gen[r][c] for r, c in positions]
    d_self = -sum(diag) / len(diag)
    if len(cols) < 2:
        return ContinuousDiagnostics(
            d_self=d_self,
            c_mean=0.0,
            c_worst=0.0,
            sim_diag_mean=sum(sim_diag) / len(sim_diag),
            offdiag_degenerate=True,
        )
    mean_terms = []
    worst_terms = []
    for r, slot in enumerate(rows):
        off = [max(delta[r][c], 0.0) for c in range(len(cols)) if cols[c] != slot]
        mean_terms.append(sum(off) / len(off))
        worst_terms.append(max(off))
    return ContinuousDiagnostics(
        d_self=d_self,
        c_mean=sum(mean_terms) / len(mean_terms),
        c_worst=sum(worst_terms) / len(worst_terms),
        sim_diag_mean=sum(sim_diag) / len(sim_diag),
        offdiag_degenerate=False,
    )


@dataclass(frozen=True)
class DimensionDiagnostics:
    """Everything the reporter needs for one (instance, model, dimension)."""

    dimension: Dimension
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    outcomes: list[RowOutcome]
    flags: PatternFlags
    js_mean: Optional[float]
    js_rows: list[float]
    cons: np.ndarray
    conf: np.ndarray


def diagnose(
    bundle: SimilarityBundle, thresholds: ThresholdTable, log_base: float = math.e
) -> DimensionDiagnostics:
    d = bundle.dimension
    cons, conf = binarize(
        bundle.delta, bundle.rows, bundle.cols, thresholds.cons(d), thresholds.conf(d)
    )
    outcomes = subject_outcomes(cons, conf, bundle.rows, bundle.cols)
    flags = image_patterns(cons, conf)
    js_mean, js_rows = js_shift(bundle.s_gt, bundle.s_gen, log_base)
    return DimensionDiagnostics(
        dimension=d,
        rows=bundle.rows,
        cols=bundle.cols,
        outcomes=outcomes,
        flags=flags,
        js_mean=js_mean,
        js_rows=js_rows,
        cons=cons,
        conf=conf,
    )
