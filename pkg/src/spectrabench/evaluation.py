"""Detection metrics: IoU matching, PR curves, AP/mAP, F1, confusion matrix.

Matching is the standard greedy procedure: predictions in descending
confidence (ties broken by input order) each claim the still-unmatched
ground truth with the highest IoU at or above the threshold; every ground
truth is claimed at most once. Because the greedy pass never revisits
earlier predictions, the TP flags of any confidence prefix equal the flags
of matching that prefix alone, which is what makes a single matched sweep
valid for every operating point.

Classes with zero ground truth are excluded from every macro mean (mAP and
P/R/F1 alike); the reported P/R/F1 are macro averages taken at the global
confidence that maximizes macro F1.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import ClassTable, GtRecord, NormBox, PredRecord
from .errors import ClassIdOutOfRange, ParameterError, UnknownImageId

DEFAULT_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

INTERPOLATION_MODES = ("101-point", "all-points")


@dataclass(frozen=True)
class MatchConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    confidence_floor: float = 0.001
    interpolation: str = "101-point"
    cm_conf: float = 0.25
    cm_iou: float = 0.45

    def __post_init__(self) -> None:
        ts = tuple(self.iou_thresholds)
        if not ts or any(not 0.0 < t <= 1.0 for t in ts):
            raise ParameterError(f"IoU thresholds must lie in (0, 1], got {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ParameterError(f"IoU thresholds must be strictly increasing, got {ts}")
        object.__setattr__(self, "iou_thresholds", ts)
        if self.interpolation not in INTERPOLATION_MODES:
            raise ParameterError(
                f"interpolation must be one of {INTERPOLATION_MODES}, got {self.interpolation!r}")
        for name, v in (("confidence_floor", self.confidence_floor),
                        ("cm_conf", self.cm_conf), ("cm_iou", self.cm_iou)):
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ParameterError("counts must be nonnegative")


@dataclass(frozen=True)
class PrCurve:
    """(recall, precision) points swept over descending confidence."""

    points: tuple[tuple[float, float], ...]
    num_gt: int


@dataclass(frozen=True)
class ApResult:
    class_id: int
    iou_threshold: float
    ap: float


@dataclass(frozen=True)
class EvalSummary:
    class_names: tuple[str, ...]
    iou_thresholds: tuple[float, ...]
    interpolation: str
    num_gt: Mapping[int, int]
    ap_grid: Mapping[int, tuple[float, ...]]  # classes with >= 1 GT only
    map50: float
    map50_95: float
    precision: float
    recall: float
    f1: float
    operating_confidence: float
    confusion: np.ndarray  # (N+1, N+1), rows = predicted, cols = true, last = background
    cm_conf: float
    cm_iou: float
    pr_curves: Mapping[int, PrCurve] = field(default_factory=dict)

    def ap_results(self) -> list[ApResult]:
        out = []
        for class_id in sorted(self.ap_grid):
            for t, ap in zip(self.iou_thresholds, self.ap_grid[class_id]):
                out.append(ApResult(class_id, t, ap))
        return out


# --------------------------------------------------------------------------
# Geometry and matching
# --------------------------------------------------------------------------

def iou(a: NormBox, b: NormBox) -> float:
    """Intersection-over-union of two normalized boxes, in [0, 1]."""
    ax0, ay0, ax1, ay1 = a.to_xyxy()
    bx0, by0, bx1, by1 = b.to_xyxy()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def match_detections(preds: Sequence[PredRecord], gts: Sequence[GtRecord],
                     t: float) -> list[bool]:
    """Greedy one-to-one matching for one image and one class.

    Returns a TP flag per prediction, in input order. Ties in confidence
    keep input order; ties in IoU go to the earlier ground truth.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    gt_taken = [False] * len(gts)
    flags = [False] * len(preds)
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(gts):
            if gt_taken[j]:
                continue
            v = iou(preds[i].box, gt.box)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= t:
            gt_taken[best_j] = True
            flags[i] = True
    return flags


# --------------------------------------------------------------------------
# PR curve and average precision
# --------------------------------------------------------------------------

def pr_curve(scored_flags: Sequence[tuple[float, bool]], num_gt: int) -> PrCurve:
    """Cumulative sweep over descending confidence.

    ``scored_flags`` holds (confidence, is_tp) for every prediction of one
    class across all images, in a deterministic input order that breaks
    confidence ties.
    """
    if num_gt < 0:
        raise ParameterError(f"num_gt must be >= 0, got {num_gt}")
    if num_gt == 0:
        return PrCurve((), 0)
    order = sorted(range(len(scored_flags)), key=lambda i: (-scored_flags[i][0], i))
    points = []
    cum_tp = 0
    cum_fp = 0
    for i in order:
        if scored_flags[i][1]:
            cum_tp += 1
        else:
            cum_fp += 1
        points.append((cum_tp / num_gt, cum_tp / (cum_tp + cum_fp)))
    return PrCurve(tuple(points), num_gt)


def _precision_envelope(curve: PrCurve) -> list[tuple[float, float]]:
    """Suffix-max precision at each sweep point (recall is nondecreasing)."""
    env = []
    best = 0.0
    for recall, precision in reversed(curve.points):
        best = max(best, precision)
        env.append((recall, best))
    env.reverse()
    return env


def average_precision(curve: PrCurve, interpolation: str = "101-point") -> float:
    """Area under the monotone precision envelope of a PR curve.

    ``101-point`` samples the envelope on the recall grid {0.00, ..., 1.00};
    ``all-points`` integrates it exactly. Empty curves score 0.
    """
    if interpolation not in INTERPOLATION_MODES:
        raise ParameterError(f"unknown interpolation {interpolation!r}")
    if not curve.points:
        return 0.0
    env = _precision_envelope(curve)
    if interpolation == "all-points":
        # step at the first point of each distinct recall: its suffix max is
        # the envelope value max{precision : recall' >= recall}
        total = 0.0
        prev_recall = 0.0
        for k, (recall, precision) in enumerate(env):
            if k > 0 and env[k - 1][0] == recall:
                continue
            total += (recall - prev_recall) * precision
            prev_recall = recall
        return total
    recalls = [r for r, _ in env]
    total = 0.0
    for i in range(101):
        r = i / 100.0
        k = bisect_left(recalls, r)
        if k < len(env):
            total += env[k][1]
    return total / 101.0


def precision_recall_f1(counts: EvalCounts) -> tuple[float, float, float]:
    """Precision, recall and their harmonic mean, with 0 for empty denominators."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return p, r, f1_from_precision_recall(p, r)


def f1_from_precision_recall(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r else 0.0


# --------------------------------------------------------------------------
# Confusion matrix
# --------------------------------------------------------------------------

def confusion_matrix(preds_by_image: Mapping[str, Sequence[PredRecord]],
                     gts_by_image: Mapping[str, Sequence[GtRecord]],
                     class_table: ClassTable,
                     cm_conf: float = 0.25, cm_iou: float = 0.45) -> np.ndarray:
    """(N+1)x(N+1) counts; rows are predicted classes, columns true classes,
    index N is background (unmatched predictions / ground truths).

    Matching here is cross-class: candidate pairs at IoU >= cm_iou are taken
    greedily by descending IoU, one match per prediction and per ground
    truth, after discarding predictions below cm_conf.
    """
    n = class_table.count
    cm = np.zeros((n + 1, n + 1), dtype=np.int64)
    for image_id in sorted(gts_by_image):
        gts = gts_by_image[image_id]
        preds = [p for p in preds_by_image.get(image_id, ()) if p.confidence >= cm_conf]
        pairs = []
        for pi, p in enumerate(preds):
            for gj, g in enumerate(gts):
                v = iou(p.box, g.box)
                if v >= cm_iou:
                    pairs.append((v, pi, gj))
        pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
        pred_taken = [False] * len(preds)
        gt_taken = [False] * len(gts)
        for v, pi, gj in pairs:
            if pred_taken[pi] or gt_taken[gj]:
                continue
            pred_taken[pi] = True
            gt_taken[gj] = True
            cm[preds[pi].class_id, gts[gj].class_id] += 1
        for pi, p in enumerate(preds):
            if not pred_taken[pi]:
                cm[p.class_id, n] += 1
        for gj, g in enumerate(gts):
            if not gt_taken[gj]:
                cm[n, g.class_id] += 1
    return cm


# --------------------------------------------------------------------------
# Split-level evaluation
# --------------------------------------------------------------------------

def _check_inputs(gts_by_image: Mapping[str, Sequence[GtRecord]],
                  preds_by_image: Mapping[str, Sequence[PredRecord]],
                  n_classes: int) -> None:
    for image_id in preds_by_image:
        if image_id not in gts_by_image:
            raise UnknownImageId(f"predictions reference unknown image {image_id!r}")
    for image_id, records in list(gts_by_image.items()) + list(preds_by_image.items()):
        for rec in records:
            if not 0 <= rec.class_id < n_classes:
                raise ClassIdOutOfRange(
                    f"class id {rec.class_id} outside [0, {n_classes}) in image {image_id!r}")


def evaluate_split(gts_by_image: Mapping[str, Sequence[GtRecord]],
                   preds_by_image: Mapping[str, Sequence[PredRecord]],
                   class_table: ClassTable,
                   config: MatchConfig | None = None) -> EvalSummary:
    """Full engine pass: per-class AP at every threshold, mAPs, macro P/R/F1
    at the F1-optimal confidence, and the confusion matrix."""
    if config is None:
        config = MatchConfig()
    n = class_table.count
    _check_inputs(gts_by_image, preds_by_image, n)

    image_ids = sorted(gts_by_image)
    floor = config.confidence_floor
    preds_kept = {
        image_id: [p for p in preds_by_image.get(image_id, ()) if p.confidence >= floor]
        for image_id in image_ids
    }

    num_gt = {c: 0 for c in range(n)}
    for image_id in image_ids:
        for g in gts_by_image[image_id]:
            num_gt[g.class_id] += 1
    eligible = [c for c in range(n) if num_gt[c] > 0]

    t0 = config.iou_thresholds[0]
    ap_grid: dict[int, tuple[float, ...]] = {}
    curves_t0: dict[int, PrCurve] = {}
    # per-class (confidence, tp-at-t0) pairs feed the operating-point sweep
    scored_t0: dict[int, list[tuple[float, bool]]] = {}

    for c in eligible:
        per_threshold = []
        for t in config.iou_thresholds:
            scored: list[tuple[float, bool]] = []
            for image_id in image_ids:
                preds_c = [p for p in preds_kept[image_id] if p.class_id == c]
                gts_c = [g for g in gts_by_image[image_id] if g.class_id == c]
                flags = match_detections(preds_c, gts_c, t)
                scored.extend((p.confidence, f) for p, f in zip(preds_c, flags))
            curve = pr_curve(scored, num_gt[c])
            per_threshold.append(average_precision(curve, config.interpolation))
            if t == t0:
                curves_t0[c] = curve
                scored_t0[c] = scored
        ap_grid[c] = tuple(per_threshold)

    if eligible:
        map50 = sum(ap_grid[c][0] for c in eligible) / len(eligible)
        map50_95 = sum(sum(ap_grid[c]) for c in eligible) / (len(eligible) * len(config.iou_thresholds))
    else:
        map50 = 0.0
        map50_95 = 0.0

    precision, recall, f1, operating_conf = _best_macro_f1(scored_t0, num_gt, eligible)

    cm = confusion_matrix(preds_by_image, gts_by_image, class_table,
                          cm_conf=config.cm_conf, cm_iou=config.cm_iou)

    return EvalSummary(
        class_names=class_table.names,
        iou_thresholds=config.iou_thresholds,
        interpolation=config.interpolation,
        num_gt=num_gt,
        ap_grid=ap_grid,
        map50=map50,
        map50_95=map50_95,
        precision=precision,
        recall=recall,
        f1=f1,
        operating_confidence=operating_conf,
        confusion=cm,
        cm_conf=config.cm_conf,
        cm_iou=config.cm_iou,
        pr_curves=curves_t0,
    )


def _best_macro_f1(scored_t0: Mapping[int, Sequence[tuple[float, bool]]],
                   num_gt: Mapping[int, int],
                   eligible: Sequence[int]) -> tuple[float, float, float, float]:
    """Sweep unique confidences (descending) for the macro-F1 maximum.

    Returns (precision, recall, f1, confidence); the highest confidence
    among maximizers wins, so the operating point is deterministic.
    """
    if not eligible:
        return 0.0, 0.0, 0.0, 0.0
    candidates = sorted({conf for scored in scored_t0.values() for conf, _ in scored},
                        reverse=True)
    if not candidates:
        return 0.0, 0.0, 0.0, 0.0

    # per class: confidences ascending with cumulative-from-top TP counts
    per_class: dict[int, tuple[list[float], list[int]]] = {}
    for c in eligible:
        ordered = sorted(scored_t0[c], key=lambda x: x[0])  # ascending confidence
        confs = [conf for conf, _ in ordered]
        tps_desc = list(reversed([flag for _, flag in ordered]))
        cum = 0
        cum_tp_desc = []
        for flag in tps_desc:
            cum += int(flag)
            cum_tp_desc.append(cum)
        per_class[c] = (confs, cum_tp_desc)

    best = (-1.0, 0.0, 0.0, 0.0)  # f1, precision, recall, confidence
    for cand in candidates:
        p_sum = r_sum = f_sum = 0.0
        for c in eligible:
            confs, cum_tp_desc = per_class[c]
            kept = len(confs) - bisect_left(confs, cand)
            tp = cum_tp_desc[kept - 1] if kept else 0
            p, r, f = precision_recall_f1(EvalCounts(tp, kept - tp, num_gt[c] - tp))
            p_sum += p
            r_sum += r
            f_sum += f
        k = len(eligible)
        if f_sum / k > best[0]:
            best = (f_sum / k, p_sum / k, r_sum / k, cand)
    return best[1], best[2], best[0], best[3]


# --------------------------------------------------------------------------
# Summary document (structured-text wire format)
# --------------------------------------------------------------------------

def summary_to_dict(summary: EvalSummary) -> dict:
    labels = list(summary.class_names) + ["background"]
    counts = summary.confusion
    row_sums = counts.sum(axis=1, keepdims=True)
    normalized = np.divide(counts, row_sums, out=np.zeros(counts.shape, dtype=np.float64),
                           where=row_sums > 0)
    per_class = {}
    for c in sorted(summary.ap_grid):
        curve = summary.pr_curves.get(c)
        per_class[summary.class_names[c]] = {
            "class_id": c,
            "num_gt": summary.num_gt[c],
            "ap": {f"{t:.2f}": summary.ap_grid[c][k]
                   for k, t in enumerate(summary.iou_thresholds)},
            "pr_curve": [[r, p] for r, p in curve.points] if curve else [],
        }
    return {
        "map50": summary.map50,
        "map50_95": summary.map50_95,
        "precision": summary.precision,
        "recall": summary.recall,
        "f1": summary.f1,
        "averaging": "macro",
        "operating_confidence": summary.operating_confidence,
        "interpolation": summary.interpolation,
        "iou_thresholds": list(summary.iou_thresholds),
        "per_class": per_class,
        "confusion_matrix": {
            "labels": labels,
            "counts": counts.tolist(),
            "row_normalized": [[round(v, 6) for v in row] for row in normalized.tolist()],
            "cm_conf": summary.cm_conf,
            "cm_iou": summary.cm_iou,
        },
    }


def write_summary(summary: EvalSummary, path) -> None:
    from pathlib import Path
    doc = json.dumps(summary_to_dict(summary), indent=2, sort_keys=False) + "\n"
    Path(path).write_text(doc, encoding="utf-8")


def load_summary_dict(path) -> dict:
    from pathlib import Path
    return json.loads(Path(path).read_text(encoding="utf-8"))
