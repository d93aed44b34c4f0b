"""Brute-force reference evaluator for cross-checking the metrics engine.

Everything in this module is re-implemented from the matching and AP
definitions — none of it calls into :mod:`spectrabench.evaluation`'s
matcher, PR sweep, or interpolation. The AP here enumerates every
confidence cut (one per prediction rank), re-matches the kept subset from
scratch at each cut, evaluates precision/recall directly from counts, and
integrates the precision envelope literally. Agreement with the engine in
all-points mode is the equivalence assertion used by the acceptance suite
and the ``oracle`` CLI subcommand.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import ClassTable, GtRecord, NormBox, PredRecord
from .errors import InstanceTooLarge
from .evaluation import MatchConfig, evaluate_split

ORACLE_MAX_PREDICTIONS = 32


def _edges(box: NormBox) -> tuple[float, float, float, float]:
    return (
        min(max(box.cx - box.w / 2.0, 0.0), 1.0),
        min(max(box.cy - box.h / 2.0, 0.0), 1.0),
        min(max(box.cx + box.w / 2.0, 0.0), 1.0),
        min(max(box.cy + box.h / 2.0, 0.0), 1.0),
    )


def _iou(a: NormBox, b: NormBox) -> float:
    ax0, ay0, ax1, ay1 = _edges(a)
    bx0, by0, bx1, by1 = _edges(b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def oracle_match_flags(preds: Sequence[PredRecord], gts: Sequence[GtRecord],
                       t: float) -> list[bool]:
    """Greedy matcher re-implementation for one image and one class:
    descending confidence (input order on ties), best available IoU >= t,
    one ground truth per prediction."""
    remaining = list(range(len(gts)))
    flags = [False] * len(preds)
    for i in sorted(range(len(preds)), key=lambda k: (-preds[k].confidence, k)):
        chosen = -1
        chosen_iou = 0.0
        for j in remaining:
            v = _iou(preds[i].box, gts[j].box)
            if v > chosen_iou:
                chosen_iou = v
                chosen = j
        if chosen >= 0 and chosen_iou >= t:
            remaining.remove(chosen)
            flags[i] = True
    return flags


# --------------------------------------------------------------------------
# Cut-enumeration AP
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _FlatPred:
    image_id: str
    record: PredRecord
    flat_index: int  # position in the canonical (image, file-order) flattening


def _canonical_rank(preds: list[_FlatPred]) -> list[_FlatPred]:
    return sorted(preds, key=lambda fp: (-fp.record.confidence, fp.flat_index))


def brute_force_ap(gts_by_image: Mapping[str, Sequence[GtRecord]],
                   preds_by_image: Mapping[str, Sequence[PredRecord]],
                   class_id: int, iou_threshold: float) -> float:
    """AP for one class at one threshold by explicit cut enumeration.

    For every rank k the first k predictions (canonical order) are
    re-matched from scratch, giving one (recall, precision) operating
    point; the area under the monotone envelope of those points is the AP.
    """
    total_preds = sum(len(v) for v in preds_by_image.values())
    if total_preds > ORACLE_MAX_PREDICTIONS:
        raise InstanceTooLarge(
            f"oracle caps at {ORACLE_MAX_PREDICTIONS} predictions, got {total_preds}")

    image_ids = sorted(gts_by_image)
    num_gt = sum(1 for i in image_ids for g in gts_by_image[i] if g.class_id == class_id)
    if num_gt == 0:
        return 0.0

    flat: list[_FlatPred] = []
    for image_id in image_ids:
        for rec in preds_by_image.get(image_id, ()):
            if rec.class_id == class_id:
                flat.append(_FlatPred(image_id, rec, len(flat)))
    ranked = _canonical_rank(flat)
    if not ranked:
        return 0.0

    points: list[tuple[float, float]] = []
    for k in range(1, len(ranked) + 1):
        kept = ranked[:k]
        tp = 0
        for image_id in image_ids:
            subset = [fp.record for fp in sorted(
                (fp for fp in kept if fp.image_id == image_id),
                key=lambda fp: fp.flat_index)]
            gts = [g for g in gts_by_image[image_id] if g.class_id == class_id]
            tp += sum(oracle_match_flags(subset, gts, iou_threshold))
        points.append((tp / num_gt, tp / k))

    # literal envelope integration over distinct recalls, ascending
    area = 0.0
    prev_recall = 0.0
    for idx, (recall, _) in enumerate(points):
        if idx + 1 < len(points) and points[idx + 1][0] == recall:
            continue
        envelope = max(p for r, p in points if r >= recall)
        area += (recall - prev_recall) * envelope
        prev_recall = recall
    return area


def brute_force_evaluate(gts_by_image: Mapping[str, Sequence[GtRecord]],
                         preds_by_image: Mapping[str, Sequence[PredRecord]],
                         n_classes: int,
                         iou_thresholds: Sequence[float],
                         confidence_floor: float = 0.001) -> dict:
    """Reference per-class AP grid and mAPs, mirroring the engine's exclusion
    rule (classes with zero ground truth do not enter the means)."""
    kept = {
        image_id: [p for p in preds_by_image.get(image_id, ())
                   if p.confidence >= confidence_floor]
        for image_id in gts_by_image
    }
    num_gt = {c: 0 for c in range(n_classes)}
    for records in gts_by_image.values():
        for g in records:
            num_gt[g.class_id] += 1
    eligible = [c for c in range(n_classes) if num_gt[c] > 0]

    ap_grid = {
        c: tuple(brute_force_ap(gts_by_image, kept, c, t) for t in iou_thresholds)
        for c in eligible
    }
    if eligible:
        map50 = sum(ap_grid[c][0] for c in eligible) / len(eligible)
        map50_95 = sum(sum(ap_grid[c]) for c in eligible) / (len(eligible) * len(iou_thresholds))
    else:
        map50 = map50_95 = 0.0
    return {"ap_grid": ap_grid, "map50": map50, "map50_95": map50_95, "num_gt": num_gt}


# --------------------------------------------------------------------------
# Random micro-corpora and the equivalence suite
# --------------------------------------------------------------------------

CONF_GRID = [round(0.05 * i, 2) for i in range(1, 21)]  # ties are deliberate
COORD_GRID = [round(0.05 * i, 2) for i in range(2, 19)]
SIZE_GRID = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4]


def _random_box(rng: random.Random) -> NormBox:
    cx = rng.choice(COORD_GRID)
    cy = rng.choice(COORD_GRID)
    w = min(rng.choice(SIZE_GRID), 2 * cx, 2 * (1 - cx))
    h = min(rng.choice(SIZE_GRID), 2 * cy, 2 * (1 - cy))
    return NormBox(cx, cy, max(w, 0.05), max(h, 0.05))


def random_micro_corpus(rng: random.Random, max_images: int = 5,
                        max_boxes: int = 6, max_classes: int = 3,
                        ) -> tuple[dict[str, list[GtRecord]], dict[str, list[PredRecord]], int]:
    """A tiny random scene set: ragged images, frequent confidence and IoU
    ties, and occasionally classes that only appear in predictions."""
    n_classes = rng.randint(1, max_classes)
    n_images = rng.randint(1, max_images)
    gts: dict[str, list[GtRecord]] = {}
    preds: dict[str, list[PredRecord]] = {}
    for i in range(n_images):
        image_id = f"im{i:02d}"
        gts[image_id] = [
            GtRecord(rng.randrange(n_classes), _random_box(rng))
            for _ in range(rng.randint(0, max_boxes))
        ]
        preds[image_id] = []
        for _ in range(rng.randint(0, max_boxes)):
            if gts[image_id] and rng.random() < 0.6:
                # perturb a real object so matches at varied IoU are common
                base = rng.choice(gts[image_id]).box
                dx = rng.choice([-0.1, -0.05, 0.0, 0.05, 0.1])
                dy = rng.choice([-0.05, 0.0, 0.05])
                cx = min(max(base.cx + dx, base.w / 2), 1 - base.w / 2)
                cy = min(max(base.cy + dy, base.h / 2), 1 - base.h / 2)
                box = NormBox(cx, cy, base.w, base.h)
            else:
                box = _random_box(rng)
            preds[image_id].append(
                PredRecord(rng.randrange(n_classes), box, rng.choice(CONF_GRID)))
    return gts, preds, n_classes


@dataclass
class EquivalenceReport:
    instances: int = 0
    max_ap_diff: float = 0.0
    max_map_diff: float = 0.0
    mismatches: list[str] = field(default_factory=list)
    monotonicity_breaks: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches and not self.monotonicity_breaks


def run_equivalence_suite(n_instances: int = 1000, seed: int = 20250001,
                          tolerance: float = 1e-9) -> EquivalenceReport:
    """Engine-vs-oracle agreement over random micro-corpora (all-points mode),
    plus the per-instance mAP@50-95 <= mAP@50 monotonicity check."""
    rng = random.Random(seed)
    report = EquivalenceReport()
    for idx in range(n_instances):
        gts, preds, n_classes = random_micro_corpus(rng)
        table = ClassTable(tuple(f"c{i}" for i in range(n_classes)))
        config = MatchConfig(interpolation="all-points")
        summary = evaluate_split(gts, preds, table, config)
        reference = brute_force_evaluate(gts, preds, n_classes, config.iou_thresholds,
                                         config.confidence_floor)
        report.instances += 1

        if set(summary.ap_grid) != set(reference["ap_grid"]):
            report.mismatches.append(
                f"instance {idx}: eligible classes differ "
                f"{sorted(summary.ap_grid)} vs {sorted(reference['ap_grid'])}")
            continue
        for c in summary.ap_grid:
            for k, t in enumerate(config.iou_thresholds):
                diff = abs(summary.ap_grid[c][k] - reference["ap_grid"][c][k])
                report.max_ap_diff = max(report.max_ap_diff, diff)
                if diff > tolerance:
                    report.mismatches.append(
                        f"instance {idx}: class {c} AP@{t:.2f} differs by {diff:.3e}")
        for name in ("map50", "map50_95"):
            diff = abs(getattr(summary, name) - reference[name])
            report.max_map_diff = max(report.max_map_diff, diff)
            if diff > tolerance:
                report.mismatches.append(f"instance {idx}: {name} differs by {diff:.3e}")
        if summary.map50_95 > summary.map50 + 1e-12:
            report.monotonicity_breaks.append(
                f"instance {idx}: map50_95 {summary.map50_95!r} > map50 {summary.map50!r}")
        for c, grid in summary.ap_grid.items():
            for k in range(1, len(grid)):
                if grid[k] > grid[k - 1] + 1e-12:
                    report.monotonicity_breaks.append(
                        f"instance {idx}: class {c} AP rises from threshold "
                        f"{config.iou_thresholds[k-1]:.2f} to {config.iou_thresholds[k]:.2f}")
    return report
