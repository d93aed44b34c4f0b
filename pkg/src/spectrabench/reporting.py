"""Cross-modality comparison tables, timing aggregation, annotated renders.

Timing records arrive as JSON Lines (one object per image with the three
stage durations); an optional leading object without an ``image_id`` field
is treated as a header and returned separately. Comparison rows rank by
mAP@50 descending with mAP@50-95 as the tie-break; F1 is reported but
never ranks.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .corpus import ClassTable, PredRecord
from .errors import DuplicateModalityName, EmptyInput, IoFailure, ParameterError
from .images import ensure_rgb

# one distinct color per class id, cycling past the palette length
CLASS_PALETTE = (
    (230, 25, 75),    # red
    (60, 180, 75),    # green
    (255, 225, 25),   # yellow
    (0, 130, 200),    # blue
    (245, 130, 48),   # orange
    (145, 30, 180),   # purple
    (70, 240, 240),   # cyan
)

TABLE_COLUMNS = ("modality", "preprocess", "inference", "postprocess", "total",
                 "map50", "map50_95", "precision", "recall", "f1", "training_time_h")


@dataclass(frozen=True)
class TimingRecord:
    image_id: str
    preprocess_ms: float
    inference_ms: float
    postprocess_ms: float

    def __post_init__(self) -> None:
        for name in ("preprocess_ms", "inference_ms", "postprocess_ms"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")


@dataclass(frozen=True)
class TimingAggregate:
    preprocess_ms: float
    inference_ms: float
    postprocess_ms: float

    @property
    def total_ms(self) -> float:
        return self.preprocess_ms + self.inference_ms + self.postprocess_ms


@dataclass(frozen=True)
class ModalityResult:
    modality: str
    map50: float
    map50_95: float
    precision: float
    recall: float
    f1: float
    timing: TimingAggregate
    training_time_h: float | None = None


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ModalityResult, ...]  # already ranked; index i is rank i+1
    ranking_key: str = "map50 desc, map50_95 desc"


def aggregate_timing(records: Sequence[TimingRecord]) -> TimingAggregate:
    """Arithmetic mean per stage; the total is the sum of the stage means."""
    if not records:
        raise EmptyInput("cannot aggregate an empty timing list")
    n = len(records)
    return TimingAggregate(
        preprocess_ms=sum(r.preprocess_ms for r in records) / n,
        inference_ms=sum(r.inference_ms for r in records) / n,
        postprocess_ms=sum(r.postprocess_ms for r in records) / n,
    )


def read_timing_file(path: Path) -> tuple[list[TimingRecord], dict | None]:
    """Parse a JSONL timing file; returns (records, header-or-None)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read timing file {path}: {exc}") from exc
    records: list[TimingRecord] = []
    header: dict | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IoFailure(f"{path}:{line_no}: not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise IoFailure(f"{path}:{line_no}: expected an object per line")
        if "image_id" not in obj:
            if header is None and not records:
                header = obj
                continue
            raise IoFailure(f"{path}:{line_no}: record missing image_id")
        try:
            records.append(TimingRecord(
                image_id=str(obj["image_id"]),
                preprocess_ms=float(obj["preprocess_ms"]),
                inference_ms=float(obj["inference_ms"]),
                postprocess_ms=float(obj["postprocess_ms"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise IoFailure(f"{path}:{line_no}: bad timing record: {exc}") from None
    return records, header


def write_timing_file(records: Sequence[TimingRecord], path: Path,
                      header: dict | None = None) -> None:
    lines = []
    if header is not None:
        lines.append(json.dumps(header, sort_keys=True))
    for r in records:
        lines.append(json.dumps({
            "image_id": r.image_id,
            "preprocess_ms": r.preprocess_ms,
            "inference_ms": r.inference_ms,
            "postprocess_ms": r.postprocess_ms,
        }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def compose_comparison(results: Sequence[ModalityResult]) -> ComparisonTable:
    """Rank results by (map50 desc, map50_95 desc); name breaks exact ties so
    the output order never depends on input order."""
    if not results:
        raise EmptyInput("comparison needs at least one modality result")
    names = [r.modality for r in results]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateModalityName(f"duplicate modality name(s): {dupes}")
    ordered = sorted(results, key=lambda r: (-r.map50, -r.map50_95, r.modality))
    return ComparisonTable(rows=tuple(ordered))


def _cell(value: float | None, decimals: int) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def _row_cells(rank: int, r: ModalityResult) -> list[str]:
    return [
        r.modality,
        _cell(r.timing.preprocess_ms, 1),
        _cell(r.timing.inference_ms, 1),
        _cell(r.timing.postprocess_ms, 1),
        _cell(r.timing.total_ms, 1),
        _cell(r.map50, 3),
        _cell(r.map50_95, 3),
        _cell(r.precision, 3),
        _cell(r.recall, 3),
        _cell(r.f1, 3),
        _cell(r.training_time_h, 3),
    ]


def emit(table: ComparisonTable, fmt: str = "markdown") -> str:
    """Serialize the comparison table: ``markdown``, ``csv``, or ``json``."""
    if fmt == "markdown":
        lines = ["| rank | " + " | ".join(TABLE_COLUMNS) + " |",
                 "|---" * (len(TABLE_COLUMNS) + 1) + "|"]
        for i, r in enumerate(table.rows, start=1):
            lines.append("| " + " | ".join([str(i)] + _row_cells(i, r)) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("rank",) + TABLE_COLUMNS)
        for i, r in enumerate(table.rows, start=1):
            writer.writerow([str(i)] + _row_cells(i, r))
        return buf.getvalue()
    if fmt == "json":
        rows = []
        for i, r in enumerate(table.rows, start=1):
            rows.append({
                "rank": i,
                "modality": r.modality,
                "preprocess": r.timing.preprocess_ms,
                "inference": r.timing.inference_ms,
                "postprocess": r.timing.postprocess_ms,
                "total": r.timing.total_ms,
                "map50": r.map50,
                "map50_95": r.map50_95,
                "precision": r.precision,
                "recall": r.recall,
                "f1": r.f1,
                "training_time_h": r.training_time_h,
            })
        return json.dumps({"ranking_key": table.ranking_key, "rows": rows}, indent=2) + "\n"
    raise ParameterError(f"unknown output format {fmt!r}")


# --------------------------------------------------------------------------
# Annotated rendering
# --------------------------------------------------------------------------

def _round_half_away_scalar(v: float) -> int:
    import math
    return int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5))


def _to_pixel_rect(box, width: int, height: int) -> tuple[int, int, int, int]:
    x0f, y0f, x1f, y1f = box.to_xyxy()
    x0 = min(max(_round_half_away_scalar(x0f * width), 0), width - 1)
    y0 = min(max(_round_half_away_scalar(y0f * height), 0), height - 1)
    x1 = min(max(_round_half_away_scalar(x1f * width) - 1, 0), width - 1)
    y1 = min(max(_round_half_away_scalar(y1f * height) - 1, 0), height - 1)
    return x0, y0, max(x1, x0), max(y1, y0)


def class_color(class_id: int) -> tuple[int, int, int]:
    return CLASS_PALETTE[class_id % len(CLASS_PALETTE)]


def render_detections(img: np.ndarray, preds: Sequence[PredRecord],
                      class_table: ClassTable, conf_threshold: float = 0.25) -> np.ndarray:
    """Draw 2-pixel box outlines and ``name conf`` labels for predictions at
    or above the threshold. Pure function: the input array is untouched."""
    ensure_rgb(img)
    height, width = img.shape[:2]
    canvas = Image.fromarray(img.copy(), mode="RGB")
    draw = ImageDraw.Draw(canvas)
    for p in preds:
        if p.confidence < conf_threshold:
            continue
        color = class_color(p.class_id)
        x0, y0, x1, y1 = _to_pixel_rect(p.box, width, height)
        draw.rectangle((x0, y0, x1, y1), outline=color, width=2)
        label = f"{class_table.name_of(p.class_id)} {p.confidence:.2f}"
        draw.text((x0 + 3, y0 + 2), label, fill=color)
    return np.asarray(canvas, dtype=np.uint8)
