"""YOLO-format dataset handling: manifests, class tables, labels, predictions.

Wire formats
------------
Label file, one object per line::

    <class_id> <cx> <cy> <w> <h>

Prediction file adds a trailing confidence::

    <class_id> <cx> <cy> <w> <h> <confidence>

All coordinates are fractions of image width/height (center-size form).
Fractions are serialized with 6 decimal places and LF line endings; files
mirror the image naming (``<image_id>.txt``).

The dataset manifest is a YAML document::

    classes: [artillery, missile, ...]
    splits:
      train: {images: images/train, labels: labels/train}
      test:  {images: images/test,  labels: labels/test}

Relative paths resolve against the manifest's directory. Image ids are the
lexicographically sorted stems of the image files found in each split's
image directory; the label path is derived by swapping the extension.

All types here are immutable after construction and safe to share across
workers; file parsing is order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .errors import (
    AnnotationParseError,
    ClassIdOutOfRange,
    ConfidenceOutOfRange,
    CoordinateOutOfRange,
    IoFailure,
    ManifestUnreadable,
    NonNumericToken,
    SplitMissing,
    WrongTokenCount,
)

# Edge overshoot tolerated before a box is rejected; absorbs the rounding
# noise introduced by 6-decimal serialization of boxes touching 0 or 1.
EDGE_TOLERANCE = 1e-6

VALID_SPLIT_NAMES = ("train", "val", "test")

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class ClassTable:
    """Ordered class names; index in the tuple is the class id."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("class table must not be empty")
        if any(not n for n in self.names):
            raise ValueError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def count(self) -> int:
        return len(self.names)

    def name_of(self, class_id: int) -> str:
        return self.names[class_id]


def _box_violation(cx: float, cy: float, w: float, h: float,
                   tol: float = EDGE_TOLERANCE) -> tuple[str, str] | None:
    """Return (field, reason) for the first box invariant violated, else None."""
    for name, v in (("cx", cx), ("cy", cy)):
        if not 0.0 <= v <= 1.0:
            return name, f"{name} must be in [0, 1], got {v!r}"
    for name, v in (("w", w), ("h", h)):
        if not v > 0.0:
            return name, f"{name} must be > 0, got {v!r}"
        if v > 1.0:
            return name, f"{name} must be <= 1, got {v!r}"
    if cx - w / 2.0 < -tol or cx + w / 2.0 > 1.0 + tol:
        return "w", f"horizontal edges [{cx - w / 2.0!r}, {cx + w / 2.0!r}] exceed [0, 1]"
    if cy - h / 2.0 < -tol or cy + h / 2.0 > 1.0 + tol:
        return "h", f"vertical edges [{cy - h / 2.0!r}, {cy + h / 2.0!r}] exceed [0, 1]"
    return None


@dataclass(frozen=True)
class NormBox:
    """Axis-aligned box in normalized center-size form.

    Edges may overshoot [0, 1] by at most ``EDGE_TOLERANCE``; they are
    clamped when converted to corner form, never mutated in place, so
    serialization round-trips are exact.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        bad = _box_violation(self.cx, self.cy, self.w, self.h)
        if bad is not None:
            raise ValueError(bad[1])

    def to_xyxy(self) -> tuple[float, float, float, float]:
        """Corner form (x0, y0, x1, y1) with edges clamped into [0, 1]."""
        return (
            min(max(self.cx - self.w / 2.0, 0.0), 1.0),
            min(max(self.cy - self.h / 2.0, 0.0), 1.0),
            min(max(self.cx + self.w / 2.0, 0.0), 1.0),
            min(max(self.cy + self.h / 2.0, 0.0), 1.0),
        )

    def area(self) -> float:
        x0, y0, x1, y1 = self.to_xyxy()
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class GtRecord:
    class_id: int
    box: NormBox

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


@dataclass(frozen=True)
class PredRecord:
    class_id: int
    box: NormBox
    confidence: float

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class SplitPaths:
    images_dir: Path
    labels_dir: Path


@dataclass(frozen=True)
class DatasetManifest:
    class_table: ClassTable
    splits: Mapping[str, SplitPaths]
    image_ids: Mapping[str, tuple[str, ...]]

    def split(self, name: str) -> SplitPaths:
        if name not in self.splits:
            raise SplitMissing(f"split {name!r} not in manifest (have {sorted(self.splits)})")
        return self.splits[name]

    def label_path(self, split_name: str, image_id: str) -> Path:
        return self.split(split_name).labels_dir / f"{image_id}.txt"

    def image_path(self, split_name: str, image_id: str) -> Path:
        sp = self.split(split_name)
        for ext in IMAGE_EXTENSIONS:
            p = sp.images_dir / f"{image_id}{ext}"
            if p.exists():
                return p
        raise IoFailure(f"image file for {image_id!r} not found under {sp.images_dir}")


@dataclass(frozen=True)
class Violation:
    file: str
    line: int
    reason: str


@dataclass(frozen=True)
class ValidationReport:
    image_count: int
    label_count: int
    per_class: tuple[int, ...]
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations


# --------------------------------------------------------------------------
# Line parsing / formatting
# --------------------------------------------------------------------------

def _parse_int(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise NonNumericToken(f"expected integer class id, got {token!r}",
                              line_no=line_no, token=token) from None


def _parse_fraction(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise NonNumericToken(f"expected numeric value, got {token!r}",
                              line_no=line_no, token=token) from None
    if not math.isfinite(value):
        raise NonNumericToken(f"expected finite value, got {token!r}",
                              line_no=line_no, token=token)
    return value


def _parse_box_tokens(tokens: Sequence[str], line_no: int) -> NormBox:
    cx, cy, w, h = (_parse_fraction(t, line_no) for t in tokens)
    bad = _box_violation(cx, cy, w, h)
    if bad is not None:
        fld, reason = bad
        token = tokens[("cx", "cy", "w", "h").index(fld)]
        raise CoordinateOutOfRange(reason, line_no=line_no, token=token)
    return NormBox(cx, cy, w, h)


def parse_annotation_line(text: str, *, class_count: int | None = None,
                          line_no: int = 1) -> GtRecord:
    """Parse one ground-truth label line: ``<class_id> <cx> <cy> <w> <h>``."""
    tokens = text.split()
    if len(tokens) != 5:
        raise WrongTokenCount(f"expected 5 tokens, got {len(tokens)}", line_no=line_no)
    class_id = _parse_int(tokens[0], line_no)
    if class_id < 0 or (class_count is not None and class_id >= class_count):
        bound = f"[0, {class_count})" if class_count is not None else ">= 0"
        raise ClassIdOutOfRange(f"class id {class_id} outside {bound}",
                                line_no=line_no, token=tokens[0])
    box = _parse_box_tokens(tokens[1:5], line_no)
    return GtRecord(class_id, box)


def parse_prediction_line(text: str, *, class_count: int | None = None,
                          line_no: int = 1) -> PredRecord:
    """Parse one prediction line: ``<class_id> <cx> <cy> <w> <h> <confidence>``."""
    tokens = text.split()
    if len(tokens) != 6:
        raise WrongTokenCount(f"expected 6 tokens, got {len(tokens)}", line_no=line_no)
    class_id = _parse_int(tokens[0], line_no)
    if class_id < 0 or (class_count is not None and class_id >= class_count):
        bound = f"[0, {class_count})" if class_count is not None else ">= 0"
        raise ClassIdOutOfRange(f"class id {class_id} outside {bound}",
                                line_no=line_no, token=tokens[0])
    box = _parse_box_tokens(tokens[1:5], line_no)
    confidence = _parse_fraction(tokens[5], line_no)
    if not 0.0 <= confidence <= 1.0:
        raise ConfidenceOutOfRange(f"confidence must be in [0, 1], got {confidence!r}",
                                   line_no=line_no, token=tokens[5])
    return PredRecord(class_id, box, confidence)


def format_annotation_line(record: GtRecord) -> str:
    b = record.box
    return f"{record.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}"


def format_prediction_line(record: PredRecord) -> str:
    b = record.box
    return f"{record.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f} {record.confidence:.6f}"


# --------------------------------------------------------------------------
# File-level IO
# --------------------------------------------------------------------------

def _iter_content_lines(text: str) -> Iterable[tuple[int, str]]:
    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            yield line_no, line


def read_annotations(path: Path, *, class_count: int | None = None) -> list[GtRecord]:
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot read label file {path}: {exc}") from exc
    records = []
    for line_no, line in _iter_content_lines(text):
        try:
            records.append(parse_annotation_line(line, class_count=class_count, line_no=line_no))
        except AnnotationParseError as exc:
            raise exc.with_context(str(path)) from None
    return records


def read_predictions(path: Path, *, class_count: int | None = None) -> list[PredRecord]:
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot read prediction file {path}: {exc}") from exc
    records = []
    for line_no, line in _iter_content_lines(text):
        try:
            records.append(parse_prediction_line(line, class_count=class_count, line_no=line_no))
        except AnnotationParseError as exc:
            raise exc.with_context(str(path)) from None
    return records


def write_annotations(records: Sequence[GtRecord], destination: Path) -> None:
    """Write records to ``destination``, one line each, LF-terminated."""
    lines = [format_annotation_line(r) for r in records]
    _write_lines(lines, destination)


def write_predictions(records: Sequence[PredRecord], destination: Path) -> None:
    lines = [format_prediction_line(r) for r in records]
    _write_lines(lines, destination)


def _write_lines(lines: list[str], destination: Path) -> None:
    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        with open(destination, "w", encoding="ascii", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


# --------------------------------------------------------------------------
# Manifest loading and dataset-wide operations
# --------------------------------------------------------------------------

def _scan_image_ids(images_dir: Path) -> tuple[str, ...]:
    if not images_dir.is_dir():
        raise SplitMissing(f"image directory does not exist: {images_dir}")
    stems: dict[str, Path] = {}
    for entry in images_dir.iterdir():
        if not entry.is_file() or entry.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        if entry.stem in stems:
            raise ManifestUnreadable(
                f"duplicate image id {entry.stem!r} in {images_dir} "
                f"({stems[entry.stem].name} vs {entry.name}); label mapping is ambiguous")
        stems[entry.stem] = entry
    return tuple(sorted(stems))


def load_manifest(path: Path) -> DatasetManifest:
    """Load and resolve a dataset manifest, scanning split image directories."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestUnreadable(f"cannot read manifest {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ManifestUnreadable(f"manifest {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestUnreadable(f"manifest {path} must be a mapping")

    classes = doc.get("classes")
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise ManifestUnreadable(f"manifest {path}: 'classes' must be a list of strings")
    try:
        table = ClassTable(tuple(classes))
    except ValueError as exc:
        raise ManifestUnreadable(f"manifest {path}: {exc}") from None

    splits_doc = doc.get("splits")
    if not isinstance(splits_doc, dict) or not splits_doc:
        raise ManifestUnreadable(f"manifest {path}: 'splits' must be a non-empty mapping")

    root = path.parent
    splits: dict[str, SplitPaths] = {}
    image_ids: dict[str, tuple[str, ...]] = {}
    for name, entry in splits_doc.items():
        if name not in VALID_SPLIT_NAMES:
            raise ManifestUnreadable(
                f"manifest {path}: split name {name!r} not one of {VALID_SPLIT_NAMES}")
        if not isinstance(entry, dict) or "images" not in entry or "labels" not in entry:
            raise ManifestUnreadable(
                f"manifest {path}: split {name!r} needs 'images' and 'labels' paths")
        sp = SplitPaths(
            images_dir=(root / entry["images"]).resolve(),
            labels_dir=(root / entry["labels"]).resolve(),
        )
        splits[name] = sp
        image_ids[name] = _scan_image_ids(sp.images_dir)
    return DatasetManifest(class_table=table, splits=splits, image_ids=image_ids)


def validate_dataset(manifest: DatasetManifest,
                     split_names: Sequence[str] | None = None) -> ValidationReport:
    """Scan every image/label pair; collect all violations instead of stopping.

    ``label_count`` counts successfully parsed lines only, so it always
    equals the sum of the per-class counts.
    """
    names = list(split_names) if split_names is not None else sorted(manifest.splits)
    n_classes = manifest.class_table.count
    per_class = [0] * n_classes
    image_count = 0
    label_count = 0
    violations: list[Violation] = []

    for split_name in names:
        sp = manifest.split(split_name)
        ids = manifest.image_ids[split_name]
        image_count += len(ids)
        known_labels = {f"{image_id}.txt" for image_id in ids}
        for image_id in ids:
            label_path = sp.labels_dir / f"{image_id}.txt"
            if not label_path.is_file():
                violations.append(Violation(str(label_path), 0, "label file missing"))
                continue
            text = label_path.read_text(encoding="ascii", errors="replace")
            for line_no, line in _iter_content_lines(text):
                try:
                    rec = parse_annotation_line(line, class_count=n_classes, line_no=line_no)
                except AnnotationParseError as exc:
                    violations.append(Violation(str(label_path), line_no, exc.reason))
                    continue
                per_class[rec.class_id] += 1
                label_count += 1
        if sp.labels_dir.is_dir():
            for orphan in sorted(sp.labels_dir.glob("*.txt")):
                if orphan.name not in known_labels:
                    violations.append(Violation(str(orphan), 0, "label file has no matching image"))

    return ValidationReport(
        image_count=image_count,
        label_count=label_count,
        per_class=tuple(per_class),
        violations=tuple(violations),
    )


def load_split(manifest: DatasetManifest,
               split_name: str) -> list[tuple[str, Path, list[GtRecord]]]:
    """Load one split as (image_id, image path, records) triples.

    Ordering is lexicographic by image id regardless of filesystem
    enumeration order. Unlike :func:`validate_dataset`, this is strict:
    the first missing label file or malformed line raises.
    """
    sp = manifest.split(split_name)
    out: list[tuple[str, Path, list[GtRecord]]] = []
    for image_id in manifest.image_ids[split_name]:
        label_path = sp.labels_dir / f"{image_id}.txt"
        if not label_path.is_file():
            raise IoFailure(f"label file missing for image {image_id!r}: {label_path}")
        records = read_annotations(label_path, class_count=manifest.class_table.count)
        out.append((image_id, manifest.image_path(split_name, image_id), records))
    return out


def load_prediction_dir(pred_dir: Path, image_ids: Sequence[str], *,
                        class_count: int | None = None) -> dict[str, list[PredRecord]]:
    """Read per-image prediction files mirroring the label naming.

    Images without a prediction file contribute an empty list (a detector
    finding nothing writes nothing).
    """
    pred_dir = Path(pred_dir)
    if not pred_dir.is_dir():
        raise IoFailure(f"prediction directory does not exist: {pred_dir}")
    out: dict[str, list[PredRecord]] = {}
    for image_id in image_ids:
        path = pred_dir / f"{image_id}.txt"
        out[image_id] = read_predictions(path, class_count=class_count) if path.is_file() else []
    return out
