"""Corpus-level batch transformation: one modality over one split.

Images are transformed and re-written as PNG; label files are copied
byte-for-byte (every modality is photometric, so geometry never moves).
Per-image work is independent and fans out across a thread pool; output
bytes are identical to a serial run because each image's random stream
comes only from (global seed, image id).

The output tree mirrors the corpus layout and includes a fresh manifest,
so a transformed corpus can be validated, evaluated, and transformed
again::

    out_dir/
      images/<split>/<image_id>.png
      labels/<split>/<image_id>.txt
      manifest.yaml
      transform_report.json
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .corpus import DatasetManifest
from .errors import IoFailure, ParameterError
from .images import load_image, save_png
from .transforms import (
    NightVisionParams,
    ObscuraParams,
    TransformSeed,
    night_vision_transform,
    obscura_transform,
    thermal_transform,
    to_grayscale,
)

MODALITIES = ("gray", "thermal", "night", "obscura")

SEVERITY_NORMALIZATION_NOTE = (
    "severity = alpha*(kernel_len-1)/blur_norm + beta*fog_coeff + gamma*cb_limit; "
    "blur and fog use realized per-image draws, cb uses the configured limit"
)


@dataclass(frozen=True)
class TransformRow:
    image_id: str
    severity: float | None
    output_path: str


@dataclass(frozen=True)
class TransformReport:
    modality: str
    split: str
    image_count: int
    wall_time_s: float
    global_seed: int
    params: dict
    rows: tuple[TransformRow, ...]
    severity_normalization: str | None = None
    nominal_severity: float | None = None


def _transform_one(modality: str, image_id: str, image_path: Path,
                   night: NightVisionParams, obscura: ObscuraParams,
                   seed: TransformSeed, out_path: Path) -> TransformRow:
    img = load_image(image_path)
    severity: float | None = None
    if modality == "gray":
        out = to_grayscale(img)
    elif modality == "thermal":
        out = thermal_transform(img)
    elif modality == "night":
        out = night_vision_transform(img, night)
    else:
        out, severity = obscura_transform(img, obscura, seed, image_id)
    save_png(out, out_path)
    return TransformRow(image_id, severity, str(out_path))


def transform_corpus(manifest: DatasetManifest, split: str, modality: str,
                     out_dir: Path, *,
                     night_params: NightVisionParams | None = None,
                     obscura_params: ObscuraParams | None = None,
                     seed: TransformSeed | None = None,
                     workers: int | None = None) -> TransformReport:
    if modality not in MODALITIES:
        raise ParameterError(f"unknown modality {modality!r}, expected one of {MODALITIES}")
    night = night_params or NightVisionParams()
    obscura = obscura_params or ObscuraParams()
    seed = seed or TransformSeed()
    sp = manifest.split(split)
    out_dir = Path(out_dir)
    images_out = out_dir / "images" / split
    labels_out = out_dir / "labels" / split
    images_out.mkdir(parents=True, exist_ok=True)
    labels_out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    image_ids = manifest.image_ids[split]

    # verify all label files up front so a failure cannot leave a half tree
    label_paths = {}
    for image_id in image_ids:
        label_path = sp.labels_dir / f"{image_id}.txt"
        if not label_path.is_file():
            raise IoFailure(f"label file missing for image {image_id!r}: {label_path}")
        label_paths[image_id] = label_path

    def task(image_id: str) -> TransformRow:
        row = _transform_one(modality, image_id, manifest.image_path(split, image_id),
                             night, obscura, seed, images_out / f"{image_id}.png")
        (labels_out / f"{image_id}.txt").write_bytes(label_paths[image_id].read_bytes())
        return row

    if workers == 1 or len(image_ids) <= 1:
        rows = [task(image_id) for image_id in image_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, image_ids))
    rows.sort(key=lambda r: r.image_id)

    _write_output_manifest(manifest, split, out_dir)

    report = TransformReport(
        modality=modality,
        split=split,
        image_count=len(rows),
        wall_time_s=time.perf_counter() - started,
        global_seed=seed.global_seed,
        params=_params_dict(modality, night, obscura),
        rows=tuple(rows),
        severity_normalization=SEVERITY_NORMALIZATION_NOTE if modality == "obscura" else None,
        nominal_severity=obscura.nominal_severity() if modality == "obscura" else None,
    )
    write_report(report, out_dir / "transform_report.json")
    return report


def _params_dict(modality: str, night: NightVisionParams, obscura: ObscuraParams) -> dict:
    if modality == "night":
        return {"gain": night.gain, "bias": night.bias,
                "channel_weights": list(night.channel_weights)}
    if modality == "obscura":
        return {k: v for k, v in asdict(obscura).items()}
    return {}


def _write_output_manifest(manifest: DatasetManifest, split: str, out_dir: Path) -> None:
    lines = ["classes:"]
    lines += [f"  - {name}" for name in manifest.class_table.names]
    lines += [
        "splits:",
        f"  {split}:",
        f"    images: images/{split}",
        f"    labels: labels/{split}",
    ]
    (out_dir / "manifest.yaml").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(report: TransformReport, path: Path) -> None:
    doc: dict = {
        "modality": report.modality,
        "split": report.split,
        "image_count": report.image_count,
        "wall_time_s": round(report.wall_time_s, 3),
        "seed": report.global_seed,
        "params": report.params,
    }
    if report.severity_normalization is not None:
        doc["severity_normalization"] = report.severity_normalization
        doc["nominal_severity"] = report.nominal_severity
    doc["rows"] = [
        {"image_id": r.image_id, "modality": report.modality,
         "severity": round(r.severity, 6) if r.severity is not None else "-",
         "output_path": r.output_path}
        for r in report.rows
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
