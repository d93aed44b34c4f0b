from __future__ import annotations

import io
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from spectrabench.corpus import DatasetManifest, load_manifest

MILITARY_CLASSES = [
    "artillery", "missile", "radar", "rocket_launcher", "soldier", "tank", "vehicle",
]


def tiny_png_bytes() -> bytes:
    """A minimal valid 1x1 RGB PNG, for tests that never decode pixels."""
    buf = io.BytesIO()
    Image.new("RGB", (1, 1), (10, 20, 30)).save(buf, format="PNG")
    return buf.getvalue()


def synth_image(seed: int, width: int = 48, height: int = 32) -> np.ndarray:
    """Deterministic structured test image: gradients plus seeded noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    r = (xx * 255 // max(width - 1, 1)).astype(np.uint8)
    g = (yy * 255 // max(height - 1, 1)).astype(np.uint8)
    b = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
    return np.stack([r, g, b], axis=-1)


def write_manifest(root: Path, classes: list[str], splits: dict[str, tuple[str, str]]) -> Path:
    lines = ["classes:"]
    lines += [f"  - {c}" for c in classes]
    lines.append("splits:")
    for name, (images, labels) in splits.items():
        lines.append(f"  {name}:")
        lines.append(f"    images: {images}")
        lines.append(f"    labels: {labels}")
    path = root / "manifest.yaml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_corpus(root: Path, *, split: str = "test", n_images: int = 3,
                 classes: list[str] | None = None, labels_per_image: int = 2,
                 real_pixels: bool = False, width: int = 48, height: int = 32) -> Path:
    """Create a small on-disk corpus and return the manifest path.

    Label lines are deterministic in the image index so tests can predict
    per-class counts. With ``real_pixels`` the images are decodable
    structured PNGs; otherwise they are 1x1 stubs (validation never decodes).
    """
    classes = classes if classes is not None else MILITARY_CLASSES
    images_dir = root / "images" / split
    labels_dir = root / "labels" / split
    images_dir.mkdir(parents=True, exist_ok=True)
    labels_dir.mkdir(parents=True, exist_ok=True)
    stub = tiny_png_bytes()
    for i in range(n_images):
        image_id = f"img_{i:04d}"
        if real_pixels:
            arr = synth_image(seed=1000 + i, width=width, height=height)
            Image.fromarray(arr, mode="RGB").save(images_dir / f"{image_id}.png")
        else:
            (images_dir / f"{image_id}.png").write_bytes(stub)
        lines = []
        for j in range(labels_per_image):
            class_id = (i + j) % len(classes)
            cx = 0.2 + 0.1 * j
            cy = 0.3 + 0.05 * ((i + j) % 5)
            lines.append(f"{class_id} {cx:.6f} {cy:.6f} 0.100000 0.100000")
        (labels_dir / f"{image_id}.txt").write_text("\n".join(lines) + ("\n" if lines else ""),
                                                    encoding="ascii")
    return write_manifest(root, classes, {split: (f"images/{split}", f"labels/{split}")})


@pytest.fixture
def small_corpus(tmp_path) -> DatasetManifest:
    manifest_path = build_corpus(tmp_path, n_images=3)
    return load_manifest(manifest_path)
