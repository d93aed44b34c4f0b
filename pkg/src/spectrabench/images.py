"""Pixel-buffer conventions and image file IO.

An RGB image is an ``(H, W, 3)`` uint8 numpy array; a grayscale image is
``(H, W)`` uint8. PNG is the output format everywhere (lossless, so
byte-level determinism tests hold); JPEG is accepted for ingest only.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoFailure


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (float64 in/out)."""
    return np.where(values >= 0.0, np.floor(values + 0.5), np.ceil(values - 0.5))


def clamp_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(values, 0.0, 255.0).astype(np.uint8)


def ensure_rgb(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {getattr(img, 'shape', None)}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {img.shape[:2]}")
    return img


def ensure_gray(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise ValueError(f"expected (H, W) array, got shape {getattr(img, 'shape', None)}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 intensities, got {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {img.shape}")
    return img


def load_image(path: Path) -> np.ndarray:
    """Load a PNG or JPEG as an (H, W, 3) uint8 RGB array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc


def save_png(img: np.ndarray, path: Path) -> None:
    """Write an RGB (H, W, 3) or grayscale (H, W) uint8 array as PNG."""
    if img.ndim == 2:
        ensure_gray(img)
        pil = Image.fromarray(img, mode="L")
    else:
        ensure_rgb(img)
        pil = Image.fromarray(img, mode="RGB")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pil.save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc
