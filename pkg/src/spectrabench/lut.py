"""256-entry colormap lookup tables for pseudo-thermal rendering.

The shipped asset (``data/inferno_lut.txt``) was sampled once from the
reference inferno colormap definition; its header line records the
generator and a sha256 over the data lines, which :func:`load_lut`
verifies on every load. Format::

    # inferno-256 generator=<tool> sha256=<hex>
    0 0 0 4
    ...
    255 252 255 164
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import LutAssetError

LUT_SIZE = 256

# BT.601 luma weights, shared with the grayscale transform.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def luma(rgb: tuple[int, int, int] | np.ndarray) -> float:
    r, g, b = (float(v) for v in rgb)
    return LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b


@dataclass(frozen=True)
class ColorMapLUT:
    """Intensity -> RGB table with dark-to-bright endpoints.

    ``entries`` is a (256, 3) uint8 array; entry 0 must carry the minimum
    luma over the table and entry 255 the maximum.
    """

    name: str
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.uint8)
        if entries.shape != (LUT_SIZE, 3):
            raise ValueError(f"LUT must have shape (256, 3), got {entries.shape}")
        lumas = entries.astype(np.float64) @ np.asarray(LUMA_WEIGHTS)
        if lumas[0] != lumas.min():
            raise ValueError("LUT entry 0 must have the minimum luma")
        if lumas[LUT_SIZE - 1] != lumas.max():
            raise ValueError("LUT entry 255 must have the maximum luma")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)


def parse_lut_text(text: str, name: str) -> ColorMapLUT:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise LutAssetError(f"LUT {name!r}: missing provenance header line")
    header = lines[0]
    declared = None
    for field in header.split():
        if field.startswith("sha256="):
            declared = field[len("sha256="):]
    if declared is None:
        raise LutAssetError(f"LUT {name!r}: header carries no sha256 checksum")
    body = "\n".join(lines[1:])
    if not body.endswith("\n"):
        body += "\n"
    actual = hashlib.sha256(body.encode("ascii")).hexdigest()
    if actual != declared:
        raise LutAssetError(f"LUT {name!r}: checksum mismatch "
                            f"(declared {declared[:12]}..., got {actual[:12]}...)")

    entries = np.zeros((LUT_SIZE, 3), dtype=np.uint8)
    seen = 0
    for raw in lines[1:]:
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 4:
            raise LutAssetError(f"LUT {name!r}: malformed entry line {raw!r}")
        idx, r, g, b = (int(p) for p in parts)
        if not 0 <= idx < LUT_SIZE or idx != seen:
            raise LutAssetError(f"LUT {name!r}: entries must be 0..255 in order, got {idx}")
        if not all(0 <= v <= 255 for v in (r, g, b)):
            raise LutAssetError(f"LUT {name!r}: channel out of range in line {raw!r}")
        entries[idx] = (r, g, b)
        seen += 1
    if seen != LUT_SIZE:
        raise LutAssetError(f"LUT {name!r}: expected {LUT_SIZE} entries, got {seen}")
    try:
        return ColorMapLUT(name=name, entries=entries)
    except ValueError as exc:
        raise LutAssetError(f"LUT {name!r}: {exc}") from None


def load_lut(path: Path | None = None) -> ColorMapLUT:
    """Load a LUT asset file; defaults to the packaged inferno table."""
    if path is None:
        text = resources.files("spectrabench.data").joinpath("inferno_lut.txt").read_text("ascii")
        return parse_lut_text(text, "inferno")
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as exc:
        raise LutAssetError(f"cannot read LUT asset {path}: {exc}") from exc
    return parse_lut_text(text, path.stem)


_INFERNO: ColorMapLUT | None = None


def inferno_lut() -> ColorMapLUT:
    """The packaged inferno table, loaded and checksum-verified once."""
    global _INFERNO
    if _INFERNO is None:
        _INFERNO = load_lut()
    return _INFERNO
