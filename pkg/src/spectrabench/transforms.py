"""Photometric modality transforms: grayscale, thermal, night vision, obscura.

Every operation here is a pure function of its inputs; the randomized
obscura pipeline draws all of its magnitudes from a per-image stream
derived from ``(global_seed, image_id)``, so corpus results are identical
regardless of processing order or worker count.

Pixel math convention: compute in float64, round half away from zero,
clamp to [0, 255]. All transforms preserve image dimensions; none move
geometry, so box annotations stay valid unchanged.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeInput, ParameterError
from .images import clamp_u8, ensure_gray, ensure_rgb, round_half_away
from .lut import ColorMapLUT, inferno_lut

LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114


# --------------------------------------------------------------------------
# Stage operations
# --------------------------------------------------------------------------

def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B) per pixel."""
    ensure_rgb(img)
    f = img.astype(np.float64)
    y = LUMA_R * f[..., 0] + LUMA_G * f[..., 1] + LUMA_B * f[..., 2]
    return round_half_away(y).astype(np.uint8)


def normalize_contrast(gray: np.ndarray) -> np.ndarray:
    """Stretch intensities to the full 0-255 range; constant images go to 0."""
    ensure_gray(gray)
    lo = int(gray.min())
    hi = int(gray.max())
    if hi == lo:
        return np.zeros_like(gray)
    scaled = (gray.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return round_half_away(scaled).astype(np.uint8)


def apply_colormap(gray: np.ndarray, lut: ColorMapLUT) -> np.ndarray:
    ensure_gray(gray)
    return lut.entries[gray]


def thermal_transform(img: np.ndarray, lut: ColorMapLUT | None = None) -> np.ndarray:
    """Pseudo-thermal rendering: grayscale, contrast-normalize, dark-to-bright LUT."""
    if lut is None:
        lut = inferno_lut()
    return apply_colormap(normalize_contrast(to_grayscale(img)), lut)


def linear_scale_abs(gray: np.ndarray, gain: float, bias: float) -> np.ndarray:
    """Per-pixel clamp(round(gain * x + bias)); brightness/contrast boost."""
    ensure_gray(gray)
    if gain <= 0:
        raise ParameterError(f"gain must be > 0, got {gain}")
    return clamp_u8(round_half_away(gain * gray.astype(np.float64) + bias))


@dataclass(frozen=True)
class NightVisionParams:
    """Intensifier-style enhancement: boosted luma pushed through a green tint.

    Green must dominate (w_g >= w_r, w_b) so the output reads as a
    monochromatic green phosphor display.
    """

    gain: float = 1.2
    bias: float = 30.0
    channel_weights: tuple[float, float, float] = (0.1, 1.0, 0.1)

    def __post_init__(self) -> None:
        if self.gain <= 0:
            raise ParameterError(f"gain must be > 0, got {self.gain}")
        if not 0.0 <= self.bias <= 255.0:
            raise ParameterError(f"bias must be in [0, 255], got {self.bias}")
        w_r, w_g, w_b = self.channel_weights
        if not (0.0 <= w_r <= w_g and 0.0 <= w_b <= w_g and w_g <= 1.5):
            raise ParameterError(
                f"channel weights need 0 <= w_r, w_b <= w_g <= 1.5, got {self.channel_weights}")


def night_vision_transform(img: np.ndarray,
                           params: NightVisionParams | None = None) -> np.ndarray:
    if params is None:
        params = NightVisionParams()
    g = linear_scale_abs(to_grayscale(img), params.gain, params.bias).astype(np.float64)
    w_r, w_g, w_b = params.channel_weights
    out = np.stack(
        [clamp_u8(round_half_away(w * g)) for w in (w_r, w_g, w_b)],
        axis=-1,
    )
    return out


def _line_kernel_offsets(kernel_len: int, angle_deg: float) -> list[tuple[int, int]]:
    """(dy, dx) offsets of a 1-pixel-wide centered line at the given angle."""
    if kernel_len == 1:
        return [(0, 0)]
    rad = math.radians(angle_deg)
    dx, dy = math.cos(rad), -math.sin(rad)
    half = kernel_len // 2
    offsets = set()
    for t in range(-half, half + 1):
        ox = math.floor(t * dx + 0.5) if t * dx >= 0 else math.ceil(t * dx - 0.5)
        oy = math.floor(t * dy + 0.5) if t * dy >= 0 else math.ceil(t * dy - 0.5)
        offsets.add((int(oy), int(ox)))
    return sorted(offsets)


def motion_blur(img: np.ndarray, kernel_len: int, angle_deg: float) -> np.ndarray:
    """Directional box blur along a line kernel; borders replicate edges.

    Accepts RGB or grayscale buffers. The average is computed in integer
    arithmetic so results are bit-identical across platforms.
    """
    if kernel_len < 1 or kernel_len % 2 == 0:
        raise ParameterError(f"kernel length must be odd and >= 1, got {kernel_len}")
    if img.ndim == 2:
        ensure_gray(img)
    else:
        ensure_rgb(img)
    offsets = _line_kernel_offsets(kernel_len, angle_deg)
    n = len(offsets)
    if n == 1:
        return img.copy()

    pad_y = max(abs(dy) for dy, _ in offsets)
    pad_x = max(abs(dx) for _, dx in offsets)
    pad_spec = ((pad_y, pad_y), (pad_x, pad_x)) + (((0, 0),) if img.ndim == 3 else ())
    padded = np.pad(img, pad_spec, mode="edge").astype(np.uint32)

    h, w = img.shape[:2]
    acc = np.zeros(img.shape, dtype=np.uint32)
    for dy, dx in offsets:
        y0, x0 = pad_y + dy, pad_x + dx
        acc += padded[y0:y0 + h, x0:x0 + w]
    # integer round-half-up of acc / n (values are nonnegative)
    return ((2 * acc + n) // (2 * n)).astype(np.uint8)


def apply_fog(img: np.ndarray, fog_coeff: float) -> np.ndarray:
    """Blend every channel toward white: (1 - f) * x + f * 255."""
    if not 0.0 <= fog_coeff <= 1.0:
        raise ParameterError(f"fog coefficient must be in [0, 1], got {fog_coeff}")
    if img.ndim == 2:
        ensure_gray(img)
    else:
        ensure_rgb(img)
    blended = (1.0 - fog_coeff) * img.astype(np.float64) + fog_coeff * 255.0
    return round_half_away(blended).astype(np.uint8)


def adjust_contrast_brightness(img: np.ndarray, contrast_factor: float,
                               brightness_shift: float) -> np.ndarray:
    """clamp(round(factor * (x - 128) + 128 + 255 * shift)) per channel.

    ``brightness_shift`` is a fraction of full scale, so +-0.1 moves the
    image by +-25.5 intensity levels around the mid-gray pivot.
    """
    if contrast_factor <= 0:
        raise ParameterError(f"contrast factor must be > 0, got {contrast_factor}")
    if img.ndim == 2:
        ensure_gray(img)
    else:
        ensure_rgb(img)
    f = img.astype(np.float64)
    out = contrast_factor * (f - 128.0) + 128.0 + 255.0 * brightness_shift
    return clamp_u8(round_half_away(out))


# --------------------------------------------------------------------------
# Obscuration severity and the composite obscura pipeline
# --------------------------------------------------------------------------

def severity_score(m_b: float, f_g: float, c_b: float,
                   alpha: float = 1.0, beta: float = 1.0, gamma: float = 1.0) -> float:
    """Weighted degradation score alpha*m_b + beta*f_g + gamma*c_b."""
    for name, v in (("m_b", m_b), ("f_g", f_g), ("c_b", c_b),
                    ("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if v < 0:
            raise NegativeInput(f"{name} must be nonnegative, got {v}")
    return alpha * m_b + beta * f_g + gamma * c_b


@dataclass(frozen=True)
class ObscuraParams:
    """Limits and weights for the blur -> fog -> contrast/brightness pipeline.

    ``blur_norm`` maps a realized kernel length k to the severity component
    (k - 1) / blur_norm; the default of 40 puts the minimal kernel (3) at
    0.05 so the default limits sum to a nominal severity of 0.25.
    """

    blur_limit: int = 3
    fog_coeff: float = 0.1
    cb_limit: float = 0.1
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    blur_norm: float = 40.0

    def __post_init__(self) -> None:
        if self.blur_limit < 3 or self.blur_limit % 2 == 0:
            raise ParameterError(f"blur limit must be odd and >= 3, got {self.blur_limit}")
        for name, v in (("fog_coeff", self.fog_coeff), ("cb_limit", self.cb_limit)):
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}")
        for name, v in (("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)):
            if v < 0:
                raise ParameterError(f"{name} must be nonnegative, got {v}")
        if self.blur_norm <= 0:
            raise ParameterError(f"blur_norm must be > 0, got {self.blur_norm}")

    def blur_component(self, kernel_len: int) -> float:
        return (kernel_len - 1) / self.blur_norm

    def nominal_severity(self) -> float:
        """Severity of the configured limits themselves (no sampling)."""
        return severity_score(self.blur_component(self.blur_limit),
                              self.fog_coeff, self.cb_limit,
                              self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class TransformSeed:
    """Root seed; per-image streams are derived by hashing with the image id.

    The derivation uses sha256 rather than Python's ``hash`` so streams
    are stable across processes and platforms.
    """

    global_seed: int = 0

    def rng_for(self, image_id: str) -> np.random.Generator:
        material = f"{self.global_seed}\x1f{image_id}".encode("utf-8")
        derived = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
        return np.random.default_rng(derived)


@dataclass(frozen=True)
class ObscuraDraw:
    """Realized magnitudes for one image, in the order they are sampled."""

    kernel_len: int
    angle_deg: float
    fog_coeff: float
    contrast_factor: float
    brightness_shift: float


def draw_obscura(params: ObscuraParams, rng: np.random.Generator) -> ObscuraDraw:
    """Sample one set of obscura magnitudes. Draw order is part of the
    determinism contract; do not reorder."""
    n_odd = (params.blur_limit - 3) // 2 + 1
    kernel_len = 3 + 2 * int(rng.integers(0, n_odd))
    angle_deg = float(rng.uniform(0.0, 180.0))
    fog = float(rng.uniform(0.5 * params.fog_coeff, params.fog_coeff))
    factor = float(rng.uniform(1.0 - params.cb_limit, 1.0 + params.cb_limit))
    shift = float(rng.uniform(-params.cb_limit, params.cb_limit))
    return ObscuraDraw(kernel_len, angle_deg, fog, factor, shift)


def realized_severity(params: ObscuraParams, draw: ObscuraDraw) -> float:
    """Severity of one realized draw: blur from the sampled kernel, fog from
    the sampled coefficient, contrast/brightness from the configured limit."""
    return severity_score(params.blur_component(draw.kernel_len),
                          draw.fog_coeff, params.cb_limit,
                          params.alpha, params.beta, params.gamma)


def obscura_transform(img: np.ndarray, params: ObscuraParams,
                      seed: TransformSeed, image_id: str) -> tuple[np.ndarray, float]:
    """Apply blur -> fog -> contrast/brightness with sampled magnitudes.

    Returns the degraded image and the realized severity score. Identical
    (seed, image_id, params) produce bit-identical output.
    """
    ensure_rgb(img)
    draw = draw_obscura(params, seed.rng_for(image_id))
    out = motion_blur(img, draw.kernel_len, draw.angle_deg)
    out = apply_fog(out, draw.fog_coeff)
    out = adjust_contrast_brightness(out, draw.contrast_factor, draw.brightness_shift)
    return out, realized_severity(params, draw)
