"""Shared image conventions, sRGB transfer, and seeded RNG streams.

Images move through the pipeline as float64 numpy arrays of shape
(height, width, 3), RGB channel order, linear-light values.  Values are
allowed to leave [0, 1] during processing (flicker gains can push a bright
scene past 1); clamping happens once, at encode time, and the clipped
share is reported instead of being silently discarded.
"""

from __future__ import annotations

import numpy as np

MIN_IMAGE_SIDE = 8

# sRGB piecewise transfer constants
_SRGB_DECODE_KNEE = 0.04045
_SRGB_ENCODE_KNEE = 0.0031308
_SRGB_LINEAR_SLOPE = 12.92
_SRGB_GAMMA = 2.4
_SRGB_OFFSET = 0.055


class FlickerForgeError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(FlickerForgeError, ValueError):
    """Bad domain value: malformed image, out-of-range parameter, ..."""


class EstimationError(FlickerForgeError):
    """Flicker estimation cannot proceed (degenerate or missing signal)."""


def as_image(arr, *, name: str = "image") -> np.ndarray:
    """Validate and return an image as a float64 (H, W, 3) array.

    Raises ValidationError when the shape is not 3-channel, either side is
    below MIN_IMAGE_SIDE, or any value is non-finite.
    """
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 3 or out.shape[2] != 3:
        raise ValidationError(
            f"{name}: expected shape (H, W, 3), got {out.shape}")
    h, w = out.shape[:2]
    if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
        raise ValidationError(
            f"{name}: minimum size is {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, "
            f"got {h}x{w}")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name}: contains non-finite values")
    return out


def as_matte(arr, *, name: str = "matte") -> np.ndarray:
    """Validate a single-channel alpha matte in [0, 1], shape (H, W)."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim == 3 and out.shape[2] == 1:
        out = out[:, :, 0]
    if out.ndim != 2:
        raise ValidationError(f"{name}: expected shape (H, W), got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name}: contains non-finite values")
    if out.min() < 0.0 or out.max() > 1.0:
        raise ValidationError(f"{name}: values must lie in [0, 1]")
    return out


def srgb_decode(encoded) -> np.ndarray:
    """Map sRGB-encoded values to linear light.

    Accepts uint8/uint16 arrays (normalized by their max code value) or
    float arrays already in [0, 1].  Shape is preserved; 3-channel images
    stay 3-channel.  The piecewise transfer uses the standard 0.04045 knee.
    """
    arr = np.asarray(encoded)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValidationError(
                "srgb_decode: float input must be normalized to [0, 1]")
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise ValidationError(
            f"srgb_decode: expected 3 channels, got {arr.shape[2]}")
    low = arr / _SRGB_LINEAR_SLOPE
    high = ((arr + _SRGB_OFFSET) / (1.0 + _SRGB_OFFSET)) ** _SRGB_GAMMA
    return np.where(arr <= _SRGB_DECODE_KNEE, low, high)


def srgb_encode(linear, bits: int = 8) -> tuple[np.ndarray, float]:
    """Encode linear light to an sRGB integer image.

    Values are clamped to [0, 1] first; the returned clip fraction is the
    share of pixels that had at least one channel outside [0, 1] before
    clamping.  Returns (uint8 or uint16 array, clip_fraction).
    """
    if bits not in (8, 16):
        raise ValidationError(f"srgb_encode: bits must be 8 or 16, got {bits}")
    arr = np.asarray(linear, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise ValidationError(
            f"srgb_encode: expected 3 channels, got {arr.shape[2]}")
    clip_fraction = _clip_fraction(arr)
    clamped = np.clip(arr, 0.0, 1.0)
    low = clamped * _SRGB_LINEAR_SLOPE
    high = (1.0 + _SRGB_OFFSET) * clamped ** (1.0 / _SRGB_GAMMA) - _SRGB_OFFSET
    encoded = np.where(clamped <= _SRGB_ENCODE_KNEE, low, high)
    scale = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    return np.round(encoded * scale).astype(dtype), clip_fraction


def linear_encode(linear, bits: int = 8) -> tuple[np.ndarray, float]:
    """Quantize linear values directly (no transfer), same contract as srgb_encode."""
    if bits not in (8, 16):
        raise ValidationError(f"linear_encode: bits must be 8 or 16, got {bits}")
    arr = np.asarray(linear, dtype=np.float64)
    clip_fraction = _clip_fraction(arr)
    clamped = np.clip(arr, 0.0, 1.0)
    scale = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    return np.round(clamped * scale).astype(dtype), clip_fraction


def _clip_fraction(arr: np.ndarray) -> float:
    outside = (arr < 0.0) | (arr > 1.0)
    if arr.ndim == 3:
        outside = outside.any(axis=2)
    return float(np.mean(outside)) if outside.size else 0.0


def validate_seed(seed) -> int:
    """Check that a seed is an integer in [0, 2**64); return it as int."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValidationError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child RNG for (seed, path...).

    Same (seed, path) always yields the same stream; sibling paths are
    statistically independent.  Used so that e.g. frame 3's shake draw does
    not depend on how many draws frame 2 consumed.
    """
    return np.random.default_rng([validate_seed(seed), *path])
