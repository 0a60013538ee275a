"""PNG input/output with atomic writes.

Reads promote grayscale to 3 channels and drop alpha; writes quantize to
8- or 16-bit and go through a temp file + rename so a crashed process
never leaves a half-written image behind.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import cv2
import numpy as np

from .core import (FlickerForgeError, ValidationError, linear_encode,
                   srgb_decode, srgb_encode)


class ImageIOError(FlickerForgeError, OSError):
    """Unreadable, missing, or unwritable image file."""


def read_png(path, gamma: str = "srgb") -> np.ndarray:
    """Read a PNG (or any cv2-readable image) as linear float64 (H, W, 3).

    gamma="srgb" decodes the transfer function; gamma="linear" only
    normalizes integer codes to [0, 1].
    """
    _check_gamma(gamma)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read image: {path}")
    if raw.ndim == 2:
        raw = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.shape[2] == 4:
        raw = raw[:, :, :3]
    elif raw.shape[2] != 3:
        raise ImageIOError(f"unsupported channel count {raw.shape[2]}: {path}")
    rgb = raw[:, :, ::-1]  # cv2 loads BGR
    if rgb.dtype == np.uint8:
        encoded = rgb.astype(np.float64) / 255.0
    elif rgb.dtype == np.uint16:
        encoded = rgb.astype(np.float64) / 65535.0
    else:
        raise ImageIOError(f"unsupported dtype {rgb.dtype}: {path}")
    if gamma == "srgb":
        return srgb_decode(encoded)
    return encoded


def png_bit_depth(path) -> int:
    """Bit depth (8 or 16) of an image file.

    PNG headers are sniffed directly (IHDR bit-depth byte); anything else
    cv2 can read falls back to a full decode.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(25)
    except OSError as exc:
        raise ImageIOError(f"cannot read image: {path}") from exc
    if head[:8] == b"\x89PNG\r\n\x1a\n" and len(head) == 25:
        return 16 if head[24] == 16 else 8
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read image: {path}")
    return 16 if raw.dtype == np.uint16 else 8


def write_png(path, image, bits: int = 8, gamma: str = "srgb") -> float:
    """Encode and write a linear image; returns the clipped-pixel fraction.

    The file appears atomically: data is written to a temp file in the
    destination directory and renamed into place.
    """
    _check_gamma(gamma)
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"write_png: expected (H, W, 3), got {arr.shape}")
    encode = srgb_encode if gamma == "srgb" else linear_encode
    quantized, clip_fraction = encode(arr, bits=bits)
    bgr = np.ascontiguousarray(quantized[:, :, ::-1])

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(suffix=".png", dir=path.parent)
    os.close(fd)
    try:
        if not cv2.imwrite(tmp_name, bgr):
            raise ImageIOError(f"cannot write image: {path}")
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return clip_fraction


def write_matte_png(path, matte, bits: int = 8) -> None:
    """Write a single-channel [0, 1] matte as a grayscale PNG, atomically."""
    arr = np.asarray(matte, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"write_matte_png: expected (H, W), got {arr.shape}")
    scale = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    quantized = np.round(np.clip(arr, 0.0, 1.0) * scale).astype(dtype)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(suffix=".png", dir=path.parent)
    os.close(fd)
    try:
        if not cv2.imwrite(tmp_name, quantized):
            raise ImageIOError(f"cannot write image: {path}")
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_matte_png(path) -> np.ndarray:
    """Read a matte PNG as float64 (H, W) in [0, 1] (RGB inputs averaged)."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read matte: {path}")
    if raw.ndim == 3:
        raw = raw[:, :, :3].mean(axis=2)
    if raw.dtype == np.uint8:
        return raw.astype(np.float64) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float64) / 65535.0
    raise ImageIOError(f"unsupported matte dtype {raw.dtype}: {path}")


def _check_gamma(gamma: str) -> None:
    if gamma not in ("srgb", "linear"):
        raise ValidationError(f"gamma must be 'srgb' or 'linear', got {gamma!r}")
