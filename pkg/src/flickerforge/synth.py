"""Flicker synthesis: single frames, shaken bursts, and training triplets."""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .core import ValidationError, as_image, substream, validate_seed
from .waveform import TWO_PI, FlickerSpec, gain_profile

# substream tags so independent draws never share a child stream
_STREAM_PHASES = 1
_STREAM_SHAKE = 2


def apply_flicker(clean, spec: FlickerSpec) -> np.ndarray:
    """Multiply a clean image by the per-row gains of a FlickerSpec.

    Rows stay internally uniform in gain, so banding is exactly horizontal.
    The operation is linear in the input: scaling the clean image scales
    the output by the same factor.
    """
    img = as_image(clean, name="clean")
    gains = gain_profile(spec, img.shape[0]).values
    return img * gains[:, None, :]


def shake_warp(image, rotation_deg: float, translation) -> np.ndarray:
    """Rigid warp: rotate about the image center, then translate.

    Bilinear sampling with mirrored borders (edge pixel not repeated).
    Positive dx moves content right, positive dy moves it down; positive
    angles turn content clockwise on screen (y down): at 90 degrees the
    top-right corner lands at the bottom-right, i.e. np.rot90(img, 3).
    """
    img = as_image(image)
    dx, dy = (float(v) for v in translation)
    if not np.isfinite(rotation_deg) or not np.isfinite(dx) or not np.isfinite(dy):
        raise ValidationError("shake_warp: rotation and translation must be finite")
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ang = np.deg2rad(rotation_deg)
    cos_a, sin_a = np.cos(ang), np.sin(ang)
    # inverse map: output (y, x) -> input (y, x)
    # forward is rotate-then-translate, so invert translation first, then
    # rotate by -angle about the center.
    matrix = np.array([[cos_a, -sin_a],
                       [sin_a, cos_a]])
    shift = np.array([cy - dy, cx - dx]) - matrix @ np.array([cy, cx])
    out = np.empty_like(img)
    for c in range(3):
        out[:, :, c] = ndimage.affine_transform(
            img[:, :, c], matrix, offset=shift, order=1,
            mode="mirror", prefilter=False)
    return out


def resize(image, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resize.  Identical dimensions return an exact copy.

    Resizing preserves cycles per image; cycles per row scale by the
    height ratio (see resize_frequency_scale).
    """
    img = as_image(image)
    if new_h < 8 or new_w < 8:
        raise ValidationError(f"resize: target {new_h}x{new_w} below minimum 8x8")
    if (new_h, new_w) == img.shape[:2]:
        return img.copy()
    return cv2.resize(img, (new_w, new_h), interpolation=cv2.INTER_LINEAR)


def resize_frequency_scale(old_h: int, new_h: int) -> float:
    """Factor by which per-row pattern frequency changes after a resize."""
    return old_h / new_h


@dataclass(frozen=True)
class BurstSpec:
    """Recipe for a burst: one flicker pattern, per-frame phase and shake.

    Every frame shares base.mode / enf_hz / row_hz / ambient_ratio; only
    the phase changes frame to frame.  phases may be given explicitly
    (length must equal frame_count) or left None to be drawn i.i.d.
    uniform over [0, 2*pi) from the seed.  Shake ranges are half-widths of
    symmetric intervals; frame 0 is never shaken and serves as the
    geometric reference.
    """

    base: FlickerSpec
    frame_count: int = 10
    phases: tuple[float, ...] | None = None
    rotation_max_deg: float = 3.0
    translation_max_px: float = 5.0
    seed: int | None = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValidationError(
                f"frame_count must be >= 1, got {self.frame_count}")
        if self.phases is not None:
            phases = tuple(float(p) for p in self.phases)
            if len(phases) != self.frame_count:
                raise ValidationError(
                    f"got {len(phases)} phases for {self.frame_count} frames")
            object.__setattr__(self, "phases", phases)
        if self.rotation_max_deg < 0 or self.translation_max_px < 0:
            raise ValidationError("shake ranges must be >= 0")
        if self.phases is None and self.seed is None:
            raise ValidationError("need either explicit phases or a seed")
        if self.seed is not None:
            object.__setattr__(self, "seed", validate_seed(self.seed))


@dataclass(frozen=True)
class SynthesizedBurst:
    """Burst output plus the ground truth that produced it."""

    frames: list[np.ndarray] = field(repr=False)
    specs: list[FlickerSpec]
    shakes: list[tuple[float, float, float]]  # (rotation_deg, dx, dy)


def synth_burst(clean, burst: BurstSpec, *, shake: bool = True) -> SynthesizedBurst:
    """Render a burst from one clean image.

    Each frame is warped first (camera moves the scene), then banded
    (the rolling shutter samples the light afterward), so bands stay
    aligned with sensor rows no matter the shake.  All sampled parameters
    are returned for bookkeeping.
    """
    img = as_image(clean, name="clean")
    if burst.phases is not None:
        phases = list(burst.phases)
    else:
        rng = substream(burst.seed, _STREAM_PHASES)
        phases = list(rng.uniform(0.0, TWO_PI, burst.frame_count))
    sampling_shake = (shake and burst.frame_count > 1
                      and (burst.rotation_max_deg > 0
                           or burst.translation_max_px > 0))
    if sampling_shake and burst.seed is None:
        raise ValidationError(
            "shake sampling requires a seeded BurstSpec; pass shake=False "
            "or set the shake ranges to 0 to skip it")
    frames, specs, shakes = [], [], []
    for i in range(burst.frame_count):
        spec_i = burst.base.with_phase(phases[i])
        if i == 0 or not sampling_shake:
            rot, dx, dy = 0.0, 0.0, 0.0
            warped = img
        else:
            rng_i = substream(burst.seed, _STREAM_SHAKE, i)
            rot = rng_i.uniform(-burst.rotation_max_deg, burst.rotation_max_deg)
            dx = rng_i.uniform(-burst.translation_max_px, burst.translation_max_px)
            dy = rng_i.uniform(-burst.translation_max_px, burst.translation_max_px)
            warped = shake_warp(img, rot, (dx, dy))
        frames.append(apply_flicker(warped, spec_i))
        specs.append(spec_i)
        shakes.append((rot, dx, dy))
    return SynthesizedBurst(frames=frames, specs=specs, shakes=shakes)


def sample_training_triplet(frames, seed: int) -> tuple[int, int, int]:
    """Pick indices (i, i+s, i+2s) with stride s in {1, 2, 3}.

    The stride is drawn uniformly among strides feasible for the burst
    length, then the start offset uniformly among valid positions for that
    stride.  Bursts shorter than 3 frames cannot host any triplet.
    """
    n = len(frames)
    if n < 3:
        raise ValidationError(
            f"burst too short for a triplet: need at least 3 frames, got {n}")
    rng = np.random.default_rng(validate_seed(seed))
    feasible = [s for s in (1, 2, 3) if n - 2 * s >= 1]
    stride = int(feasible[rng.integers(len(feasible))])
    start = int(rng.integers(n - 2 * stride))
    return (start, start + stride, start + 2 * stride)
