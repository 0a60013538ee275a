"""Flicker removal for single frames and bursts.

Dividing a frame by its per-row gain profile undoes banding exactly where
the division is trustworthy.  Two things make it untrustworthy: gains near
zero (the scene signal was crushed into the noise floor and cannot be
recovered by scaling), and pixels at or near the sensor's saturation point
(the recorded value is a clip, not a scaled radiance).  Such pixels are
masked out rather than "corrected" into artifacts.

Burst fusion then fills the gaps: each pixel averages the frames in which
it was valid.  With gain weighting the sums telescope --

    out = sum(valid * frame) / sum(valid * gain)

-- which is exact for synthetic flicker and weights brighter (less noisy)
observations more under real noise.  Pixels valid in no frame fall back to
the per-pixel median of the raw burst.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, as_image
from .estimate import (EstimatedFlicker, estimate_frequency, fit_flicker,
                       row_profile)
from .waveform import FlickerSpec, gain_profile


@dataclass(frozen=True)
class FusionConfig:
    """Validity thresholds and weighting for deflicker fusion.

    gain_floor:   rows whose gain falls below this are unrecoverable.
    clip_ceiling: pixels at or above this raw value count as clipped.
    weighting:    "gain" weights each inverted frame by its gain squared
                  (inverse-variance under uniform sensor noise, computed
                  as sum(g*f)/sum(g*g) so exact inputs telescope exactly)
                  or "uniform" (plain mean of the valid inversions).
    """

    gain_floor: float = 0.05
    clip_ceiling: float = 0.995
    weighting: str = "gain"

    def __post_init__(self):
        if not 0.0 < self.gain_floor < 1.0:
            raise ValidationError("gain_floor must lie in (0, 1)")
        if not 0.0 < self.clip_ceiling <= 1.0:
            raise ValidationError("clip_ceiling must lie in (0, 1]")
        if self.weighting not in ("gain", "uniform"):
            raise ValidationError(
                f"weighting must be 'gain' or 'uniform', got {self.weighting!r}")


@dataclass(frozen=True)
class DeflickerResult:
    """Fused output plus bookkeeping from a burst deflicker run."""

    image: np.ndarray = field(repr=False)
    valid_counts: np.ndarray = field(repr=False)
    fallback_fraction: float = 0.0
    estimate: EstimatedFlicker | None = None


def frame_gains(model, rows: int, frame: int = 0) -> np.ndarray:
    """(rows, 3) gain table from either a ground-truth spec or an estimate."""
    if isinstance(model, FlickerSpec):
        return gain_profile(model, rows).values
    if isinstance(model, EstimatedFlicker):
        return model.gain_values(rows, frame)
    raise ValidationError(
        f"expected FlickerSpec or EstimatedFlicker, got {type(model).__name__}")


def deflicker_single(frame, model, config: FusionConfig | None = None,
                     frame_index: int = 0):
    """Divide out one frame's flicker; returns (image, validity mask).

    Invalid pixels (gain below the floor, or raw value at the clip
    ceiling) keep their raw value and are marked False in the (H, W, 3)
    mask; no division happens there.
    """
    cfg = config or FusionConfig()
    img = as_image(frame)
    gains = frame_gains(model, img.shape[0], frame_index)
    gain_ok = gains >= cfg.gain_floor                      # (rows, 3)
    valid = gain_ok[:, None, :] & (img < cfg.clip_ceiling)
    out = img.copy()
    g_full = np.broadcast_to(gains[:, None, :], img.shape)
    np.divide(img, g_full, out=out, where=valid)
    return out, valid


def deflicker_burst(frames, models=None, config: FusionConfig | None = None
                    ) -> DeflickerResult:
    """Remove flicker from a burst and fuse it into one clean image.

    models may be a list of per-frame FlickerSpec ground truths; when
    omitted the flicker is estimated blind from the burst itself
    (estimate_frequency + fit_flicker) and the fitted model is reported on
    the result.  Fusion follows the module strategy: per-pixel validity,
    gain-weighted or uniform averaging; holes are fused again with the
    clip ceiling relaxed, and only pixels no frame can invert at all fall
    back to the median of the raw inputs (counted by fallback_fraction).
    """
    cfg = config or FusionConfig()
    if len(frames) < 1:
        raise ValidationError("need at least one frame")
    images = [as_image(f) for f in frames]
    shape = images[0].shape
    if any(img.shape != shape for img in images):
        raise ValidationError("burst frames disagree on shape")

    estimate = None
    if models is None:
        profiles = [row_profile(img) for img in images]
        nu = estimate_frequency(profiles)
        estimate = fit_flicker(images, nu)
        gain_tables = [estimate.gain_values(shape[0], i)
                       for i in range(len(images))]
    else:
        if len(models) != len(images):
            raise ValidationError(
                f"got {len(models)} models for {len(images)} frames")
        gain_tables = [frame_gains(m, shape[0], i)
                       for i, m in enumerate(models)]

    num = np.zeros(shape)
    den = np.zeros(shape)
    counts = np.zeros(shape, dtype=np.int32)
    for img, gains in zip(images, gain_tables):
        gain_ok = gains >= cfg.gain_floor
        valid = gain_ok[:, None, :] & (img < cfg.clip_ceiling)
        counts += valid
        g_full = np.broadcast_to(gains[:, None, :], shape)
        if cfg.weighting == "gain":
            num += np.where(valid, g_full * img, 0.0)
            den += np.where(valid, g_full * g_full, 0.0)
        else:
            num += np.where(valid, img / g_full, 0.0)
            den += valid
    covered = counts > 0
    out = np.empty(shape)
    np.divide(num, den, out=out, where=covered)
    holes = ~covered
    if holes.any():
        # Rescue pass: where every frame failed strict validity, relax the
        # clip ceiling and fuse whatever frames still clear the gain floor.
        # Inverting a possibly clipped pixel lands closer to the truth than
        # any raw-value fill, which is off by the whole gain factor.
        rescued = np.zeros(shape, dtype=bool)
        for img, gains in zip(images, gain_tables):
            ok = np.broadcast_to((gains >= cfg.gain_floor)[:, None, :],
                                 shape) & holes
            g_full = np.broadcast_to(gains[:, None, :], shape)
            if cfg.weighting == "gain":
                num += np.where(ok, g_full * img, 0.0)
                den += np.where(ok, g_full * g_full, 0.0)
            else:
                num += np.where(ok, img / g_full, 0.0)
                den += ok
            rescued |= ok
        np.divide(num, den, out=out, where=rescued)
        holes &= ~rescued
        if holes.any():
            median = np.median(np.stack(images), axis=0)
            out[holes] = median[holes]
    fallback = float(np.count_nonzero(holes)) / holes.size
    return DeflickerResult(image=out, valid_counts=counts,
                           fallback_fraction=fallback, estimate=estimate)
