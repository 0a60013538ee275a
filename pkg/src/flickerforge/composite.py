"""Alpha compositing of matted foreground clips over burst backgrounds.

Builds the dynamic-scene training pairs: the same moving foreground pasted
over a banded burst and over repeated clean backgrounds, so the pair
differs only by the row gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, as_image, as_matte
from .synth import resize
from .waveform import FlickerSpec, gain_profile


@dataclass(frozen=True)
class Placement:
    """Where a foreground lands on the background: scale then offset.

    scale multiplies the clip's native size (bilinear, same kernel as
    resize); offset is the destination of the clip's top-left corner in
    background pixels, rounded to the nearest integer at paste time.
    """

    scale: float = 1.0
    offset: tuple[float, float] = (0.0, 0.0)  # (x, y)

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValidationError(f"placement scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class ForegroundClip:
    """A matted foreground sequence: N frames with N alpha mattes."""

    frames: list[np.ndarray] = field(repr=False)
    alphas: list[np.ndarray] = field(repr=False)
    placement: Placement = Placement()

    def __post_init__(self):
        if len(self.frames) != len(self.alphas):
            raise ValidationError(
                f"clip has {len(self.frames)} frames but {len(self.alphas)} mattes")
        if not self.frames:
            raise ValidationError("clip must contain at least one frame")
        for i, (f, a) in enumerate(zip(self.frames, self.alphas)):
            img = as_image(f, name=f"clip frame {i}")
            matte = as_matte(a, name=f"clip matte {i}")
            if img.shape[:2] != matte.shape:
                raise ValidationError(
                    f"clip frame {i} is {img.shape[:2]} but its matte is "
                    f"{matte.shape}")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class DynamicPair:
    """Paired flicker/clean sequences with identical foreground content."""

    flicker_frames: list[np.ndarray] = field(repr=False)
    clean_frames: list[np.ndarray] = field(repr=False)
    specs: list[FlickerSpec] | None = None


def alpha_over(foreground, alpha, background) -> np.ndarray:
    """Standard over-operator in linear light: a*F + (1-a)*B.

    All three inputs must share height and width.  alpha == 0 returns the
    background bit-exactly, alpha == 1 the foreground.
    """
    fg = as_image(foreground, name="foreground")
    bg = as_image(background, name="background")
    a = as_matte(alpha)
    if fg.shape != bg.shape or a.shape != fg.shape[:2]:
        raise ValidationError(
            f"alpha_over: shape mismatch fg {fg.shape} bg {bg.shape} "
            f"alpha {a.shape}")
    a3 = a[:, :, None]
    return a3 * fg + (1.0 - a3) * bg


def place_clip_frame(frame, alpha, placement: Placement, bg_shape):
    """Scale a clip frame + matte and paste-position it on a bg-sized canvas.

    Returns (fg_canvas, alpha_canvas); regions outside the background are
    cropped away, off-canvas placements produce an all-zero matte.
    """
    img = as_image(frame, name="clip frame")
    matte = as_matte(alpha)
    bh, bw = bg_shape[:2]
    if placement.scale != 1.0:
        nh = max(8, int(round(img.shape[0] * placement.scale)))
        nw = max(8, int(round(img.shape[1] * placement.scale)))
        img = resize(img, nh, nw)
        matte3 = resize(np.repeat(matte[:, :, None], 3, axis=2), nh, nw)
        matte = np.clip(matte3[:, :, 0], 0.0, 1.0)
    ox = int(round(placement.offset[0]))
    oy = int(round(placement.offset[1]))
    canvas = np.zeros((bh, bw, 3), dtype=np.float64)
    acanvas = np.zeros((bh, bw), dtype=np.float64)
    src_y0, src_x0 = max(0, -oy), max(0, -ox)
    dst_y0, dst_x0 = max(0, oy), max(0, ox)
    h = min(img.shape[0] - src_y0, bh - dst_y0)
    w = min(img.shape[1] - src_x0, bw - dst_x0)
    if h > 0 and w > 0:
        canvas[dst_y0:dst_y0 + h, dst_x0:dst_x0 + w] = \
            img[src_y0:src_y0 + h, src_x0:src_x0 + w]
        acanvas[dst_y0:dst_y0 + h, dst_x0:dst_x0 + w] = \
            matte[src_y0:src_y0 + h, src_x0:src_x0 + w]
    return canvas, acanvas


def composite_dynamic_pair(flicker_bg, clean_bg, clip: ForegroundClip,
                           specs: list[FlickerSpec] | None = None,
                           flicker_on_fg: bool = False) -> DynamicPair:
    """Composite a clip over a banded burst and over the clean background.

    flicker_bg: list of N banded frames; clean_bg: the single clean
    background, replicated for the clean sequence.  The clip must have N
    frames.  With flicker_on_fg the foreground is banded too, using the
    same per-frame specs (required in that case); gains are indexed by
    output row, since banding lives on the sensor, not on objects.
    """
    bg0 = as_image(clean_bg, name="clean background")
    n = len(flicker_bg)
    if n == 0:
        raise ValidationError("need at least one flicker background frame")
    if len(clip) != n:
        raise ValidationError(
            f"clip has {len(clip)} frames but burst has {n}")
    if flicker_on_fg and (specs is None or len(specs) != n):
        raise ValidationError(
            "flicker_on_fg requires one FlickerSpec per frame")
    flicker_frames, clean_frames = [], []
    for i in range(n):
        bg_i = as_image(flicker_bg[i], name=f"flicker background {i}")
        if bg_i.shape != bg0.shape:
            raise ValidationError(
                f"background {i} is {bg_i.shape[:2]}, expected {bg0.shape[:2]}")
        fg, a = place_clip_frame(clip.frames[i], clip.alphas[i],
                                 clip.placement, bg0.shape)
        fg_banded = fg
        if flicker_on_fg:
            gains = gain_profile(specs[i], bg0.shape[0]).values
            fg_banded = fg * gains[:, None, :]
        flicker_frames.append(alpha_over(fg_banded, a, bg_i))
        clean_frames.append(alpha_over(fg, a, bg0))
    return DynamicPair(flicker_frames=flicker_frames,
                       clean_frames=clean_frames, specs=specs)
