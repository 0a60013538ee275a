"""Image quality metrics: PSNR and single-scale SSIM.

Both metrics clamp their inputs to the displayable range [0, peak] first,
because out-of-range values in linear light carry no perceptual meaning.

The SSIM here is the classic single-scale form: an 11x11 Gaussian window
(sigma 1.5), stability constants K1=0.01 and K2=0.03, evaluated on the
BT.601 luma of the clamped images (or per channel), with the window kept
fully inside the image (no padding).  Numerator and denominator are
assembled from the same intermediate arrays, so comparing an image with
itself yields exactly 1.0 and swapping the arguments is bit-neutral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import ValidationError, as_image

#: BT.601 luma weights for RGB
_LUMA = np.array([0.299, 0.587, 0.114])

_WINDOW_RADIUS = 5
_WINDOW_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _gaussian_kernel() -> np.ndarray:
    x = np.arange(-_WINDOW_RADIUS, _WINDOW_RADIUS + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * _WINDOW_SIGMA ** 2))
    return k / k.sum()


_KERNEL1D = _gaussian_kernel()


def psnr(image, reference, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give math.inf."""
    a = np.clip(as_image(image), 0.0, peak)
    b = np.clip(as_image(reference), 0.0, peak)
    if a.shape != b.shape:
        raise ValidationError(
            f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _window_mean(plane: np.ndarray) -> np.ndarray:
    """Gaussian-window local means, valid region only (no padding)."""
    smoothed = correlate1d(plane, _KERNEL1D, axis=0, mode="constant")
    smoothed = correlate1d(smoothed, _KERNEL1D, axis=1, mode="constant")
    r = _WINDOW_RADIUS
    return smoothed[r:-r, r:-r]


def _ssim_plane(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    c1 = (_K1 * peak) ** 2
    c2 = (_K2 * peak) ** 2
    mu_x = _window_mean(x)
    mu_y = _window_mean(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = _window_mean(x * x) - mu_xx
    var_y = _window_mean(y * y) - mu_yy
    cov = _window_mean(x * y) - mu_xy
    num = (2.0 * mu_xy + c1) * (2.0 * cov + c2)
    den = (mu_xx + mu_yy + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(image, reference, peak: float = 1.0,
         channel_average: bool = False) -> float:
    """Structural similarity of two images; 1.0 means identical.

    By default the comparison runs on BT.601 luma; with channel_average
    it runs per channel and the three scores are averaged.  Images must
    be at least 11x11 so one full window fits.
    """
    a = np.clip(as_image(image), 0.0, peak)
    b = np.clip(as_image(reference), 0.0, peak)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    size = 2 * _WINDOW_RADIUS + 1
    if a.shape[0] < size or a.shape[1] < size:
        raise ValidationError(
            f"images must be at least {size}x{size} for SSIM, "
            f"got {a.shape[0]}x{a.shape[1]}")
    if channel_average:
        scores = [_ssim_plane(a[:, :, c], b[:, :, c], peak) for c in range(3)]
        return float(np.mean(scores))
    return _ssim_plane(a @ _LUMA, b @ _LUMA, peak)


@dataclass(frozen=True)
class MetricReport:
    """PSNR/SSIM for one prediction against its reference."""

    psnr: float
    ssim: float

    def to_dict(self) -> dict:
        return {"psnr": self.psnr, "ssim": self.ssim}


def evaluate_pair(prediction, reference, peak: float = 1.0) -> MetricReport:
    """Score one restored image against ground truth."""
    return MetricReport(psnr=psnr(prediction, reference, peak),
                        ssim=ssim(prediction, reference, peak))


def summarize(reports: list[MetricReport]) -> dict:
    """Mean metrics over a set of reports (PSNR means ignore infinities
    unless every entry is infinite)."""
    if not reports:
        raise ValidationError("no reports to summarize")
    psnrs = [r.psnr for r in reports]
    finite = [p for p in psnrs if math.isfinite(p)]
    mean_psnr = float(np.mean(finite)) if finite else math.inf
    return {"count": len(reports),
            "mean_psnr": mean_psnr,
            "mean_ssim": float(np.mean([r.ssim for r in reports]))}
