"""PSNR/SSIM contracts against closed forms and a scalar reference."""

import math

import numpy as np
import pytest

from flickerforge import (MetricReport, ValidationError, evaluate_pair, psnr,
                          ssim, summarize)

# ---------------------------------------------------------------- oracle
# Scalar single-window SSIM, written against the classic description:
# 11x11 Gaussian weights (sigma 1.5), C1 = (0.01 L)^2, C2 = (0.03 L)^2.
# An 11x11 image holds exactly one window, so this is the whole score.


def scalar_ssim_window(x, y, peak=1.0):
    r = 5
    weights = [[math.exp(-(i * i + j * j) / (2 * 1.5 ** 2))
                for j in range(-r, r + 1)] for i in range(-r, r + 1)]
    wsum = sum(sum(row) for row in weights)
    weights = [[w / wsum for w in row] for row in weights]

    def wmean(img):
        return sum(weights[i][j] * img[i][j]
                   for i in range(11) for j in range(11))

    mx, my = wmean(x), wmean(y)
    vx = wmean([[xv * xv for xv in row] for row in x]) - mx * mx
    vy = wmean([[yv * yv for yv in row] for row in y]) - my * my
    cxy = wmean([[x[i][j] * y[i][j] for j in range(11)]
                 for i in range(11)]) - mx * my
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    return (((2 * mx * my + c1) * (2 * cxy + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2)))


def bt601(img):
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def test_ssim_matches_scalar_reference_on_one_tile():
    rng = np.random.default_rng(77)
    a = rng.uniform(0.0, 1.0, (11, 11, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0.0, 1.0)
    want = scalar_ssim_window(bt601(a).tolist(), bt601(b).tolist())
    assert abs(ssim(a, b) - want) <= 1e-9


# ------------------------------------------------------------------ psnr

def test_psnr_uniform_offset_closed_form():
    a = np.full((16, 16, 3), 0.2)
    b = np.full((16, 16, 3), 0.3)
    # mse = 0.01 -> 10*log10(1/0.01) = 20 dB
    assert abs(psnr(a, b) - 20.0) <= 1e-9


def test_psnr_mse_1e_3_closed_form():
    a = np.full((16, 16, 3), 0.4)
    b = a + math.sqrt(1e-3)
    assert abs(psnr(a, b) - 30.0) <= 1e-9


def test_psnr_identical_is_infinite():
    a = np.full((16, 16, 3), 0.5)
    assert math.isinf(psnr(a, a))


def test_psnr_clamps_to_peak():
    a = np.zeros((16, 16, 3))
    b = np.full((16, 16, 3), 3.0)   # clamped to 1.0 -> mse 1 -> 0 dB
    assert abs(psnr(a, b) - 0.0) <= 1e-12


def test_psnr_monotone_in_noise(textured):
    img = textured(1, 32, 32)
    rng = np.random.default_rng(2)
    noise = rng.normal(0, 1, img.shape)
    p1 = psnr(img + 0.01 * noise, img)
    p2 = psnr(img + 0.05 * noise, img)
    assert p1 > p2


def test_psnr_shape_mismatch():
    with pytest.raises(ValidationError):
        psnr(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))


# ------------------------------------------------------------------ ssim

def test_ssim_self_is_exactly_one(textured):
    img = textured(4, 24, 24)
    assert ssim(img, img) == 1.0
    assert ssim(img, img, channel_average=True) == 1.0


def test_ssim_symmetry(textured):
    a = textured(5, 24, 24)
    rng = np.random.default_rng(3)
    b = np.clip(a + rng.normal(0, 0.08, a.shape), 0, 1)
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12


def test_ssim_contrast_inversion_scores_low(textured):
    a = textured(6, 32, 32)
    assert ssim(a, 1.0 - a) < 0.5


def test_ssim_degrades_with_noise(textured):
    a = textured(7, 32, 32)
    rng = np.random.default_rng(4)
    noise = rng.normal(0, 1, a.shape)
    assert ssim(np.clip(a + 0.02 * noise, 0, 1), a) \
        > ssim(np.clip(a + 0.2 * noise, 0, 1), a)


def test_ssim_rejects_images_smaller_than_window():
    with pytest.raises(ValidationError):
        ssim(np.zeros((10, 12, 3)), np.zeros((10, 12, 3)))


# ------------------------------------------------------------- reporting

def test_evaluate_pair_and_summarize(textured):
    a = textured(8, 24, 24)
    rng = np.random.default_rng(5)
    b = np.clip(a + rng.normal(0, 0.02, a.shape), 0, 1)
    r = evaluate_pair(b, a)
    assert 20.0 < r.psnr < 60.0 and 0.5 < r.ssim < 1.0
    agg = summarize([r, MetricReport(psnr=math.inf, ssim=1.0)])
    assert agg["count"] == 2
    assert agg["mean_psnr"] == pytest.approx(r.psnr)  # inf left out
    assert agg["mean_ssim"] == pytest.approx((r.ssim + 1.0) / 2)
    assert summarize([MetricReport(math.inf, 1.0)])["mean_psnr"] == math.inf
    with pytest.raises(ValidationError):
        summarize([])
