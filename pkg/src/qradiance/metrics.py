"""Image quality metrics on float images with values in [0, 1]."""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .validation import check_array

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _checked_pair(image_a, image_b):
    a = check_array(image_a, "image_a")
    b = check_array(image_b, "image_b")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(image_a, image_b) -> float:
    """10 log10(1 / MSE) on unit dynamic range; +inf for identical images."""
    a, b = _checked_pair(image_a, image_b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _to_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[-1] == 3:
        return image @ np.asarray(LUMA_WEIGHTS)
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got {image.shape}")


def ssim(image_a, image_b, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity over sliding unweighted square windows."""
    a, b = _checked_pair(image_a, image_b)
    ga, gb = _to_gray(a), _to_gray(b)
    if min(ga.shape) < window:
        raise ValueError(f"image {ga.shape} is smaller than the {window}x{window} "
                         "window")
    wa = sliding_window_view(ga, (window, window))
    wb = sliding_window_view(gb, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa ** 2).mean(axis=(-2, -1)) - mu_a ** 2
    var_b = (wb ** 2).mean(axis=(-2, -1)) - mu_b ** 2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    score = ((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)) \
        / ((mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2))
    return float(score.mean())
