"""Reconstruction quality metrics."""
from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError, ShapeError
from .tensor import HsiCube

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(ref: HsiCube, test: HsiCube):
    if ref.dims != test.dims:
        raise ShapeError(f"cube dims differ: {ref.dims} vs {test.dims}")


def psnr(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); ``math.inf`` when the cubes are identical."""
    _check_pair(ref, test)
    if not peak > 0:
        raise ParameterError("peak must be positive")
    mse = float(np.mean((ref.data - test.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_taps(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, taps):
    """Separable 'valid' correlation over the last two axes."""
    k = taps.size
    rows = sum(taps[i] * img[..., i:img.shape[-2] - k + 1 + i, :] for i in range(k))
    return sum(taps[i] * rows[..., :, i:img.shape[-1] - k + 1 + i] for i in range(k))


def ssim_map(ref: np.ndarray, test: np.ndarray, peak: float = 1.0) -> np.ndarray:
    """Per-pixel SSIM of two (C, H, W) arrays over the valid window region."""
    if min(ref.shape[-2:]) < SSIM_WINDOW:
        raise ParameterError(f"SSIM needs spatial dims >= {SSIM_WINDOW}, got {ref.shape[-2:]}")
    taps = _gaussian_taps()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_x = _filter_valid(ref, taps)
    mu_y = _filter_valid(test, taps)
    sxx = _filter_valid(ref * ref, taps) - mu_x * mu_x
    syy = _filter_valid(test * test, taps) - mu_y * mu_y
    sxy = _filter_valid(ref * test, taps) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> float:
    """Gaussian-window SSIM (11x11, sigma 1.5), averaged per channel then over channels."""
    _check_pair(ref, test)
    m = ssim_map(ref.data, test.data, peak)
    return float(np.mean(m.reshape(m.shape[0], -1).mean(axis=1)))
