"""Deterministic synthetic hyperspectral scenes for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from .tensor import HsiCube

WAVELENGTH_RANGE = (450.0, 650.0)


def band_centers(channels: int) -> np.ndarray:
    lo, hi = WAVELENGTH_RANGE
    return np.linspace(lo, hi, channels)


def _spectrum(rng, wl):
    """Smooth reflectance curve: a Gaussian bump on a sloped baseline, in [0.05, 1]."""
    center = rng.uniform(wl[0], wl[-1])
    width = rng.uniform(30.0, 90.0)
    base = rng.uniform(0.05, 0.35)
    slope = rng.uniform(-0.2, 0.2) * (wl - wl.mean()) / (wl[-1] - wl[0] + 1e-12)
    amp = rng.uniform(0.4, 0.65)
    s = base + slope + amp * np.exp(-0.5 * ((wl - center) / width) ** 2)
    return np.clip(s, 0.05, 1.0)


def synthetic_scene(width=32, height=32, channels=8, seed=0, n_objects=3) -> HsiCube:
    """Piecewise-constant spatial layout of rectangles and disks, each with its own spectrum."""
    rng = np.random.default_rng(seed)
    wl = band_centers(channels)
    cube = np.empty((channels, height, width))
    cube[:] = _spectrum(rng, wl)[:, None, None]
    hh, ww = np.mgrid[0:height, 0:width]
    for i in range(n_objects):
        spec = _spectrum(rng, wl)
        if i % 2 == 0:
            h0, w0 = rng.integers(0, height * 2 // 3), rng.integers(0, width * 2 // 3)
            dh = rng.integers(height // 5, height // 2 + 1)
            dw = rng.integers(width // 5, width // 2 + 1)
            region = (hh >= h0) & (hh < h0 + dh) & (ww >= w0) & (ww < w0 + dw)
        else:
            ch, cw = rng.uniform(0.2, 0.8) * height, rng.uniform(0.2, 0.8) * width
            rad = rng.uniform(0.12, 0.25) * min(height, width)
            region = (hh - ch) ** 2 + (ww - cw) ** 2 <= rad * rad
        cube[:, region] = spec[:, None]
    return HsiCube(cube, wl)
