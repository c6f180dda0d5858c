import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.metrics import structural_similarity

from cassikit.errors import ParameterError, ShapeError
from cassikit.metrics import psnr, ssim, ssim_map
from cassikit.scenes import synthetic_scene
from cassikit.tensor import HsiCube


def test_psnr_examples():
    ref = HsiCube(np.random.default_rng(0).random((3, 8, 8)))
    assert psnr(ref, ref) == math.inf
    shifted = HsiCube(ref.data + 0.1)
    assert psnr(ref, shifted) == pytest.approx(20.0, abs=1e-9)
    assert psnr(ref, shifted, peak=10.0) == pytest.approx(40.0, abs=1e-9)
    with pytest.raises(ShapeError):
        psnr(ref, HsiCube(np.zeros((3, 8, 7))))
    with pytest.raises(ParameterError):
        psnr(ref, shifted, peak=0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_psnr_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = HsiCube(rng.random((2, 5, 5))), HsiCube(rng.random((2, 5, 5)))
    assert psnr(a, b) == psnr(b, a)


def test_ssim_identities():
    ref = HsiCube(np.random.default_rng(1).random((2, 16, 16)))
    assert ssim(ref, ref) == 1.0
    for c in (0.0, 0.3, 1.0, 7.5):
        const = HsiCube(np.full((2, 12, 12), c))
        assert ssim(const, const) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ParameterError):
        ssim(HsiCube(np.zeros((1, 10, 20))), HsiCube(np.zeros((1, 10, 20))))
    with pytest.raises(ShapeError):
        ssim(ref, HsiCube(np.zeros((2, 16, 15))))


def test_ssim_strong_noise_is_low():
    # a piecewise-smooth reference; white-noise references keep SSIM near 0.4
    ref = synthetic_scene(64, 64, 1, seed=0)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        noisy = HsiCube(ref.data + 0.5 * rng.standard_normal(ref.data.shape))
        assert ssim(ref, noisy) < 0.2


def test_ssim_matches_scikit_image():
    rng = np.random.default_rng(2)
    ref = rng.random((3, 24, 20))
    test = np.clip(ref + 0.1 * rng.standard_normal(ref.shape), 0, 1)
    # scikit-image pads its map; our valid-window map equals its interior
    ours = ssim_map(ref, test)
    pad = 5
    for c in range(3):
        sk_full = structural_similarity(ref[c], test[c], data_range=1.0, gaussian_weights=True, sigma=1.5,
                                        use_sample_covariance=False, win_size=11, full=True)[1]
        np.testing.assert_allclose(ours[c], sk_full[pad:-pad, pad:-pad], rtol=1e-9, atol=1e-12)
    assert ssim(HsiCube(ref), HsiCube(test)) == pytest.approx(float(np.mean(ours.mean(axis=(1, 2)))))
