import numpy as np
import pytest

from cassikit.benchmarks import (
    AccelerationResult, desk_problem, quadratic_fixed_point, random_instance, stages_to_tolerance,
)
from cassikit.scenes import band_centers, synthetic_scene
from cassikit.sensing import forward


def test_scene_is_deterministic_and_in_range():
    a, b = synthetic_scene(20, 16, 5, seed=4), synthetic_scene(20, 16, 5, seed=4)
    assert a.dims == (20, 16, 5)
    assert np.array_equal(a.data, b.data)
    assert np.all(a.data >= 0.05) and np.all(a.data <= 1.0)
    assert np.array_equal(a.wavelengths, band_centers(5))
    assert not np.array_equal(a.data, synthetic_scene(20, 16, 5, seed=5).data)


def test_scene_is_piecewise_constant():
    cube = synthetic_scene(32, 32, 8, seed=0)
    pixels = {tuple(cube.data[:, h, w]) for h in range(32) for w in range(32)}
    assert 2 <= len(pixels) <= 4


def test_random_instance_is_noiseless():
    for seed in range(5):
        op, y = random_instance(seed)
        W, H, C = op.cube_dims
        assert 3 <= W <= 8 and 3 <= H <= 8 and 2 <= C <= 4
        assert y.values.shape == op.meas_shape


def test_quadratic_fixed_point_and_stage_counts():
    op, y = random_instance(0)
    xs = quadratic_fixed_point(op, y)
    n0 = stages_to_tolerance(op, y, xs, "zero")
    n1 = stages_to_tolerance(op, y, xs, "nesterov")
    assert 1 <= n1 <= n0


def test_acceleration_result_summary():
    r = AccelerationResult(zero=[10, 20, 30, 40], nesterov=[5, 20, 33, 20])
    assert r.win_fraction == 0.75
    assert r.median_reduction == pytest.approx(np.median([0.5, 0.0, -0.1, 0.5]))


def test_desk_problem_shapes():
    truth, op, y = desk_problem()
    assert truth.dims == (32, 32, 8) and op.step == 1
    assert y.values.shape == (39, 32)
    assert np.linalg.norm(y.values - forward(op, truth).values) > 0
