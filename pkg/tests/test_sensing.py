import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cassikit.errors import CapacityError, ParameterError, ShapeError
from cassikit.sensing import (
    CodedAperture, Measurement, SensingOperator, adjoint, densify, forward,
    phi_phit_diag, simulate_measurement,
)
from cassikit.tensor import HsiCube
from oracles import dense_sensing_matrix


def make_op(seed, W=4, H=4, C=3, step=1, binary=True):
    rng = np.random.default_rng(seed)
    vals = (rng.random((H, W)) < 0.5).astype(float) if binary else rng.random((H, W))
    return SensingOperator(CodedAperture(vals), step, C), rng


def test_identity_sensing():
    op = SensingOperator(CodedAperture(np.ones((3, 5))), 0, 1)
    x = HsiCube(np.random.default_rng(0).random((1, 3, 5)))
    assert np.array_equal(forward(op, x).values, x.data[0])
    y = Measurement(np.random.default_rng(1).random((3, 5)))
    assert np.array_equal(adjoint(op, y).data[0], y.values)


def test_zero_in_zero_out():
    op, _ = make_op(0)
    assert not forward(op, HsiCube.zeros(op.cube_dims)).values.any()
    assert not adjoint(op, Measurement(np.zeros(op.meas_shape))).data.any()


def test_forward_equals_dense_product():
    op, rng = make_op(4)
    x = HsiCube(rng.random((3, 4, 4)))
    A = dense_sensing_matrix(op.mask.values, op.step, op.channels)
    ref = A @ x.flat()
    got = forward(op, x).values.ravel()
    assert np.linalg.norm(got - ref) <= 1e-12 * np.linalg.norm(ref)


def test_densify_matches_independent_assembly():
    for seed in range(5):
        op, _ = make_op(seed, W=5, H=3, C=4, step=seed % 3, binary=False)
        assert np.array_equal(densify(op), dense_sensing_matrix(op.mask.values, op.step, op.channels))


def test_densify_columns_are_basis_responses():
    op, _ = make_op(9, W=3, H=2, C=2, step=1)
    A = densify(op)
    for j in range(A.shape[1]):
        e = np.zeros(A.shape[1])
        e[j] = 1.0
        assert np.array_equal(A[:, j], forward(op, HsiCube.from_flat(e, op.cube_dims)).values.ravel())


def test_densify_transpose_is_adjoint():
    op, rng = make_op(5, W=6, H=5, C=3, step=2, binary=False)
    y = Measurement(rng.standard_normal(op.meas_shape))
    ref = densify(op).T @ y.values.ravel()
    assert np.linalg.norm(adjoint(op, y).flat() - ref) <= 1e-12 * np.linalg.norm(ref)


def test_densify_capacity_guard():
    op = SensingOperator(CodedAperture(np.ones((64, 64))), 1, 8)
    with pytest.raises(CapacityError):
        densify(op)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.integers(1, 8), st.integers(0, 3),
       st.integers(0, 2**31), st.booleans())
def test_adjoint_dot_product(W, H, C, step, seed, binary):
    op, rng = make_op(seed, W, H, C, step, binary)
    x = HsiCube(rng.standard_normal((C, H, W)))
    y = Measurement(rng.standard_normal(op.meas_shape))
    lhs = np.vdot(forward(op, x).values, y.values)
    rhs = np.vdot(x.data, adjoint(op, y).data)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 4), st.integers(0, 3), st.integers(0, 2**31))
def test_linearity(W, H, C, step, seed):
    op, rng = make_op(seed, W, H, C, step, binary=False)
    x1, x2 = (HsiCube(rng.standard_normal((C, H, W))) for _ in range(2))
    a, b = rng.standard_normal(2)
    lhs = forward(op, HsiCube(a * x1.data + b * x2.data)).values
    rhs = a * forward(op, x1).values + b * forward(op, x2).values
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1e-300)


@pytest.mark.parametrize("binary", [True, False])
def test_gram_is_diagonal_with_mask_energy(binary):
    rng = np.random.default_rng(11)
    for _ in range(25):
        W, H, C, step = (int(v) for v in (*rng.integers(1, 7, 2), rng.integers(1, 5), rng.integers(0, 4)))
        op, _ = make_op(int(rng.integers(1 << 30)), W, H, C, step, binary)
        A = densify(op)
        G = A @ A.T
        assert np.count_nonzero(G - np.diag(np.diag(G))) == 0
        np.testing.assert_allclose(np.diag(G), phi_phit_diag(op), rtol=1e-14, atol=0)


def test_gram_diag_counts_binary_coverage():
    op, _ = make_op(7, W=5, H=4, C=3, step=1)
    counts = np.zeros(op.meas_shape)
    for n in range(3):
        counts[n:n + 4] += op.mask.values
    assert np.array_equal(phi_phit_diag(op), counts.ravel())


def test_gram_diag_zero_exactly_where_uncovered():
    op, _ = make_op(8, W=6, H=5, C=4, step=2, binary=False)
    r = phi_phit_diag(op).reshape(op.meas_shape)
    assert np.all(r >= 0)
    covered = np.any(op.shifted_mask != 0, axis=0)
    assert np.array_equal(r == 0, ~covered)


def test_gram_diag_large_step_is_zero_one():
    op = SensingOperator(CodedAperture(np.ones((3, 4))), 4, 3)
    r = phi_phit_diag(op).reshape(op.meas_shape)
    assert set(np.unique(r)) == {0.0, 1.0}
    assert np.all(r[:3] == 1) and np.all(r[3] == 0)


def test_simulate_measurement():
    op, rng = make_op(3, W=64, H=64, C=1, step=0)
    x = HsiCube(rng.random((1, 64, 64)))
    clean = forward(op, x).values
    assert np.array_equal(simulate_measurement(op, x, 0.0, 1).values, clean)
    a = simulate_measurement(op, x, 0.1, 5).values
    assert np.array_equal(a, simulate_measurement(op, x, 0.1, 5).values)
    for seed in range(5):
        std = np.std(simulate_measurement(op, x, 0.1, seed).values - clean)
        assert 0.09 <= std <= 0.11
    with pytest.raises(ParameterError):
        simulate_measurement(op, x, -1.0, 0)


def test_shape_errors():
    op, rng = make_op(0)
    with pytest.raises(ShapeError):
        forward(op, HsiCube(rng.random((2, 4, 4))))
    with pytest.raises(ShapeError):
        adjoint(op, Measurement(np.zeros((3, 4))))
    with pytest.raises(ParameterError):
        CodedAperture(-np.ones((2, 2)))
