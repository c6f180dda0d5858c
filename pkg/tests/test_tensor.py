import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cassikit.errors import ModeError, NumericError, ParameterError, ShapeError
from cassikit.tensor import (
    HsiCube, ModeKMatrix, fold_mode_k, mode_singular_values, shift_cube,
    shifted_height, unfold_mode_k, unshift_cube,
)
from oracles import unfold_by_loops

dims3 = st.tuples(*(st.integers(1, 6),) * 3)


@st.composite
def cubes(draw):
    W, H, C = draw(dims3)
    whc = draw(arrays(np.float64, (W, H, C), elements=st.floats(-1e6, 1e6)))
    return HsiCube.from_whc(whc)


def test_cube_layout_is_channel_major():
    whc = np.arange(24.0).reshape(2, 3, 4)
    cube = HsiCube.from_whc(whc)
    assert cube.dims == (2, 3, 4)
    assert cube.data.shape == (4, 3, 2)
    assert cube.data[3, 2, 1] == whc[1, 2, 3]
    assert np.array_equal(HsiCube.from_flat(cube.flat(), (2, 3, 4)).data, cube.data)


def test_cube_validation():
    with pytest.raises(ShapeError):
        HsiCube(np.zeros((2, 3)))
    with pytest.raises(NumericError):
        HsiCube(np.full((1, 2, 2), np.nan))
    with pytest.raises(ParameterError):
        HsiCube(np.zeros((2, 1, 1)), wavelengths=[500.0, 500.0])
    with pytest.raises(ShapeError):
        HsiCube.from_flat(np.zeros(5), (2, 2, 2))


def test_unfold_matches_index_law_on_2x3x4():
    whc = np.arange(24.0).reshape(2, 3, 4)
    m = unfold_mode_k(HsiCube.from_whc(whc), 1)
    assert (m.rows, m.cols) == (2, 12)
    for i1 in range(2):
        for i2 in range(3):
            for i3 in range(4):
                assert m.data[i1, i2 + 3 * i3] == whc[i1, i2, i3]
    for k in (1, 2, 3):
        assert np.array_equal(unfold_mode_k(HsiCube.from_whc(whc), k).data, unfold_by_loops(whc, k))


def test_fold_of_loop_table_reproduces_cube():
    whc = np.arange(24.0).reshape(2, 3, 4)
    for k in (1, 2, 3):
        m = ModeKMatrix(k, unfold_by_loops(whc, k), (2, 3, 4))
        assert np.array_equal(fold_mode_k(m, (2, 3, 4), k).whc, whc)


def test_fold_zero_matrix_and_errors():
    z = fold_mode_k(ModeKMatrix(2, np.zeros((3, 8)), (2, 3, 4)), (2, 3, 4), 2)
    assert not z.data.any()
    with pytest.raises(ShapeError):
        fold_mode_k(ModeKMatrix(2, np.zeros((3, 7)), (2, 3, 4)), (2, 3, 4), 2)
    with pytest.raises(ModeError):
        unfold_mode_k(HsiCube.zeros((2, 2, 2)), 4)


@settings(max_examples=60, deadline=None)
@given(cubes())
def test_fold_unfold_round_trip_and_multiset(cube):
    for k in (1, 2, 3):
        m = unfold_mode_k(cube, k)
        assert np.array_equal(fold_mode_k(m, cube.dims, k).data, cube.data)
        assert np.array_equal(np.sort(m.data.ravel()), np.sort(cube.flat()))


def test_rank_one_cube_has_one_singular_value():
    rng = np.random.default_rng(3)
    a, b, c = (v / np.linalg.norm(v) for v in (rng.standard_normal(n) for n in (5, 6, 4)))
    cube = HsiCube.from_whc(7.5 * np.einsum("i,j,k->ijk", a, b, c))
    for k in (1, 2, 3):
        s = mode_singular_values(cube, k)
        assert s[0] == pytest.approx(7.5, rel=1e-12)
        assert np.all(s[1:] <= 1e-10 * 7.5)


def test_singular_values_match_gram_eigenvalues():
    rng = np.random.default_rng(0)
    cube = HsiCube.from_whc(rng.standard_normal((8, 8, 4)))
    for k in (1, 2, 3):
        M = unfold_by_loops(cube.whc, k)
        ev = np.sort(np.linalg.eigvalsh(M @ M.T))[::-1]
        ref = np.sqrt(np.clip(ev, 0, None))
        got = mode_singular_values(cube, k)
        assert np.all(np.diff(got) <= 0)
        np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_singular_values_of_zero_cube():
    assert not mode_singular_values(HsiCube.zeros((3, 4, 2)), 2).any()


def test_transpose_swaps_mode_spectra():
    rng = np.random.default_rng(1)
    whc = rng.standard_normal((4, 6, 3))
    a, b = HsiCube.from_whc(whc), HsiCube.from_whc(whc.transpose(1, 0, 2))
    assert np.array_equal(mode_singular_values(a, 1), mode_singular_values(b, 2))
    assert np.array_equal(mode_singular_values(a, 2), mode_singular_values(b, 1))


def test_shift_placement_1x2x3():
    cube = HsiCube.from_whc(np.arange(1.0, 7.0).reshape(1, 2, 3))
    out = shift_cube(cube, 1)
    assert out.dims == (1, 4, 3)
    expected = np.zeros((3, 4, 1))
    for n in range(3):
        expected[n, n:n + 2, 0] = cube.data[n, :, 0]
    assert np.array_equal(out.data, expected)


def test_shift_identities():
    rng = np.random.default_rng(2)
    cube = HsiCube(rng.random((3, 4, 5)))
    assert np.array_equal(shift_cube(cube, 0).data, cube.data)
    single = HsiCube(rng.random((1, 4, 5)))
    assert np.array_equal(shift_cube(single, 3).data, single.data)
    assert shifted_height(4, 2, 3) == 8
    assert np.array_equal(unshift_cube(shift_cube(cube, 2), 2, 4).data, cube.data)
    with pytest.raises(ShapeError):
        unshift_cube(cube, 1, 4)


@settings(max_examples=40, deadline=None)
@given(dims3, st.integers(0, 3), st.integers(0, 2**31))
def test_shift_unshift_adjoint_pair(dims, step, seed):
    rng = np.random.default_rng(seed)
    W, H, C = dims
    x = HsiCube(rng.standard_normal((C, H, W)))
    y = HsiCube(rng.standard_normal((C, shifted_height(H, step, C), W)))
    lhs = np.vdot(shift_cube(x, step).data, y.data)
    rhs = np.vdot(x.data, unshift_cube(y, step, H).data)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1e-300)
