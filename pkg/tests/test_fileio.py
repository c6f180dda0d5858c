import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cassikit.blocks import MambaITConfig, init_mmb_weights
from cassikit.errors import FormatError
from cassikit.fileio import (
    atomic_write, csv_text, decode_cube, decode_mask, decode_measurement, encode_cube, encode_mask,
    encode_measurement, fmt_float, history_csv, read_cube, read_weights, sequence_csv,
    singular_values_csv, spectrum_csv, write_cube, write_weights,
)
from cassikit.scenes import synthetic_scene
from cassikit.sensing import CodedAperture, Measurement
from cassikit.ssm import ScanDirection, sequence_from_direction
from cassikit.tensor import HsiCube
from cassikit.weights import decode_weights, encode_weights


def _f32_exact(arr):
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 5)), st.integers(0, 2**31), st.booleans())
def test_cube_round_trip_is_byte_identical(dims, seed, with_wl):
    W, H, C = dims
    rng = np.random.default_rng(seed)
    wl = np.cumsum(rng.uniform(1, 5, C)) + 400 if with_wl else None
    cube = HsiCube(rng.standard_normal((C, H, W)), wl)
    b = encode_cube(cube)
    assert len(b) == 17 + 4 * C * with_wl + 4 * W * H * C
    back = decode_cube(b)
    assert encode_cube(back) == b
    assert np.array_equal(back.data, _f32_exact(cube.data))


def test_cube_header_layout():
    cube = HsiCube(np.arange(6.0).reshape(1, 2, 3), np.array([500.0]))
    b = encode_cube(cube)
    assert b[:4] == b"HSI1"
    assert struct.unpack("<IIIB", b[4:17]) == (3, 2, 1, 1)
    assert struct.unpack("<f", b[17:21]) == (500.0,)
    assert np.array_equal(np.frombuffer(b[21:], "<f4"), np.arange(6.0))


def test_plane_round_trips():
    rng = np.random.default_rng(0)
    mask = CodedAperture.random_binary(7, 5, seed=3)
    b = encode_mask(mask)
    assert b[:4] == b"MSK1" and encode_mask(decode_mask(b)) == b
    y = Measurement(rng.standard_normal((9, 7)))
    b = encode_measurement(y)
    assert b[:4] == b"MEA1" and struct.unpack("<II", b[4:12]) == (7, 9)
    assert encode_measurement(decode_measurement(b)) == b


def test_weights_round_trip(tmp_path):
    w = init_mmb_weights(MambaITConfig(channels=2, features=2, levels=1), 4, 4, seed=1)
    b = encode_weights(w)
    assert encode_weights(decode_weights(b)) == b
    write_weights(tmp_path / "w.bin", w)
    assert encode_weights(read_weights(tmp_path / "w.bin")) == b


def _offset(fn, buf):
    with pytest.raises(FormatError) as info:
        fn(buf)
    return info.value.offset


def test_malformed_files_name_byte_offset():
    good = encode_cube(HsiCube(np.ones((2, 2, 2)), np.array([400.0, 500.0])))
    assert _offset(decode_cube, b"HSX1" + good[4:]) == 0
    assert _offset(decode_cube, good[:10]) == 8
    assert _offset(decode_cube, good[:-3]) == 25
    assert _offset(decode_cube, good + b"\0") == len(good)
    assert _offset(decode_cube, good[:16] + b"\x02" + good[17:]) == 16
    bad_wl = good[:17] + struct.pack("<ff", 500.0, 400.0) + good[25:]
    assert _offset(decode_cube, bad_wl) == 17
    nan = good[:29] + struct.pack("<f", float("nan")) + good[33:]
    assert _offset(decode_cube, nan) == 29
    mask = bytearray(encode_mask(CodedAperture(np.ones((2, 3)))))
    mask[12 + 4 * 4:12 + 4 * 5] = struct.pack("<f", -1.0)
    assert _offset(decode_mask, bytes(mask)) == 28
    with pytest.raises(FormatError, match="byte offset 0"):
        decode_measurement(b"")


def test_atomic_write_and_file_helpers(tmp_path):
    p = tmp_path / "c.hsi"
    cube = synthetic_scene(5, 4, 3, seed=1)
    write_cube(p, cube)
    assert encode_cube(read_cube(p)) == p.read_bytes()
    atomic_write(tmp_path / "t.txt", "a\n")
    assert (tmp_path / "t.txt").read_text() == "a\n"
    assert sorted(x.name for x in tmp_path.iterdir()) == ["c.hsi", "t.txt"]


def test_csv_schemas():
    assert fmt_float(0.1) == "0.1" and fmt_float(float("-inf")) == "-inf"
    assert csv_text(["a", "b"], [(1, 0.5)]) == "a,b\n1,0.5\n"
    assert history_csv([(1, 2.0, 0.25)]) == "stage,fidelity,rel_change\n1,2.0,0.25\n"
    text = singular_values_csv({1: np.array([10.0, 0.0])})
    assert text == "mode,index,sigma,log10_sigma\n1,0,10.0,1.0\n1,1,0.0,-inf\n"
    cube = HsiCube(np.arange(8.0).reshape(2, 2, 2), np.array([450.0, 650.0]))
    assert spectrum_csv(cube, 1, 0) == "band,wavelength,value\n0,450.0,1.0\n1,650.0,5.0\n"
    seq = sequence_from_direction(cube, ScanDirection(3, 0))
    lines = sequence_csv(seq).splitlines()
    assert lines[0] == "t,f0,f1" and len(lines) == 5
