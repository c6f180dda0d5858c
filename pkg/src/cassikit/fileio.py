"""Binary cube/mask/measurement files and CSV exports.

All binary formats are little-endian with float32 payloads:

=========  ==========================================================
``HSI1``   u32 W, H, C | u8 flags (bit 0: wavelengths) | [C f32] | W*H*C f32
``MSK1``   u32 W, H | W*H f32
``MEA1``   u32 W, H~ | W*H~ f32
=========  ==========================================================

Payloads are channel-major, then row (h), then column (w).
"""
from __future__ import annotations

import csv
import io
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .sensing import CodedAperture, Measurement
from .tensor import HsiCube
from .weights import decode_weights, encode_weights

CUBE_MAGIC = b"HSI1"
MASK_MAGIC = b"MSK1"
MEAS_MAGIC = b"MEA1"


def atomic_write(path, data):
    """Write bytes or text via a temp file in the same directory, then rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes, what: str):
        self.buf, self.pos, self.what = buf, 0, what

    def take(self, n, field):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.what}: truncated while reading {field}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, field):
        return struct.unpack("<I", self.take(4, field))[0]

    def floats(self, count, field):
        start = self.pos
        arr = np.frombuffer(self.take(4 * count, field), dtype="<f4").astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise FormatError(f"{self.what}: non-finite value in {field}", start + 4 * int(bad[0]))
        return arr

    def magic(self, expected):
        if self.take(4, "magic") != expected:
            raise FormatError(f"{self.what}: bad magic, expected {expected.decode()}", 0)

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what}: {len(self.buf) - self.pos} trailing bytes", self.pos)


def _f32(arr) -> bytes:
    return np.asarray(arr, dtype="<f4").tobytes()


def encode_cube(cube: HsiCube) -> bytes:
    W, H, C = cube.dims
    has_wl = cube.wavelengths is not None
    parts = [CUBE_MAGIC, struct.pack("<IIIB", W, H, C, 1 if has_wl else 0)]
    if has_wl:
        parts.append(_f32(cube.wavelengths))
    parts.append(_f32(cube.data.ravel()))
    return b"".join(parts)


def decode_cube(buf: bytes) -> HsiCube:
    r = _Reader(buf, "cube file")
    r.magic(CUBE_MAGIC)
    W, H, C = r.u32("W"), r.u32("H"), r.u32("C")
    if min(W, H, C) < 1:
        raise FormatError("cube file: zero dimension", 4)
    flags = r.take(1, "flags")[0]
    if flags & ~1:
        raise FormatError(f"cube file: unknown flag bits {flags:#04x}", 16)
    wl = None
    if flags & 1:
        wl_at = r.pos
        wl = r.floats(C, "wavelengths")
        if C > 1 and not np.all(np.diff(wl) > 0):
            raise FormatError("cube file: wavelengths not strictly ascending", wl_at)
    data = r.floats(W * H * C, "payload")
    r.finish()
    return HsiCube(data.reshape(C, H, W), wl)


def _encode_plane(magic, values):
    H, W = values.shape
    return magic + struct.pack("<II", W, H) + _f32(values.ravel())


def _decode_plane(buf, magic, what):
    r = _Reader(buf, what)
    r.magic(magic)
    W, H = r.u32("W"), r.u32("H")
    if min(W, H) < 1:
        raise FormatError(f"{what}: zero dimension", 4)
    vals = r.floats(W * H, "payload").reshape(H, W)
    r.finish()
    return vals


def encode_mask(mask: CodedAperture) -> bytes:
    return _encode_plane(MASK_MAGIC, mask.values)


def decode_mask(buf: bytes) -> CodedAperture:
    vals = _decode_plane(buf, MASK_MAGIC, "mask file")
    neg = np.flatnonzero(vals.ravel() < 0)
    if neg.size:
        raise FormatError("mask file: negative mask value", 12 + 4 * int(neg[0]))
    return CodedAperture(vals)


def encode_measurement(y: Measurement) -> bytes:
    return _encode_plane(MEAS_MAGIC, y.values)


def decode_measurement(buf: bytes) -> Measurement:
    return Measurement(_decode_plane(buf, MEAS_MAGIC, "measurement file"))


def _reader(decode):
    def read(path):
        return decode(Path(path).read_bytes())
    read.__doc__ = f"Read a file with :func:`{decode.__name__}`."
    return read


def _writer(encode):
    def write(path, obj):
        atomic_write(path, encode(obj))
    write.__doc__ = f"Atomically write a file with :func:`{encode.__name__}`."
    return write


read_cube, write_cube = _reader(decode_cube), _writer(encode_cube)
read_mask, write_mask = _reader(decode_mask), _writer(encode_mask)
read_measurement, write_measurement = _reader(decode_measurement), _writer(encode_measurement)
read_weights, write_weights = _reader(decode_weights), _writer(encode_weights)


# ---------------------------------------------------------------- CSV

def fmt_float(v) -> str:
    """Shortest round-trip repr; infinities as ``inf`` / ``-inf``."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(c) if isinstance(c, (float, np.floating)) else c for c in row])
    return buf.getvalue()


def history_csv(history) -> str:
    return csv_text(["stage", "fidelity", "rel_change"],
                    [(int(s), float(f), float(r)) for s, f, r in history])


def sequence_csv(seq) -> str:
    header = ["t"] + [f"f{d}" for d in range(seq.feature_dim)]
    return csv_text(header, ([t] + [float(v) for v in row] for t, row in enumerate(seq.data)))


def singular_values_csv(spectra) -> str:
    """``spectra`` maps mode -> descending singular values."""
    rows = []
    for mode in sorted(spectra):
        for i, s in enumerate(spectra[mode]):
            s = float(s)
            rows.append((mode, i, s, math.log10(s) if s > 0 else -math.inf))
    return csv_text(["mode", "index", "sigma", "log10_sigma"], rows)


def spectrum_csv(cube: HsiCube, w: int, h: int) -> str:
    """Spectral curve of one pixel (band, wavelength, value)."""
    wl = cube.wavelengths
    rows = [
        (n, float(wl[n]) if wl is not None else "", float(cube.data[n, h, w]))
        for n in range(cube.channels)
    ]
    return csv_text(["band", "wavelength", "value"], rows)
