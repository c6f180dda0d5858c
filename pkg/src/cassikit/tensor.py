"""Hyperspectral cube container, mode-k matricization and dispersion shifts.

Cubes are indexed as ``X[w, h, c]`` mathematically but stored channel-major:
``data`` has numpy shape ``(C, H, W)`` so that the flat layout is channel
outermost, then row (h), then column (w).  With that layout the mode-3
unfolding is a plain reshape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ModeError, NumericError, ParameterError, ShapeError

Dims = Tuple[int, int, int]


@dataclass(eq=False)
class HsiCube:
    """A W x H x C real tensor with optional band wavelengths (nm).

    Parameters
    ----------
    data : ndarray, shape (C, H, W)
        Channel-major payload.
    wavelengths : sequence of float, optional
        Strictly ascending, one per channel.
    """

    data: np.ndarray
    wavelengths: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ShapeError(f"cube data must be a non-empty (C, H, W) array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError("cube contains non-finite entries")
        self.data = data
        if self.wavelengths is not None:
            wl = np.asarray(self.wavelengths, dtype=np.float64).ravel()
            if wl.size != data.shape[0]:
                raise ShapeError(f"expected {data.shape[0]} wavelengths, got {wl.size}")
            if wl.size > 1 and not np.all(np.diff(wl) > 0):
                raise ParameterError("wavelengths must be strictly ascending")
            self.wavelengths = wl

    @classmethod
    def from_whc(cls, arr, wavelengths=None) -> "HsiCube":
        """Build a cube from an array indexed ``[w, h, c]``."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"expected a 3-d array, got {arr.ndim}-d")
        return cls(np.ascontiguousarray(arr.transpose(2, 1, 0)), wavelengths)

    @classmethod
    def from_flat(cls, flat, dims: Dims, wavelengths=None) -> "HsiCube":
        W, H, C = dims
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != W * H * C:
            raise ShapeError(f"data length {flat.size} != W*H*C = {W * H * C}")
        return cls(flat.reshape(C, H, W), wavelengths)

    @classmethod
    def zeros(cls, dims: Dims) -> "HsiCube":
        W, H, C = dims
        return cls(np.zeros((C, H, W)))

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> Dims:
        return (self.width, self.height, self.channels)

    @property
    def whc(self) -> np.ndarray:
        """View indexed ``[w, h, c]``."""
        return self.data.transpose(2, 1, 0)

    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def with_data(self, data) -> "HsiCube":
        return HsiCube(data, self.wavelengths)

    def __repr__(self):
        W, H, C = self.dims
        return f"HsiCube(W={W}, H={H}, C={C})"


@dataclass(eq=False)
class ModeKMatrix:
    """Mode-k unfolding of a cube; rows index dimension ``mode``."""

    mode: int
    data: np.ndarray
    source_dims: Dims

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def _check_mode(k) -> int:
    if k not in (1, 2, 3):
        raise ModeError(f"mode must be 1, 2 or 3, got {k!r}")
    return int(k)


def unfold_mode_k(cube: HsiCube, k: int) -> ModeKMatrix:
    """Mode-k matricization.

    Entry ``(i1, i2, i3)`` lands in row ``i_k`` and column
    ``sum_{j != k} i_j * J_j`` with ``J_j = prod_{m < j, m != k} I_m``, i.e.
    the remaining indices are ordered with the lower mode varying fastest.
    """
    k = _check_mode(k)
    t = cube.whc
    m = np.moveaxis(t, k - 1, 0)
    mat = m.reshape(m.shape[0], -1, order="F")
    return ModeKMatrix(k, np.ascontiguousarray(mat), cube.dims)


def fold_mode_k(m: ModeKMatrix, dims: Sequence[int], k: int) -> HsiCube:
    """Inverse of :func:`unfold_mode_k`."""
    k = _check_mode(k)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ShapeError(f"dims must have three entries, got {dims}")
    if k != m.mode:
        raise ShapeError(f"matrix is a mode-{m.mode} unfolding, asked to fold mode {k}")
    W, H, C = dims
    other = [d for i, d in enumerate(dims) if i != k - 1]
    data = np.asarray(m.data)
    if data.shape != (dims[k - 1], other[0] * other[1]):
        raise ShapeError(
            f"matrix shape {data.shape} incompatible with dims {dims} for mode {k}"
        )
    t = data.reshape((dims[k - 1], other[0], other[1]), order="F")
    return HsiCube.from_whc(np.moveaxis(t, 0, k - 1))


def mode_singular_values(cube: HsiCube, k: int) -> np.ndarray:
    """Singular values of the mode-k unfolding, in descending order."""
    mat = unfold_mode_k(cube, k).data
    if not np.all(np.isfinite(mat)):
        raise NumericError("non-finite entries in cube")
    return np.linalg.svd(mat, compute_uv=False)


def shifted_height(height: int, step: int, channels: int) -> int:
    return height + step * (channels - 1)


def shift_cube(cube: HsiCube, step: int) -> HsiCube:
    """Disperse channel n by ``step * n`` pixels along H, zero-filling."""
    step = int(step)
    if step < 0:
        raise ParameterError("step must be non-negative")
    C, H, W = cube.data.shape
    out = np.zeros((C, shifted_height(H, step, C), W))
    for n in range(C):
        out[n, step * n:step * n + H] = cube.data[n]
    return HsiCube(out, cube.wavelengths)


def unshift_cube(cube: HsiCube, step: int, target_H: int) -> HsiCube:
    """Adjoint of :func:`shift_cube`: crop each channel's dispersed window."""
    step = int(step)
    C, Ht, W = cube.data.shape
    if Ht != shifted_height(target_H, step, C):
        raise ShapeError(
            f"height {Ht} != target_H + step*(C-1) = {shifted_height(target_H, step, C)}"
        )
    out = np.empty((C, target_H, W))
    for n in range(C):
        out[n] = cube.data[n, step * n:step * n + target_H]
    return HsiCube(out, cube.wavelengths)
