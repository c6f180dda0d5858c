"""Single-disperser CASSI sensing operator.

Vectorization convention: ``vec(x)`` is the channel-major flat layout of a
cube (``x.data.ravel()``) and ``vec(y)`` is the row-major flat layout of the
``(H~, W)`` measurement array.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericError, ParameterError, ShapeError
from .tensor import HsiCube, shift_cube, shifted_height, unshift_cube

DENSE_LIMIT = 10**7


@dataclass(eq=False)
class CodedAperture:
    """Mask values stored as an ``(H, W)`` array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ShapeError(f"mask must be a non-empty 2-d array, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ParameterError("mask values must be finite and non-negative")
        self.values = v

    @classmethod
    def random_binary(cls, width, height, density=0.5, seed=0) -> "CodedAperture":
        rng = np.random.default_rng(seed)
        return cls((rng.random((height, width)) < density).astype(np.float64))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(eq=False)
class Measurement:
    """A 2-d snapshot stored as an ``(H~, W)`` array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError(f"measurement must be 2-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError("measurement contains non-finite entries")
        self.values = v

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """Mask plus dispersion geometry; realizes Phi and Phi^T without storing them."""

    mask: CodedAperture
    step: int
    channels: int
    shifted_mask: np.ndarray = field(init=False, repr=False)
    gram_diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.step < 0:
            raise ParameterError("dispersion step must be non-negative")
        if self.channels < 1:
            raise ParameterError("channels must be positive")
        M = self.mask.values
        Ht = shifted_height(M.shape[0], self.step, self.channels)
        shifted = np.zeros((self.channels, Ht, M.shape[1]))
        for n in range(self.channels):
            shifted[n, self.step * n:self.step * n + M.shape[0]] = M
        shifted.flags.writeable = False
        r = np.sum(shifted**2, axis=0)
        r.flags.writeable = False
        object.__setattr__(self, "shifted_mask", shifted)
        object.__setattr__(self, "gram_diag", r)

    @property
    def cube_dims(self):
        return (self.mask.width, self.mask.height, self.channels)

    @property
    def meas_shape(self):
        """``(H~, W)`` of the measurement array."""
        return self.shifted_mask.shape[1:]

    def _check_cube(self, x: HsiCube):
        if x.dims != self.cube_dims:
            raise ShapeError(f"cube dims {x.dims} do not match operator {self.cube_dims}")

    def _check_meas(self, y: Measurement):
        if y.values.shape != self.meas_shape:
            raise ShapeError(
                f"measurement shape {y.values.shape} does not match operator {self.meas_shape}"
            )


def forward(op: SensingOperator, x: HsiCube) -> Measurement:
    """Y = sum_n shift(X)[n] * M~[n]."""
    op._check_cube(x)
    xs = shift_cube(x, op.step).data
    return Measurement(np.einsum("nhw,nhw->hw", xs, op.shifted_mask))


def adjoint(op: SensingOperator, y: Measurement) -> HsiCube:
    op._check_meas(y)
    per_band = y.values[None, :, :] * op.shifted_mask
    return unshift_cube(HsiCube(per_band), op.step, op.mask.height)


def phi_phit_diag(op: SensingOperator) -> np.ndarray:
    """Diagonal of Phi Phi^T, flattened in measurement order."""
    return op.gram_diag.ravel()


def simulate_measurement(op: SensingOperator, x: HsiCube, noise_sigma: float, seed: int) -> Measurement:
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be non-negative")
    y = forward(op, x)
    if noise_sigma == 0:
        return y
    rng = np.random.default_rng(seed)
    return Measurement(y.values + noise_sigma * rng.standard_normal(y.values.shape))


def densify(op: SensingOperator) -> np.ndarray:
    """Dense (W*H~) x (W*H*C) matrix of the operator, for testing."""
    W, H, C = op.cube_dims
    Ht = op.meas_shape[0]
    n_rows, n_cols = W * Ht, W * H * C
    if n_rows * n_cols > DENSE_LIMIT:
        raise CapacityError(f"dense operator would hold {n_rows * n_cols} entries (limit {DENSE_LIMIT})")
    A = np.zeros((n_rows, n_cols))
    # column for (c, h, w) is the shifted-mask value at (h + step*c, w)
    for c in range(C):
        for h in range(H):
            for w in range(W):
                col = (c * H + h) * W + w
                row = (h + op.step * c) * W + w
                A[row, col] = op.shifted_mask[c, h + op.step * c, w]
    return A
