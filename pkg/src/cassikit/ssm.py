"""Selective state-space scan over mode-k serializations of a cube.

Discretization per token x_t (length D)::

    B_t, C_t, delta_t = split(W_proj @ x_t, [N, N, R])
    dt_t   = softplus(W_dt @ delta_t)                     # (D,)
    A_bar  = exp(-exp(A_log * dt_t[:, None]))             # (D, N)
    B_bar  = dt_t[:, None] * B_t[None, :]                 # (D, N)

Recurrence::

    h_t = A_bar_t * h_{t-1} + B_bar_t * x_t[:, None]
    y_t = h_t @ C_t + D_skip * x_t
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .errors import NumericError, ParameterError, ProvenanceError, ShapeError
from .tensor import Dims, HsiCube, ModeKMatrix, fold_mode_k, unfold_mode_k

PATH_NAMES = ("TL->BR", "TR->BL", "BR->TL", "BL->TR")


@dataclass(frozen=True)
class ScanDirection:
    mode: int
    path: int

    def __post_init__(self):
        if self.mode not in (1, 2, 3) or self.path not in (0, 1, 2, 3):
            raise ParameterError(f"invalid scan direction mode={self.mode} path={self.path}")

    @classmethod
    def all(cls):
        return [cls(m, p) for m in (1, 2, 3) for p in range(4)]

    def __str__(self):
        return f"mode{self.mode}:{PATH_NAMES[self.path]}"


@dataclass(eq=False)
class Sequence:
    """L tokens of width D, plus what is needed to map back to a cube."""

    data: np.ndarray
    direction: Optional[ScanDirection] = None
    source_dims: Optional[Dims] = None

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.data.shape[1]

    def with_data(self, data) -> "Sequence":
        return Sequence(data, self.direction, self.source_dims)


def _column_order(dims: Dims, direction: ScanDirection) -> np.ndarray:
    """Permutation of unfolded columns visited by ``direction.path``.

    Columns come in blocks of the faster remaining dimension; path 1 reverses
    inside each block, paths 2 and 3 are the full reversals of 0 and 1.
    """
    other = [d for i, d in enumerate(dims) if i != direction.mode - 1]
    fast, slow = other
    cols = np.arange(fast * slow).reshape(slow, fast)
    if direction.path in (1, 3):
        cols = cols[:, ::-1]
    order = cols.ravel()
    if direction.path in (2, 3):
        order = order[::-1]
    return order


def sequence_from_direction(cube: HsiCube, direction: ScanDirection) -> Sequence:
    if not isinstance(direction, ScanDirection):
        raise ParameterError(f"expected a ScanDirection, got {direction!r}")
    mat = unfold_mode_k(cube, direction.mode).data
    order = _column_order(cube.dims, direction)
    return Sequence(np.ascontiguousarray(mat[:, order].T), direction, cube.dims)


def inverse_sequence(seq: Sequence) -> HsiCube:
    d, dims = seq.direction, seq.source_dims
    if d is None or dims is None:
        raise ProvenanceError("sequence carries no provenance")
    if not isinstance(d, ScanDirection) or len(dims) != 3:
        raise ProvenanceError(f"corrupt provenance: {d!r}, {dims!r}")
    rows = dims[d.mode - 1]
    n_cols = math.prod(dims) // rows
    if seq.data.shape != (n_cols, rows):
        raise ProvenanceError(
            f"sequence shape {seq.data.shape} inconsistent with provenance {d} / {dims}"
        )
    order = _column_order(dims, d)
    mat = np.empty((rows, n_cols))
    mat[:, order] = seq.data.T
    return fold_mode_k(ModeKMatrix(d.mode, mat, tuple(dims)), dims, d.mode)


@dataclass(eq=False)
class SsmParams:
    A_log: np.ndarray   # (D, N)
    D_skip: np.ndarray  # (D,)
    W_proj: np.ndarray  # (2N + R, D)
    W_dt: np.ndarray    # (D, R)

    def __post_init__(self):
        self.A_log = np.asarray(self.A_log, dtype=np.float64)
        self.D_skip = np.asarray(self.D_skip, dtype=np.float64)
        self.W_proj = np.asarray(self.W_proj, dtype=np.float64)
        self.W_dt = np.asarray(self.W_dt, dtype=np.float64)
        D, N = self.A_log.shape
        R = self.W_dt.shape[1] if self.W_dt.ndim == 2 else -1
        if (self.D_skip.shape != (D,) or self.W_dt.shape != (D, R)
                or self.W_proj.shape != (2 * N + R, D)):
            raise ShapeError(
                "inconsistent SSM parameter shapes: "
                f"A_log {self.A_log.shape}, D_skip {self.D_skip.shape}, "
                f"W_proj {self.W_proj.shape}, W_dt {self.W_dt.shape}"
            )
        for name in ("A_log", "D_skip", "W_proj", "W_dt"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"non-finite SSM weight {name}")

    @property
    def feature_dim(self) -> int:
        return self.A_log.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A_log.shape[1]

    @property
    def dt_rank(self) -> int:
        return self.W_dt.shape[1]

    @classmethod
    def random(cls, D, N=16, R=None, seed=0, rng=None) -> "SsmParams":
        """Seeded init: projections uniform in +-1/sqrt(fan_in), A_log in [-1.5, 0.5]."""
        R = default_dt_rank(D) if R is None else R
        rng = np.random.default_rng(seed) if rng is None else rng
        return cls(
            A_log=rng.uniform(-1.5, 0.5, (D, N)),
            D_skip=rng.uniform(-1.0, 1.0, D),
            W_proj=rng.uniform(-1, 1, (2 * N + R, D)) / math.sqrt(D),
            W_dt=rng.uniform(-1, 1, (D, R)) / math.sqrt(R),
        )

    @classmethod
    def pure_skip(cls, D, N=16, R=None) -> "SsmParams":
        """B = 0 and D_skip = 1, so the block passes its input through."""
        R = default_dt_rank(D) if R is None else R
        return cls(np.zeros((D, N)), np.ones(D), np.zeros((2 * N + R, D)), np.zeros((D, R)))


def default_dt_rank(D: int) -> int:
    return max(1, math.ceil(D / 16))


def softplus(u):
    return np.logaddexp(0.0, u)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def _discretize_all(params: SsmParams, X: np.ndarray):
    """Vectorized discretization for a (L, D) token matrix."""
    N, R = params.state_dim, params.dt_rank
    proj = X @ params.W_proj.T
    B, Cm, delta = proj[:, :N], proj[:, N:2 * N], proj[:, 2 * N:2 * N + R]
    s = delta @ params.W_dt.T
    dt = softplus(s)
    u = params.A_log[None, :, :] * dt[:, :, None]
    e = np.exp(u)
    A_bar = np.exp(-e)
    B_bar = dt[:, :, None] * B[:, None, :]
    # exp(-exp(.)) can only leave [0, 1] through a NaN
    if not (np.all(A_bar >= 0.0) and np.all(A_bar <= 1.0)):
        raise NumericError("discretization produced A_bar outside [0, 1]")
    return dict(proj=proj, B=B, C=Cm, delta=delta, s=s, dt=dt, e=e, A_bar=A_bar, B_bar=B_bar)


def discretize(params: SsmParams, x_t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (A_bar (D, N), B_bar (D, N), C_t (N,)) for one token."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (params.feature_dim,):
        raise ShapeError(f"token has shape {x_t.shape}, expected ({params.feature_dim},)")
    if not np.all(np.isfinite(x_t)):
        raise NumericError("non-finite token")
    with np.errstate(over="ignore", under="ignore"):
        d = _discretize_all(params, x_t[None, :])
    return d["A_bar"][0], d["B_bar"][0], d["C"][0]


def _prepare(params: SsmParams, seq: Sequence):
    X = np.asarray(seq.data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.feature_dim:
        raise ShapeError(f"sequence feature dim {X.shape[-1]} != params D = {params.feature_dim}")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite sequence entries")
    with np.errstate(over="ignore", under="ignore"):
        return X, _discretize_all(params, X)


def _scan_states(A_bar, U):
    """h_t = A_bar_t * h_{t-1} + U_t, h_0 = 0; returns all h_t, shape (L, D, N)."""
    L = A_bar.shape[0]
    H = np.empty_like(U)
    h = np.zeros(U.shape[1:])
    for t in range(L):
        h = A_bar[t] * h + U[t]
        H[t] = h
    return H


def _readout(params, X, d, H, start=0):
    if not np.all(np.isfinite(H)):
        bad = int(np.argmax(~np.all(np.isfinite(H.reshape(H.shape[0], -1)), axis=1)))
        raise NumericError(f"non-finite hidden state at step {start + bad + 1}")
    return np.einsum("ldn,ln->ld", H, d["C"]) + params.D_skip[None, :] * X


def selective_scan(params: SsmParams, seq: Sequence) -> Sequence:
    X, d = _prepare(params, seq)
    U = d["B_bar"] * X[:, :, None]
    H = _scan_states(d["A_bar"], U)
    return seq.with_data(_readout(params, X, d, H))


def selective_scan_chunked(params: SsmParams, seq: Sequence, chunk_len: int) -> Sequence:
    """Same output as :func:`selective_scan`, computed chunk-parallel.

    Every chunk is scanned from a zero state (vectorized across chunks),
    then boundary states are carried forward sequentially using the
    within-chunk prefix products of A_bar.
    """
    if int(chunk_len) != chunk_len or chunk_len < 1:
        raise ParameterError("chunk_len must be a positive integer")
    chunk_len = int(chunk_len)
    L = seq.data.shape[0]
    if chunk_len >= L:
        return selective_scan(params, seq)
    X, d = _prepare(params, seq)
    D, N = params.feature_dim, params.state_dim
    n_chunks = -(-L // chunk_len)
    pad = n_chunks * chunk_len - L
    A = d["A_bar"]
    U = d["B_bar"] * X[:, :, None]
    if pad:
        A = np.concatenate([A, np.ones((pad, D, N))])
        U = np.concatenate([U, np.zeros((pad, D, N))])
    A = A.reshape(n_chunks, chunk_len, D, N)
    U = U.reshape(n_chunks, chunk_len, D, N)

    local = np.empty_like(U)
    prefix = np.empty_like(A)
    h = np.zeros((n_chunks, D, N))
    p = np.ones((n_chunks, D, N))
    for j in range(chunk_len):
        h = A[:, j] * h + U[:, j]
        p = p * A[:, j]
        local[:, j] = h
        prefix[:, j] = p

    carry = np.zeros((D, N))
    H = np.empty_like(local)
    for c in range(n_chunks):
        H[c] = local[c] + prefix[c] * carry
        carry = H[c, -1]
    H = H.reshape(n_chunks * chunk_len, D, N)[:L]
    return seq.with_data(_readout(params, X, d, H))


@dataclass(eq=False)
class ScanGrads:
    A_log: np.ndarray
    D_skip: np.ndarray
    W_proj: np.ndarray
    W_dt: np.ndarray


def scan_backward(params: SsmParams, seq: Sequence, grad_out) -> Tuple[np.ndarray, ScanGrads]:
    """Reverse-mode derivatives of sum_t <grad_out_t, y_t>.

    Returns ``(grad_seq, grads)`` where ``grad_seq`` has the sequence shape
    and ``grads`` holds one array per :class:`SsmParams` field.
    """
    G = np.asarray(grad_out.data if isinstance(grad_out, Sequence) else grad_out, dtype=np.float64)
    X, d = _prepare(params, seq)
    if G.shape != X.shape:
        raise ShapeError(f"grad_out shape {G.shape} != sequence shape {X.shape}")
    N, R = params.state_dim, params.dt_rank
    A_bar, B_bar, Cm = d["A_bar"], d["B_bar"], d["C"]
    H = _scan_states(A_bar, B_bar * X[:, :, None])
    H_prev = np.concatenate([np.zeros((1,) + H.shape[1:]), H[:-1]])
    L = X.shape[0]

    # adjoint state: gh_t = A_{t+1} * gh_{t+1} + G_t C_t^T
    direct = G[:, :, None] * Cm[:, None, :]
    gH = np.empty_like(H)
    g = np.zeros(H.shape[1:])
    for t in range(L - 1, -1, -1):
        g = direct[t] + (A_bar[t + 1] * g if t + 1 < L else 0.0)
        gH[t] = g

    gC = np.einsum("ld,ldn->ln", G, H)
    gX = G * params.D_skip[None, :]
    gD_skip = np.sum(G * X, axis=0)

    gA_bar = gH * H_prev
    gB_bar = gH * X[:, :, None]
    gX += np.einsum("ldn,ldn->ld", gH, B_bar)

    dt = d["dt"]
    gB = np.einsum("ldn,ld->ln", gB_bar, dt)
    gdt = np.einsum("ldn,ln->ld", gB_bar, d["B"])
    gu = gA_bar * (-A_bar * d["e"])
    gA_log = np.einsum("ldn,ld->dn", gu, dt)
    gdt += np.einsum("ldn,dn->ld", gu, params.A_log)

    gs = gdt * _sigmoid(d["s"])
    gW_dt = gs.T @ d["delta"]
    gdelta = gs @ params.W_dt

    gproj = np.concatenate([gB, gC, gdelta], axis=1)
    gW_proj = gproj.T @ X
    gX += gproj @ params.W_proj
    return gX, ScanGrads(gA_log, gD_skip, gW_proj, gW_dt)


def mk_mamba_block(
    cube: HsiCube,
    params_per_direction: Mapping[ScanDirection, SsmParams],
    directions: Optional[Iterable[ScanDirection]] = None,
    fuse_weights=None,
    fuse_bias=None,
    chunk_len=None,
) -> HsiCube:
    """Scan the cube along each direction, map back, average, then mix channels.

    ``fuse_weights`` is a (C, C) channel-mixing matrix applied to the mean
    over directions (identity when omitted).  ``chunk_len`` selects the
    chunked scan; ``"auto"`` uses chunks of about sqrt(L) tokens.
    """
    dirs = list(params_per_direction) if directions is None else list(directions)
    if not dirs:
        raise ParameterError("at least one scan direction is required")
    acc = np.zeros_like(cube.data)
    for direction in dirs:
        params = params_per_direction[direction]
        seq = sequence_from_direction(cube, direction)
        if chunk_len is None:
            out = selective_scan(params, seq)
        elif chunk_len == "auto":
            out = selective_scan_chunked(params, seq, max(1, math.isqrt(seq.length)))
        else:
            out = selective_scan_chunked(params, seq, chunk_len)
        acc += inverse_sequence(out).data
    mean = acc / len(dirs)
    if fuse_weights is None:
        fused = mean
    else:
        F = np.asarray(fuse_weights, dtype=np.float64)
        if F.shape != (cube.channels, cube.channels):
            raise ShapeError(f"fuse weights must be {cube.channels}x{cube.channels}, got {F.shape}")
        fused = np.tensordot(F, mean, axes=(1, 0))
    if fuse_bias is not None:
        fused = fused + np.asarray(fuse_bias)[:, None, None]
    return HsiCube(fused)


def feature_dim_for(dims: Dims, mode: int) -> int:
    """Token width of a mode-``mode`` serialization of a cube with ``dims``."""
    return dims[mode - 1]
