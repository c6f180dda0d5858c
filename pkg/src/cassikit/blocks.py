"""Forward-only numpy implementation of the U-shaped Mamba/attention denoiser.

All feature maps are ``(C, H, W)`` arrays.  Weights live in a
:class:`~cassikit.weights.WeightStore` under dotted names; the builders in
this module (``init_*``) and the forward functions agree on those names.

Structure::

    mmb_denoise     pad -> embed(x, eta) -> [MMIT, down] * levels -> MMIT
                    -> [up, skip-fuse, MMIT] * levels -> head -> x + crop(head)
    mmit_block      x + MambaIT(x), then x + MkMamba(LN(x))
    mamba_i_t       Lin(SiLU(Lin(LN x)) * GLAM(SiLU(Conv(Lin(LN x)))))
    glam            x + window attention + global-token attention
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import NumericError, ParameterError, ShapeError
from .ssm import ScanDirection, SsmParams, default_dt_rank, mk_mamba_block
from .tensor import HsiCube
from .weights import WeightInit, WeightStore

LN_EPS = 1e-5


# ---------------------------------------------------------------- primitives

def silu(x):
    return x * (0.5 * (1.0 + np.tanh(0.5 * x)))


def layer_norm(x, gain, bias, axis=0, eps=LN_EPS):
    """Normalize over the channel axis, then scale and shift per channel."""
    x = np.asarray(x, dtype=np.float64)
    C = x.shape[axis]
    if np.shape(gain) != (C,) or np.shape(bias) != (C,):
        raise ShapeError(f"layer_norm gain/bias must have shape ({C},)")
    mu = x.mean(axis=axis, keepdims=True)
    var = x.var(axis=axis, keepdims=True)
    xn = (x - mu) / np.sqrt(var + eps)
    bshape = [1] * x.ndim
    bshape[axis] = C
    return xn * np.reshape(gain, bshape) + np.reshape(bias, bshape)


def linear(x, W, b=None):
    """Per-pixel channel projection: (Cin, H, W) -> (Cout, H, W)."""
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[1] != x.shape[0]:
        raise ShapeError(f"linear weight {W.shape} does not accept {x.shape[0]} channels")
    out = np.tensordot(W, x, axes=(1, 0))
    if b is not None:
        out = out + np.asarray(b)[:, None, None]
    return out


def conv3x3(x, kernels, bias=None):
    """Zero-padded 3x3 convolution (cross-correlation); kernels are (Cout, Cin, 3, 3)."""
    kernels = np.asarray(kernels)
    if kernels.ndim != 4 or kernels.shape[1:] != (x.shape[0], 3, 3):
        raise ShapeError(f"conv kernels {kernels.shape} do not accept {x.shape[0]} channels")
    H, W = x.shape[1:]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((kernels.shape[0], H, W))
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(kernels[:, :, dy, dx], xp[:, dy:dy + H, dx:dx + W], axes=(1, 0))
    if bias is not None:
        out += np.asarray(bias)[:, None, None]
    return out


def down2(x, kernels, bias=None):
    """2x2 stride-2 convolution; kernels are (Cout, Cin, 2, 2)."""
    C, H, W = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"down2 needs even spatial dims, got {(H, W)}")
    blocks = x.reshape(C, H // 2, 2, W // 2, 2)
    out = np.einsum("ocab,ciajb->oij", kernels, blocks)
    if bias is not None:
        out += np.asarray(bias)[:, None, None]
    return out


def up2(x, kernels, bias=None):
    """2x2 stride-2 transposed convolution; kernels are (Cout, Cin, 2, 2)."""
    C, H, W = x.shape
    out = np.einsum("ocab,cij->oiajb", kernels, x).reshape(kernels.shape[0], 2 * H, 2 * W)
    if bias is not None:
        out += np.asarray(bias)[:, None, None]
    return out


def softmax(logits, axis=-1):
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite attention logits")
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _attend(q, k, v):
    """Scaled dot-product attention over the last two axes; returns (out, weights)."""
    scale = 1.0 / math.sqrt(q.shape[-1])
    w = softmax(np.matmul(q, np.swapaxes(k, -1, -2)) * scale, axis=-1)
    return np.matmul(w, v), w


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class MambaITConfig:
    """Hyper-parameters of the denoiser.

    ``channels`` is the number of spectral bands of the cube being
    denoised; ``features`` the width of the first U-level (doubled per level).
    """

    channels: int
    features: int = 8
    expansion: float = 2.0
    window: int = 4
    global_tokens: int = 4
    levels: int = 2
    state_dim: int = 16
    directions: Tuple[ScanDirection, ...] = field(default_factory=lambda: tuple(ScanDirection.all()))
    share_paths: bool = False

    def __post_init__(self):
        if self.channels < 1 or self.features < 1:
            raise ParameterError("channels and features must be positive")
        if int(self.expansion * min(self.features, self.channels)) < 1:
            raise ParameterError("expansion factor leaves fewer than one channel")
        if self.window < 1 or self.global_tokens < 1 or self.levels < 0 or self.state_dim < 1:
            raise ParameterError("window, global_tokens, state_dim must be positive; levels >= 0")
        if not self.directions:
            raise ParameterError("at least one scan direction is required")

    def expanded(self, c: int) -> int:
        return int(math.floor(self.expansion * c))

    def level_features(self, level: int) -> int:
        return self.features * 2**level

    @property
    def multiple(self) -> int:
        """Spatial dims are padded to a multiple of this."""
        return self.window * 2**self.levels

    def padded(self, width: int, height: int) -> Tuple[int, int]:
        m = self.multiple
        return (-(-width // m) * m, -(-height // m) * m)


# ---------------------------------------------------------------- GLAM

def init_glam(init: WeightInit, prefix: str, E: int, g: int):
    for name in ("q", "k", "v", "gq", "gk", "gv", "bq", "bk", "bv"):
        init.uniform(f"{prefix}.{name}", (E, E), E)
    init.range(f"{prefix}.tokens", (g, E), -1.0, 1.0)


def _pad_to(x, m):
    H, W = x.shape[1:]
    ph, pw = (-H) % m, (-W) % m
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, ph), (0, pw)), mode="edge")
    return x, (H, W)


def glam(x, weights: WeightStore, prefix: str, window: int, return_attention=False):
    """Global-local attention with residual fusion.

    Local: softmax attention among the pixels of each non-overlapping
    ``window`` x ``window`` tile.  Global: learned tokens attend over the
    tile-averaged grid, then every pixel attends over those tokens.
    Inputs whose spatial dims are not multiples of ``window`` are
    edge-padded and cropped back.
    """
    E = x.shape[0]
    xp, (H, W) = _pad_to(x, window)
    Hp, Wp = xp.shape[1:]
    nh, nw = Hp // window, Wp // window
    wq, wk, wv = (weights.get(f"{prefix}.{n}", (E, E)) for n in ("q", "k", "v"))

    tiles = xp.reshape(E, nh, window, nw, window).transpose(1, 3, 2, 4, 0)
    tiles = tiles.reshape(nh, nw, window * window, E)
    local, a_local = _attend(tiles @ wq.T, tiles @ wk.T, tiles @ wv.T)
    local = local.reshape(nh, nw, window, window, E).transpose(4, 0, 2, 1, 3).reshape(E, Hp, Wp)

    tokens = weights[f"{prefix}.tokens"]
    if tokens.ndim != 2 or tokens.shape[1] != E:
        raise ShapeError(f"global tokens {tokens.shape} do not match width {E}")
    pooled = xp.reshape(E, nh, window, nw, window).mean(axis=(2, 4)).reshape(E, -1).T
    gq, gk, gv = (weights.get(f"{prefix}.{n}", (E, E)) for n in ("gq", "gk", "gv"))
    gathered, a_global = _attend(tokens @ gq.T, pooled @ gk.T, pooled @ gv.T)

    pix = xp.reshape(E, -1).T
    bq, bk, bv = (weights.get(f"{prefix}.{n}", (E, E)) for n in ("bq", "bk", "bv"))
    spread, a_bcast = _attend(pix @ bq.T, gathered @ bk.T, gathered @ bv.T)
    spread = spread.T.reshape(E, Hp, Wp)

    out = (xp + local + spread)[:, :H, :W]
    if return_attention:
        return out, {"local": a_local, "global": a_global, "broadcast": a_bcast}
    return out


# ---------------------------------------------------------------- Mamba-inspired transformer

def init_mamba_i_t(init: WeightInit, prefix: str, C: int, cfg: MambaITConfig):
    E = cfg.expanded(C)
    init.const(f"{prefix}.ln.gain", (C,), 1.0)
    init.const(f"{prefix}.ln.bias", (C,), 0.0)
    init.uniform(f"{prefix}.lin1.w", (E, C), C)
    init.uniform(f"{prefix}.lin1.b", (E,), C)
    init.uniform(f"{prefix}.lin2.w", (E, C), C)
    init.uniform(f"{prefix}.lin2.b", (E,), C)
    init.uniform(f"{prefix}.conv.w", (E, E, 3, 3), 9 * E)
    init.uniform(f"{prefix}.conv.b", (E,), 9 * E)
    init_glam(init, f"{prefix}.glam", E, cfg.global_tokens)
    init.uniform(f"{prefix}.out.w", (C, E), E)
    init.uniform(f"{prefix}.out.b", (C,), E)


def mamba_i_t(x, weights: WeightStore, prefix: str, cfg: MambaITConfig):
    C = x.shape[0]
    E = cfg.expanded(C)
    h = layer_norm(x, weights.get(f"{prefix}.ln.gain", (C,)), weights.get(f"{prefix}.ln.bias", (C,)))
    x1 = silu(linear(h, weights.get(f"{prefix}.lin1.w", (E, C)), weights[f"{prefix}.lin1.b"]))
    x2 = linear(h, weights.get(f"{prefix}.lin2.w", (E, C)), weights[f"{prefix}.lin2.b"])
    x2 = silu(conv3x3(x2, weights.get(f"{prefix}.conv.w", (E, E, 3, 3)), weights[f"{prefix}.conv.b"]))
    x2 = glam(x2, weights, f"{prefix}.glam", cfg.window)
    return linear(x1 * x2, weights.get(f"{prefix}.out.w", (C, E)), weights[f"{prefix}.out.b"])


# ---------------------------------------------------------------- mode-k Mamba

def _ssm_key(prefix, d: ScanDirection, share_paths):
    return f"{prefix}.m{d.mode}" if share_paths else f"{prefix}.m{d.mode}p{d.path}"


def init_mk_mamba(init: WeightInit, prefix: str, dims, cfg: MambaITConfig):
    """dims is (W, H, C) of the feature cube at this level."""
    C = dims[2]
    N = cfg.state_dim
    seen = set()
    for d in cfg.directions:
        key = _ssm_key(prefix, d, cfg.share_paths)
        if key in seen:
            continue
        seen.add(key)
        D = dims[d.mode - 1]
        R = default_dt_rank(D)
        init.range(f"{key}.A_log", (D, N), -1.5, 0.5)
        init.range(f"{key}.D_skip", (D,), -1.0, 1.0)
        init.uniform(f"{key}.W_proj", (2 * N + R, D), D)
        init.uniform(f"{key}.W_dt", (D, R), R)
    init.const(f"{prefix}.ln.gain", (C,), 1.0)
    init.const(f"{prefix}.ln.bias", (C,), 0.0)
    init.uniform(f"{prefix}.fuse.w", (C, C), C)
    init.uniform(f"{prefix}.fuse.b", (C,), C)


def mk_mamba_params(weights: WeightStore, prefix: str, dims, cfg: MambaITConfig):
    params = {}
    for d in cfg.directions:
        key = _ssm_key(prefix, d, cfg.share_paths)
        D = dims[d.mode - 1]
        try:
            params[d] = SsmParams(
                weights[f"{key}.A_log"], weights[f"{key}.D_skip"],
                weights[f"{key}.W_proj"], weights[f"{key}.W_dt"],
            )
        except KeyError as exc:
            raise ShapeError(f"missing SSM weights for {d}: {exc}") from None
        if params[d].feature_dim != D:
            raise ShapeError(
                f"SSM weights {key} expect feature dim {params[d].feature_dim}, "
                f"cube gives {D}; weights were built for a different input size"
            )
    return params


def mk_mamba(x, weights: WeightStore, prefix: str, cfg: MambaITConfig):
    C, H, W = x.shape
    dims = (W, H, C)
    h = layer_norm(x, weights.get(f"{prefix}.ln.gain", (C,)), weights.get(f"{prefix}.ln.bias", (C,)))
    params = mk_mamba_params(weights, prefix, dims, cfg)
    out = mk_mamba_block(
        HsiCube(h), params, cfg.directions,
        weights.get(f"{prefix}.fuse.w", (C, C)), weights[f"{prefix}.fuse.b"], chunk_len="auto",
    )
    return out.data


# ---------------------------------------------------------------- MMIT / MMB

def init_mmit(init: WeightInit, prefix: str, dims, cfg: MambaITConfig):
    init_mamba_i_t(init, f"{prefix}.mit", dims[2], cfg)
    init_mk_mamba(init, f"{prefix}.mk", dims, cfg)


def mmit_block(x, weights: WeightStore, prefix: str, cfg: MambaITConfig):
    x = x + mamba_i_t(x, weights, f"{prefix}.mit", cfg)
    return x + mk_mamba(x, weights, f"{prefix}.mk", cfg)


def init_mmb_weights(cfg: MambaITConfig, width: int, height: int, seed: int = 0) -> WeightStore:
    """Seeded random weights for denoising ``width`` x ``height`` cubes."""
    init = WeightInit(seed)
    Wp, Hp = cfg.padded(width, height)
    C, F = cfg.channels, cfg.features
    init.uniform("mmb.embed.w", (F, C + 1, 3, 3), 9 * (C + 1))
    init.uniform("mmb.embed.b", (F,), 9 * (C + 1))
    for lv in range(cfg.levels):
        f = cfg.level_features(lv)
        s = 2**lv
        init_mmit(init, f"mmb.enc{lv}", (Wp // s, Hp // s, f), cfg)
        init.uniform(f"mmb.down{lv}.w", (2 * f, f, 2, 2), 4 * f)
        init.uniform(f"mmb.down{lv}.b", (2 * f,), 4 * f)
    fb = cfg.level_features(cfg.levels)
    sb = 2**cfg.levels
    init_mmit(init, "mmb.mid", (Wp // sb, Hp // sb, fb), cfg)
    for lv in reversed(range(cfg.levels)):
        f = cfg.level_features(lv)
        s = 2**lv
        init.uniform(f"mmb.up{lv}.w", (f, 2 * f, 2, 2), 2 * f)
        init.uniform(f"mmb.up{lv}.b", (f,), 2 * f)
        init.uniform(f"mmb.fuse{lv}.w", (f, 2 * f), 2 * f)
        init.uniform(f"mmb.fuse{lv}.b", (f,), 2 * f)
        init_mmit(init, f"mmb.dec{lv}", (Wp // s, Hp // s, f), cfg)
    init.uniform("mmb.head.w", (C, F, 3, 3), 9 * F)
    init.uniform("mmb.head.b", (C,), 9 * F)
    return init.build()


def output_projection_names(weights: WeightStore):
    """Names of every sub-block's final projection (zeroing them all gives the identity)."""
    suffixes = (".mit.out.w", ".mit.out.b", ".mk.fuse.w", ".mk.fuse.b")
    names = [n for n in weights if n.endswith(suffixes)]
    return names + ["mmb.head.w", "mmb.head.b"]


def mmb_forward(x, eta: float, weights: WeightStore, cfg: MambaITConfig):
    """Network output before the global residual, on a (C, H, W) array."""
    C, H, W = x.shape
    if C != cfg.channels:
        raise ShapeError(f"denoiser configured for {cfg.channels} channels, got {C}")
    Wp, Hp = cfg.padded(W, H)
    xp = np.pad(x, ((0, 0), (0, Hp - H), (0, Wp - W)), mode="edge")
    inp = np.concatenate([xp, np.full((1, Hp, Wp), float(eta))])
    f = conv3x3(inp, weights.get("mmb.embed.w", (cfg.features, C + 1, 3, 3)), weights["mmb.embed.b"])
    skips = []
    for lv in range(cfg.levels):
        f = mmit_block(f, weights, f"mmb.enc{lv}", cfg)
        skips.append(f)
        f = down2(f, weights[f"mmb.down{lv}.w"], weights[f"mmb.down{lv}.b"])
    f = mmit_block(f, weights, "mmb.mid", cfg)
    for lv in reversed(range(cfg.levels)):
        f = up2(f, weights[f"mmb.up{lv}.w"], weights[f"mmb.up{lv}.b"])
        f = linear(np.concatenate([f, skips[lv]]), weights[f"mmb.fuse{lv}.w"], weights[f"mmb.fuse{lv}.b"])
        f = mmit_block(f, weights, f"mmb.dec{lv}", cfg)
    out = conv3x3(f, weights.get("mmb.head.w", (C, cfg.features, 3, 3)), weights["mmb.head.b"])
    return out[:, :H, :W]


def mmb_denoise(x: HsiCube, eta: float, weights: WeightStore, cfg: MambaITConfig) -> HsiCube:
    """x + network(x, eta); spatial dims are padded internally and cropped back."""
    if eta < 0:
        raise ParameterError("eta must be non-negative")
    out = mmb_forward(x.data, eta, weights, cfg)
    if not np.all(np.isfinite(out)):
        raise NumericError("denoiser produced non-finite output")
    return x.with_data(x.data + out)


class MMBDenoiser:
    """ProxOperator backed by :func:`mmb_denoise`."""

    def __init__(self, weights: WeightStore, cfg: MambaITConfig):
        self.weights = weights
        self.cfg = cfg

    @classmethod
    def random(cls, cfg: MambaITConfig, width: int, height: int, seed: int = 0) -> "MMBDenoiser":
        return cls(init_mmb_weights(cfg, width, height, seed), cfg)

    def denoise(self, v: HsiCube, eta: float) -> HsiCube:
        return mmb_denoise(v, eta, self.weights, self.cfg)
