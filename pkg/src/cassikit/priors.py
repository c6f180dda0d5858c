"""Training-free proximal operators usable as the z-step of the solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .tensor import HsiCube


def soft_threshold(v: HsiCube, theta: float) -> HsiCube:
    if theta < 0:
        raise ParameterError("theta must be non-negative")
    d = v.data
    return v.with_data(np.sign(d) * np.maximum(np.abs(d) - theta, 0.0))


@dataclass(frozen=True)
class TvConfig:
    inner_iterations: int = 20
    variant: str = "anisotropic"
    lambda_scale: float = 1.0

    def __post_init__(self):
        if self.inner_iterations < 1:
            raise ParameterError("inner_iterations must be >= 1")
        if self.variant not in ("isotropic", "anisotropic"):
            raise ParameterError(f"unknown TV variant {self.variant!r}")
        if not self.lambda_scale > 0:
            raise ParameterError("lambda_scale must be positive")


def _grad(u):
    """Forward differences along H and W with Neumann boundary; u is (..., H, W)."""
    gh = np.zeros_like(u)
    gw = np.zeros_like(u)
    gh[..., :-1, :] = u[..., 1:, :] - u[..., :-1, :]
    gw[..., :, :-1] = u[..., :, 1:] - u[..., :, :-1]
    return gh, gw


def _div(ph, pw):
    """Negative adjoint of :func:`_grad`."""
    dh = np.zeros_like(ph)
    if ph.shape[-2] > 1:
        dh[..., 0, :] = ph[..., 0, :]
        dh[..., 1:-1, :] = ph[..., 1:-1, :] - ph[..., :-2, :]
        dh[..., -1, :] = -ph[..., -2, :]
    dw = np.zeros_like(pw)
    if pw.shape[-1] > 1:
        dw[..., :, 0] = pw[..., :, 0]
        dw[..., :, 1:-1] = pw[..., :, 1:-1] - pw[..., :, :-2]
        dw[..., :, -1] = -pw[..., :, -2]
    return dh + dw


def tv_norm(u, variant="anisotropic") -> float:
    """Spatial total variation summed over channels of a (C, H, W) array."""
    gh, gw = _grad(np.asarray(u, dtype=np.float64))
    if variant == "anisotropic":
        return float(np.sum(np.abs(gh)) + np.sum(np.abs(gw)))
    return float(np.sum(np.sqrt(gh * gh + gw * gw)))


def tv_prox(v: HsiCube, eta: float, config: TvConfig = TvConfig()) -> HsiCube:
    """Approximate argmin_z 1/2||z - v||^2 + lam * TV(z), channel by channel.

    Projected gradient ascent on the dual with step 1/8, started from zero,
    run for exactly ``config.inner_iterations`` steps.  ``lam`` is
    ``config.lambda_scale * eta``.
    """
    lam = config.lambda_scale * float(eta)
    if lam < 0:
        raise ParameterError("TV weight must be non-negative")
    if lam == 0:
        return v.with_data(v.data.copy())
    g = v.data
    ph = np.zeros_like(g)
    pw = np.zeros_like(g)
    tau = 1.0 / 8.0
    for _ in range(config.inner_iterations):
        gh, gw = _grad(_div(ph, pw) - g / lam)
        ph += tau * gh
        pw += tau * gw
        if config.variant == "isotropic":
            scale = np.maximum(1.0, np.sqrt(ph * ph + pw * pw))
            ph /= scale
            pw /= scale
        else:
            np.clip(ph, -1.0, 1.0, out=ph)
            np.clip(pw, -1.0, 1.0, out=pw)
    return v.with_data(g - lam * _div(ph, pw))


class IdentityProx:
    def denoise(self, v: HsiCube, eta: float) -> HsiCube:
        return v


class QuadraticProx:
    """Shrinkage v / (1 + lam): the prox of lam/2 ||z||^2.

    With ``lam=None`` the shrinkage weight is the solver's eta.
    """

    def __init__(self, lam=None):
        self.lam = lam

    def denoise(self, v, eta):
        lam = eta if self.lam is None else self.lam
        return v.with_data(v.data / (1.0 + lam))


class SoftThresholdProx:
    def __init__(self, scale=1.0):
        self.scale = scale

    def denoise(self, v, eta):
        return soft_threshold(v, self.scale * eta)


class TvProx:
    def __init__(self, config: TvConfig = TvConfig()):
        self.config = config

    def denoise(self, v, eta):
        return tv_prox(v, eta, self.config)
