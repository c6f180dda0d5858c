"""Accelerated half-quadratic splitting (A-HQS) for CASSI reconstruction.

Per stage k::

    x_{k+1}     = argmin_x 1/2 ||y - Phi x||^2 + mu_k/2 ||x - zhat_k||^2
    z_{k+1}     = prox(x_{k+1}, eta_k)
    zhat_{k+1}  = z_{k+1} + beta_{k+1} (z_{k+1} - z_k)

Because Phi Phi^T is diagonal the x-step has a closed form that only needs
an elementwise division in measurement space.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .errors import DivergenceError, ParameterError, ShapeError
from .sensing import Measurement, SensingOperator, adjoint, forward
from .tensor import HsiCube

INIT_EPS = 1e-6

_CONSTANT_RE = re.compile(r"^constant\(\s*([-+0-9.eE]+)\s*\)$")


class ProxOperator(Protocol):
    def denoise(self, v: HsiCube, eta: float) -> HsiCube: ...


def _parse_beta_mode(mode: str):
    mode = mode.strip()
    if mode in ("nesterov", "zero"):
        return mode, 0.0
    m = _CONSTANT_RE.match(mode)
    if m:
        c = float(m.group(1))
        if not 0.0 <= c < 1.0:
            raise ParameterError(f"constant beta must lie in [0, 1), got {c}")
        return "constant", c
    raise ParameterError(f"unknown beta_mode {mode!r}; expected nesterov, zero or constant(c)")


@dataclass
class SolverConfig:
    """Stage count and per-stage schedules.

    ``eta`` entries are the noise levels handed to the prox.  When left
    empty they default to ``tau / mu_k``, the weight of the exact
    proximal step of ``tau * R``.
    """

    stages: int
    mu: Sequence[float]
    beta_mode: str = "nesterov"
    prox_tag: str = "tv"
    tau: float = 1.0
    eta: Sequence[float] = ()
    tolerance: float = 1e-8

    def __post_init__(self):
        if int(self.stages) != self.stages or self.stages < 1:
            raise ParameterError(f"stages must be a positive integer, got {self.stages}")
        self.stages = int(self.stages)
        self.mu = [float(m) for m in self.mu]
        if len(self.mu) != self.stages:
            raise ParameterError(f"mu schedule has {len(self.mu)} entries, need {self.stages}")
        if any(not (m > 0 and math.isfinite(m)) for m in self.mu):
            raise ParameterError("mu entries must be positive and finite")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if not self.eta:
            self.eta = [self.tau / m for m in self.mu]
        self.eta = [float(e) for e in self.eta]
        if len(self.eta) != self.stages or any(not e >= 0 for e in self.eta):
            raise ParameterError("eta schedule must hold `stages` non-negative entries")
        if not self.tolerance >= 0:
            raise ParameterError("tolerance must be non-negative")
        _parse_beta_mode(self.beta_mode)

    @classmethod
    def geometric(cls, stages, mu0, rho=1.0, eta0=None, **kw) -> "SolverConfig":
        """mu_k = mu0 * rho**k; eta constant at ``eta0`` if given."""
        mu = [mu0 * rho**k for k in range(int(stages))] if stages >= 1 else []
        eta = [eta0] * int(stages) if eta0 is not None else ()
        return cls(stages=stages, mu=mu, eta=eta, **kw)


@dataclass
class SolverState:
    x: HsiCube
    z: HsiCube
    z_hat: HsiCube
    k: int = 0
    residual_history: List[Tuple[int, float, float]] = field(default_factory=list)


def beta_schedule(mode: str, k: int) -> float:
    """Momentum weight beta_{k+1} applied after stage ``k`` (zero-based)."""
    if k < 0:
        raise ParameterError("stage index must be non-negative")
    kind, c = _parse_beta_mode(mode)
    if kind == "zero":
        return 0.0
    if kind == "constant":
        return c
    t = 1.0
    for _ in range(k):
        t = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
    t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
    return (t - 1.0) / t_next


def _nesterov_betas(n):
    out, t = [], 1.0
    for _ in range(n):
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        out.append((t - 1.0) / t_next)
        t = t_next
    return out


def data_step(op: SensingOperator, y: Measurement, z_hat: HsiCube, mu: float) -> HsiCube:
    """Closed-form minimizer of 1/2||y - Phi x||^2 + mu/2||x - z_hat||^2."""
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    r = op.gram_diag
    resid = y.values - forward(op, z_hat).values
    return HsiCube(z_hat.data + adjoint(op, Measurement(resid / (mu + r))).data)


def momentum_step(z_next: HsiCube, z_prev: HsiCube, beta: float) -> HsiCube:
    if z_next.dims != z_prev.dims:
        raise ShapeError(f"momentum operands differ: {z_next.dims} vs {z_prev.dims}")
    return HsiCube(z_next.data + beta * (z_next.data - z_prev.data))


def initialize(op: SensingOperator, y: Measurement) -> HsiCube:
    """Diagonal-normalized backprojection Phi^T (y / max(r, eps))."""
    return adjoint(op, Measurement(y.values / np.maximum(op.gram_diag, INIT_EPS)))


def data_fidelity(op: SensingOperator, y: Measurement, x: HsiCube) -> float:
    res = y.values - forward(op, x).values
    return 0.5 * float(np.sum(res * res))


def run(
    config: SolverConfig,
    op: SensingOperator,
    y: Measurement,
    prox: ProxOperator,
    callback: Optional[Callable[[int, HsiCube], None]] = None,
) -> Tuple[HsiCube, SolverState]:
    """Run up to ``config.stages`` A-HQS stages; return the last x and the state.

    ``callback(stage, x)`` is invoked after every completed stage; a truthy
    return value ends the run early.  From stage 2 on, the run also stops
    once the relative change of x drops below ``config.tolerance``.
    """
    kind, c = _parse_beta_mode(config.beta_mode)
    betas = (
        _nesterov_betas(config.stages) if kind == "nesterov"
        else [c if kind == "constant" else 0.0] * config.stages
    )
    z0 = initialize(op, y)
    state = SolverState(x=z0, z=z0, z_hat=z0)
    x = z0
    for k in range(config.stages):
        try:
            x_next = data_step(op, y, state.z_hat, config.mu[k])
        except ArithmeticError:
            raise DivergenceError(k + 1, "data step") from None
        try:
            z_next = prox.denoise(x_next, config.eta[k])
        except ArithmeticError:
            raise DivergenceError(k + 1, "prox output") from None
        if not np.all(np.isfinite(z_next.data)):
            raise DivergenceError(k + 1, "prox output")
        try:
            z_hat = momentum_step(z_next, state.z, betas[k])
        except ArithmeticError:
            raise DivergenceError(k + 1, "momentum step") from None

        x_norm = np.linalg.norm(x.data)
        delta = np.linalg.norm(x_next.data - x.data)
        rel = float(delta / x_norm) if x_norm > 0 else (0.0 if delta == 0 else math.inf)
        state.residual_history.append((k + 1, data_fidelity(op, y, x_next), rel))
        state.x, state.z, state.z_hat, state.k = x_next, z_next, z_hat, k + 1
        x = x_next
        if callback is not None and callback(k + 1, x):
            break
        # the initializer is already data-consistent, so stage 1 may not move x
        if k > 0 and rel < config.tolerance:
            break
    return x, state


def run_hqs(config: SolverConfig, op, y, prox, callback=None):
    """Plain HQS: :func:`run` with the momentum switched off."""
    return run(replace(config, beta_mode="zero"), op, y, prox, callback)
