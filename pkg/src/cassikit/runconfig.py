"""Line-oriented ``key = value`` run configuration for the command line."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .blocks import MambaITConfig, MMBDenoiser
from .errors import FormatError, ParameterError
from .priors import IdentityProx, QuadraticProx, SoftThresholdProx, TvConfig, TvProx
from .solver import SolverConfig, _parse_beta_mode

PROX_TAGS = ("tv", "tv-iso", "soft", "identity", "quadratic", "mmb")


@dataclass(frozen=True)
class RunConfig:
    stages: int = 50
    mu0: float = 0.35
    mu_rho: float = 1.05
    beta_mode: str = "nesterov"
    prox: str = "tv"
    tau: float = 0.008
    eta0: float | None = None
    step: int = 2
    noise_sigma: float = 0.01
    seed: int = 0
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.prox not in PROX_TAGS:
            raise ParameterError(f"unknown prox {self.prox!r}; expected one of {', '.join(PROX_TAGS)}")
        if self.step < 0 or self.seed < 0:
            raise ParameterError("step and seed must be non-negative")
        if not self.noise_sigma >= 0:
            raise ParameterError("noise_sigma must be non-negative")
        if not self.mu_rho > 0:
            raise ParameterError("mu_rho must be positive")
        if self.eta0 is not None and not self.eta0 >= 0:
            raise ParameterError("eta0 must be non-negative")
        _parse_beta_mode(self.beta_mode)
        self.solver_config()

    def solver_config(self) -> SolverConfig:
        return SolverConfig.geometric(
            self.stages, self.mu0, self.mu_rho, eta0=self.eta0,
            beta_mode=self.beta_mode, prox_tag=self.prox, tau=self.tau, tolerance=self.tolerance,
        )

    def make_prox(self, dims):
        """Prox operator for cubes of ``dims`` = (W, H, C)."""
        if self.prox == "tv":
            return TvProx(TvConfig(variant="anisotropic"))
        if self.prox == "tv-iso":
            return TvProx(TvConfig(variant="isotropic"))
        if self.prox == "soft":
            return SoftThresholdProx()
        if self.prox == "quadratic":
            return QuadraticProx()
        if self.prox == "identity":
            return IdentityProx()
        W, H, C = dims
        return MMBDenoiser.random(MambaITConfig(channels=C), W, H, seed=self.seed)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INTS = {"stages", "step", "seed"}
_STRS = {"beta_mode", "prox"}


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key, text, line_no):
    try:
        if key in _STRS:
            return text
        if key == "eta0" and text.lower() == "none":
            return None
        if key in _INTS:
            return int(text)
        v = float(text)
        if not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        raise FormatError(f"line {line_no}: bad value {text!r} for {key}") from None


def parse_run_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

    Missing keys take their defaults; unknown or repeated keys are rejected.
    """
    values = {}
    offset = 0
    for line_no, raw in enumerate(text.splitlines(keepends=True), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            if "=" not in line:
                raise FormatError(f"line {line_no}: expected 'key = value'", offset)
            key, _, val = (s.strip() for s in line.partition("="))
            if key not in _FIELDS:
                raise FormatError(f"line {line_no}: unknown key {key!r}", offset)
            if key in values:
                raise FormatError(f"line {line_no}: duplicate key {key!r}", offset)
            values[key] = _convert(key, val, line_no)
        offset += len(raw.encode("utf-8"))
    try:
        return RunConfig(**values)
    except ParameterError as exc:
        raise FormatError(f"invalid run configuration: {exc}") from None


def format_run_config(cfg: RunConfig) -> str:
    """Every key on its own line, in declaration order."""
    return "".join(f"{name} = {_fmt(getattr(cfg, name))}\n" for name in _FIELDS)
