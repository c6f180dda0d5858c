"""Seeded desk-scale experiments shared by ``selfcheck`` and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import psnr, ssim
from .priors import QuadraticProx, TvConfig, TvProx
from .scenes import synthetic_scene
from .sensing import CodedAperture, SensingOperator, densify, forward, simulate_measurement
from .solver import SolverConfig, initialize, run
from .tensor import HsiCube

# quadratic-prior instances for the momentum comparison
ACCEL_MU = 50.0
ACCEL_LAM = 0.01
ACCEL_TOL = 1e-6
ACCEL_MAX_STAGES = 20000

# desk-scale reconstruction
DESK_SIZE = (32, 32, 8)
DESK_STEP = 1
DESK_SIGMA = 0.01
DESK_STAGES = 50
DESK_MU0 = 0.35
DESK_MU_RHO = 1.05
DESK_TAU = 0.008


def random_instance(seed):
    """Small random (operator, noiseless measurement) pair: W, H in [3, 8], C in [2, 4]."""
    rng = np.random.default_rng(seed)
    W, H = int(rng.integers(3, 9)), int(rng.integers(3, 9))
    C, step = int(rng.integers(2, 5)), int(rng.integers(0, 3))
    op = SensingOperator(CodedAperture((rng.random((H, W)) < 0.5).astype(float)), step, C)
    y = forward(op, HsiCube(rng.random((C, H, W))))
    return op, y


def quadratic_fixed_point(op, y, mu=ACCEL_MU, lam=ACCEL_LAM):
    """Dense fixed point of the HQS iteration with shrinkage prox v / (1 + lam)."""
    A = densify(op)
    n = A.shape[1]
    return np.linalg.solve(A.T @ A + (mu * lam / (1 + lam)) * np.eye(n), A.T @ y.values.ravel())


def stages_to_tolerance(op, y, x_star, beta_mode, mu=ACCEL_MU, lam=ACCEL_LAM,
                        tol=ACCEL_TOL, max_stages=ACCEL_MAX_STAGES):
    """First stage whose iterate is within ``tol`` relative error of ``x_star`` (None if never)."""
    target = tol * np.linalg.norm(x_star)
    hit = []

    def cb(k, x):
        if np.linalg.norm(x.data.ravel() - x_star) <= target:
            hit.append(k)
            return True
        return False

    cfg = SolverConfig(stages=max_stages, mu=[mu] * max_stages, beta_mode=beta_mode, tolerance=0)
    run(cfg, op, y, QuadraticProx(lam), cb)
    return hit[0] if hit else None


@dataclass
class AccelerationResult:
    nesterov: list
    zero: list

    @property
    def win_fraction(self) -> float:
        wins = [n is not None and (z is None or n <= z) for n, z in zip(self.nesterov, self.zero)]
        return sum(wins) / len(wins)

    @property
    def median_reduction(self) -> float:
        red = [1 - n / z for n, z in zip(self.nesterov, self.zero) if n is not None and z]
        return float(np.median(red)) if red else 0.0


def acceleration_study(n_instances=50, seed0=0) -> AccelerationResult:
    nes, zero = [], []
    for s in range(seed0, seed0 + n_instances):
        op, y = random_instance(s)
        xs = quadratic_fixed_point(op, y)
        nes.append(stages_to_tolerance(op, y, xs, "nesterov"))
        zero.append(stages_to_tolerance(op, y, xs, "zero"))
    return AccelerationResult(nes, zero)


@dataclass
class DeskResult:
    truth: HsiCube
    init: HsiCube
    recon: HsiCube
    history: list

    @property
    def psnr_init(self):
        return psnr(self.truth, self.init)

    @property
    def psnr_recon(self):
        return psnr(self.truth, self.recon)

    @property
    def ssim_recon(self):
        return ssim(self.truth, self.recon)


def desk_problem():
    """Bundled 32x32x8 scene, density-0.5 binary mask, step 1, noise 0.01."""
    W, H, C = DESK_SIZE
    truth = synthetic_scene(W, H, C, seed=0)
    op = SensingOperator(CodedAperture.random_binary(W, H, 0.5, seed=1), DESK_STEP, C)
    y = simulate_measurement(op, truth, DESK_SIGMA, seed=2)
    return truth, op, y


def desk_config(beta_mode="nesterov", stages=DESK_STAGES) -> SolverConfig:
    return SolverConfig.geometric(stages, DESK_MU0, DESK_MU_RHO, tau=DESK_TAU,
                                  beta_mode=beta_mode, tolerance=0)


def desk_reconstruction(beta_mode="nesterov") -> DeskResult:
    truth, op, y = desk_problem()
    x, state = run(desk_config(beta_mode), op, y, TvProx(TvConfig(variant="anisotropic")))
    return DeskResult(truth, initialize(op, y), x, state.residual_history)
