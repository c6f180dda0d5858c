"""Runtime verification gate: every invariant of the toolkit as a seeded check.

Each :class:`Check` names the properties it covers (``covers``); the
traceability table in ``docs/traceability.md`` maps these ids to the
documented invariants.  ``run_all`` returns one result per check and the
command-line ``selfcheck`` exits 0 only if all pass.
"""
from __future__ import annotations

import contextlib
import io
import math
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

from . import benchmarks
from .blocks import (
    MambaITConfig, MMBDenoiser, glam, init_glam, init_mmb_weights, mmb_denoise,
    output_projection_names,
)
from .fileio import (
    decode_cube, decode_mask, decode_measurement, encode_cube, encode_mask,
    encode_measurement,
)
from .priors import QuadraticProx, TvConfig, TvProx, soft_threshold, tv_norm, tv_prox
from .runconfig import RunConfig, format_run_config, parse_run_config
from .scenes import synthetic_scene
from .sensing import (
    CodedAperture, Measurement, SensingOperator, adjoint, densify, forward, phi_phit_diag,
)
from .solver import SolverConfig, data_fidelity, data_step, run
from .ssm import (
    ScanDirection, Sequence, SsmParams, _discretize_all, inverse_sequence,
    scan_backward, selective_scan, selective_scan_chunked, sequence_from_direction,
)
from .tensor import (
    HsiCube, fold_mode_k, mode_singular_values, shift_cube, shifted_height,
    unfold_mode_k, unshift_cube,
)
from .weights import WeightInit, decode_weights, encode_weights


class CheckFailure(AssertionError):
    pass


def _require(cond, msg):
    if not cond:
        raise CheckFailure(msg)


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    covers: Tuple[str, ...]
    fn: Callable[[int], str]


@dataclass
class CheckResult:
    check: Check
    passed: bool
    detail: str
    seconds: float


REGISTRY: List[Check] = []


def check(suite, *covers):
    def deco(fn):
        REGISTRY.append(Check(fn.__name__, suite, covers, fn))
        return fn
    return deco


def _rel(a, b):
    a, b = float(a), float(b)
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _random_op(rng, max_w=16, max_h=16, max_c=8, binary=True):
    W, H = int(rng.integers(1, max_w + 1)), int(rng.integers(1, max_h + 1))
    C, step = int(rng.integers(1, max_c + 1)), int(rng.integers(0, 4))
    vals = (rng.random((H, W)) < 0.5).astype(float) if binary else rng.random((H, W))
    return SensingOperator(CodedAperture(vals), step, C)


# ---------------------------------------------------------------- tensor-core

@check("tensor", "C6", "T1")
def mode_roundtrip(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        dims = tuple(int(v) for v in rng.integers(1, 7, 3))
        cube = HsiCube.from_whc(rng.standard_normal(dims))
        for k in (1, 2, 3):
            back = fold_mode_k(unfold_mode_k(cube, k), dims, k)
            _require(np.array_equal(back.data, cube.data), f"mode-{k} round trip differs for {dims}")
    return "20 shapes x 3 modes bit-exact"


@check("tensor", "T2")
def unfold_multiset(seed):
    rng = np.random.default_rng(seed)
    cube = HsiCube.from_whc(rng.standard_normal((4, 5, 3)))
    ref = np.sort(cube.data.ravel())
    for k in (1, 2, 3):
        _require(np.array_equal(np.sort(unfold_mode_k(cube, k).data.ravel()), ref),
                 f"mode-{k} unfolding changed the value multiset")
    return "value multisets preserved"


@check("tensor", "T3")
def shift_adjoint_pair(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        W, H, C, step = (int(v) for v in (*rng.integers(1, 9, 3), rng.integers(0, 4)))
        x = HsiCube(rng.standard_normal((C, H, W)))
        u = HsiCube(rng.standard_normal((C, shifted_height(H, step, C), W)))
        lhs = np.vdot(shift_cube(x, step).data, u.data)
        rhs = np.vdot(x.data, unshift_cube(u, step, H).data)
        worst = max(worst, _rel(lhs, rhs))
    _require(worst <= 1e-12, f"shift/unshift dot test rel error {worst:.2e}")
    return f"worst rel error {worst:.1e}"


@check("tensor", "T4")
def svd_transpose_covariance(seed):
    rng = np.random.default_rng(seed)
    whc = rng.standard_normal((5, 7, 3))
    a = HsiCube.from_whc(whc)
    b = HsiCube.from_whc(whc.transpose(1, 0, 2))
    _require(np.array_equal(mode_singular_values(a, 1), mode_singular_values(b, 2))
             and np.array_equal(mode_singular_values(a, 2), mode_singular_values(b, 1))
             and np.array_equal(mode_singular_values(a, 3), mode_singular_values(b, 3)),
             "W<->H transpose does not swap mode-1/mode-2 spectra exactly")
    return "spectra swap exactly"


@check("tensor", "C7")
def rank_witness(seed):
    rng = np.random.default_rng(seed)
    for r in (1, 2, 3):
        for _ in range(5):
            dims = tuple(int(v) for v in rng.integers(4, 10, 3))
            whc = sum(np.einsum("i,j,k->ijk", *(rng.standard_normal(d) for d in dims))
                      for _ in range(r))
            cube = HsiCube.from_whc(whc)
            for k in (1, 2, 3):
                s = mode_singular_values(cube, k)
                n = int(np.sum(s > 1e-8 * s[0]))
                _require(n == r, f"rank-{r} cube {dims}: mode {k} reports {n} values")
    return "ranks 1..3 recovered in every mode"


def _walk(whc, mode, path):
    """Brute-force index walk of one scan direction (independent of unfolding)."""
    dims = whc.shape
    fast_ax, slow_ax = [a for a in range(3) if a != mode - 1]
    fast = list(range(dims[fast_ax]))
    slow = list(range(dims[slow_ax]))
    if path in (1, 2):
        fast = fast[::-1]
    if path in (2, 3):
        slow = slow[::-1]
    tokens = []
    for j in slow:
        for i in fast:
            idx = [0, 0, 0]
            idx[fast_ax], idx[slow_ax] = i, j
            tok = []
            for m in range(dims[mode - 1]):
                idx[mode - 1] = m
                tok.append(whc[tuple(idx)])
            tokens.append(tok)
    return np.array(tokens)


@check("tensor", "C6", "S4")
def scan_directions(seed):
    rng = np.random.default_rng(seed)
    small = HsiCube.from_whc(np.arange(8.0).reshape(2, 2, 2))
    for d in ScanDirection.all():
        _require(np.array_equal(sequence_from_direction(small, d).data, _walk(small.whc, d.mode, d.path)),
                 f"2x2x2 sequence for {d} differs from the index walk")
    for _ in range(10):
        dims = tuple(int(v) for v in rng.integers(1, 6, 3))
        cube = HsiCube.from_whc(rng.standard_normal(dims))
        for d in ScanDirection.all():
            seq = sequence_from_direction(cube, d)
            _require(np.array_equal(seq.data, _walk(cube.whc, d.mode, d.path)), f"{d} on {dims}: walk mismatch")
            _require(np.array_equal(inverse_sequence(seq).data, cube.data), f"{d} on {dims}: inverse mismatch")
    return "12 directions match the walk and invert bit-exactly"


# ---------------------------------------------------------------- cassi-operator

@check("operator", "O1")
def forward_linearity(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        op = _random_op(rng, binary=False)
        W, H, C = op.cube_dims
        x1, x2 = HsiCube(rng.standard_normal((C, H, W))), HsiCube(rng.standard_normal((C, H, W)))
        a, b = rng.standard_normal(2)
        lhs = forward(op, HsiCube(a * x1.data + b * x2.data)).values
        rhs = a * forward(op, x1).values + b * forward(op, x2).values
        worst = max(worst, np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))
    _require(worst <= 1e-12, f"linearity rel error {worst:.2e}")
    return f"worst rel error {worst:.1e}"


@check("operator", "C1", "O2")
def adjoint_dot_test(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        op = _random_op(rng, binary=bool(rng.integers(0, 2)))
        W, H, C = op.cube_dims
        x = HsiCube(rng.standard_normal((C, H, W)))
        y = Measurement(rng.standard_normal(op.meas_shape))
        worst = max(worst, _rel(np.vdot(forward(op, x).values, y.values),
                                np.vdot(x.data, adjoint(op, y).data)))
    _require(worst <= 1e-10, f"adjoint rel error {worst:.2e}")
    return f"100 configs, worst rel error {worst:.1e}"


@check("operator", "C3", "O3", "O4")
def gram_structure(seed):
    rng = np.random.default_rng(seed)
    for i in range(30):
        op = _random_op(rng, 8, 8, 4, binary=i % 2 == 0)
        A = densify(op)
        G = A @ A.T
        off = G - np.diag(np.diag(G))
        _require(np.count_nonzero(off) == 0, "densified Phi Phi^T has non-zero off-diagonal entries")
        r = phi_phit_diag(op)
        _require(np.allclose(np.diag(G), r, rtol=1e-14, atol=0), "Gram diagonal differs from sum of M~^2")
        _require(np.all(r >= 0), "negative Gram diagonal")
        covered = np.any(op.shifted_mask != 0, axis=0).ravel()
        _require(np.array_equal(r == 0, ~covered), "zero pattern of the Gram diagonal is wrong")
    return "30 configs: diagonal, non-negative, zero exactly where uncovered"


# ---------------------------------------------------------------- ahqs-solver

@check("solver", "C2", "A1")
def dense_data_step(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mu in (0.01, 1.0, 100.0):
        for _ in range(20):
            W, H, C, step = (int(v) for v in (*rng.integers(1, 9, 2), rng.integers(1, 5), rng.integers(0, 3)))
            op = SensingOperator(CodedAperture(rng.random((H, W)) * (rng.random((H, W)) < 0.7)), step, C)
            y = Measurement(rng.standard_normal(op.meas_shape))
            z = HsiCube(rng.standard_normal((C, H, W)))
            A = densify(op)
            ref = np.linalg.solve(A.T @ A + mu * np.eye(A.shape[1]), A.T @ y.values.ravel() + mu * z.flat())
            got = data_step(op, y, z, mu).flat()
            worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    _require(worst <= 1e-8, f"data step rel error {worst:.2e}")
    return f"60 instances, worst rel error {worst:.1e}"


@check("solver", "A2")
def hqs_objective_monotone(seed):
    rng = np.random.default_rng(seed)
    for mu, lam in ((1.0, 0.1), (10.0, 0.02), (0.5, 0.5)):
        for _ in range(5):
            op, y0 = benchmarks.random_instance(int(rng.integers(1 << 30)))
            y = Measurement(y0.values + 0.05 * rng.standard_normal(y0.values.shape))
            objs = []

            def cb(k, x):
                objs.append(data_fidelity(op, y, x) + 0.5 * lam * mu * float(np.sum(x.data**2)))

            run(SolverConfig(stages=40, mu=[mu] * 40, beta_mode="zero", tolerance=0), op, y,
                QuadraticProx(lam), cb)
            diffs = np.diff(objs)
            _require(np.all(diffs <= 1e-10 * max(1.0, abs(objs[0]))),
                     f"objective increased by {diffs.max():.2e} (mu={mu}, lam={lam})")
    return "objective non-increasing on 15 runs"


@check("solver", "C4", "A3")
def acceleration(seed):
    res = benchmarks.acceleration_study(50, seed0=0)
    _require(res.win_fraction >= 0.9, f"Nesterov no slower in only {res.win_fraction:.0%} of instances")
    _require(res.median_reduction >= 0.2, f"median reduction {res.median_reduction:.1%} < 20%")
    worst = max(n / z for n, z in zip(res.nesterov, res.zero))
    _require(worst <= 1.1, f"Nesterov needed {worst:.2f}x the zero-momentum stage count")
    return f"wins {res.win_fraction:.0%}, median reduction {res.median_reduction:.1%}"


@check("solver", "A4")
def solver_determinism(seed):
    truth, op, y = benchmarks.desk_problem()
    cfg = benchmarks.desk_config(stages=5)
    a, sa = run(cfg, op, y, TvProx())
    b, sb = run(cfg, op, y, TvProx())
    _require(np.array_equal(a.data, b.data) and sa.residual_history == sb.residual_history,
             "two identical runs differ")
    return "bit-identical"


@check("solver", "C8")
def desk_reconstruction(seed):
    r = benchmarks.desk_reconstruction()
    gain = r.psnr_recon - r.psnr_init
    _require(gain >= 5.0, f"PSNR gain {gain:.2f} dB < 5 dB")
    _require(r.ssim_recon >= 0.85, f"SSIM {r.ssim_recon:.4f} < 0.85")
    return f"PSNR +{gain:.2f} dB, SSIM {r.ssim_recon:.4f}"


# ---------------------------------------------------------------- ssm-scan

@check("scan", "C5", "S1")
def abar_open_interval(seed):
    rng = np.random.default_rng(seed)
    total = 0
    while total < 100_000:
        p = SsmParams.random(4, N=5, R=2, rng=rng)
        X = rng.standard_normal((500, 4)) * rng.uniform(0.1, 3.0)
        a = _discretize_all(p, X)["A_bar"]
        _require(np.all(a > 0) and np.all(a < 1), "A_bar left the open interval (0, 1)")
        total += X.shape[0]
    return f"{total} discretizations inside (0, 1)"


@check("scan", "C5", "S2")
def chunked_equivalence(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for L in (1, 7, 64, 257):
        p = SsmParams.random(3, N=4, rng=rng)
        seq = Sequence(rng.standard_normal((L, 3)))
        ref = selective_scan(p, seq).data
        for c in (1, 16, L):
            got = selective_scan_chunked(p, seq, c).data
            worst = max(worst, np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-300))
    _require(worst <= 1e-12, f"chunked scan rel error {worst:.2e}")
    return f"worst rel error {worst:.1e}"


def _fd_grads(p, X, G, h=1e-5):
    def loss(pp, XX):
        return float(np.sum(G * selective_scan(pp, Sequence(XX)).data))

    out = {}
    for name in ("A_log", "D_skip", "W_proj", "W_dt"):
        base = getattr(p, name)
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += h
            minus[idx] -= h
            g[idx] = (loss(replace(p, **{name: plus}), X) - loss(replace(p, **{name: minus}), X)) / (2 * h)
        out[name] = g
    gx = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        plus, minus = X.copy(), X.copy()
        plus[idx] += h
        minus[idx] -= h
        gx[idx] = (loss(p, plus) - loss(p, minus)) / (2 * h)
    out["x"] = gx
    return out


@check("scan", "C5", "S3")
def gradient_check(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        p = SsmParams.random(2, N=3, R=2, rng=rng)
        X = rng.standard_normal((8, 2))
        G = rng.standard_normal((8, 2))
        gx, grads = scan_backward(p, Sequence(X), G)
        fd = _fd_grads(p, X, G)
        for name, got in (("x", gx), ("A_log", grads.A_log), ("D_skip", grads.D_skip),
                          ("W_proj", grads.W_proj), ("W_dt", grads.W_dt)):
            err = np.linalg.norm(got - fd[name]) / max(np.linalg.norm(fd[name]), 1e-12)
            worst = max(worst, err)
    _require(worst <= 1e-5, f"analytic vs finite-difference rel error {worst:.2e}")
    return f"20 instances, worst rel error {worst:.1e}"


@check("scan", "S5")
def memoryless_reversal(seed):
    rng = np.random.default_rng(seed)
    p = SsmParams.random(3, N=4, rng=rng)
    p = replace(p, A_log=np.full_like(p.A_log, 1e3))
    X = rng.standard_normal((11, 3))
    with np.errstate(over="ignore"):
        _require(np.all(_discretize_all(p, X)["A_bar"] == 0), "A_bar is not identically zero")
        fwd = selective_scan(p, Sequence(X)).data
        rev = selective_scan(p, Sequence(X[::-1].copy())).data
    _require(np.array_equal(rev, fwd[::-1]), "memoryless scan is not reversal-equivariant")
    return "exact"


# ---------------------------------------------------------------- neural-denoiser

_SHAPES = ((8, 8, 4), (13, 17, 4), (32, 32, 8))


@check("neural", "C9", "N1", "N5")
def mmb_shapes_finite(seed):
    rng = np.random.default_rng(seed)
    for W, H, C in _SHAPES:
        den = MMBDenoiser.random(MambaITConfig(channels=C), W, H, seed=seed)
        x = HsiCube(rng.random((C, H, W)))
        out = den.denoise(x, 0.1)
        _require(out.dims == x.dims, f"shape {x.dims} -> {out.dims}")
        _require(np.all(np.isfinite(out.data)), f"non-finite output on {x.dims}")
    return "shapes preserved, outputs finite"


@check("neural", "C9", "N2")
def mmb_determinism(seed):
    rng = np.random.default_rng(seed)
    cfg = MambaITConfig(channels=4)
    x = HsiCube(rng.random((4, 13, 17)))
    a = mmb_denoise(x, 0.05, init_mmb_weights(cfg, 17, 13, seed), cfg)
    b = mmb_denoise(x, 0.05, init_mmb_weights(cfg, 17, 13, seed), cfg)
    _require(np.array_equal(a.data, b.data), "two runs differ")
    return "bit-identical"


@check("neural", "C9", "N3")
def mmb_residual_degeneracy(seed):
    rng = np.random.default_rng(seed)
    for W, H, C in _SHAPES:
        cfg = MambaITConfig(channels=C)
        w = init_mmb_weights(cfg, W, H, seed)
        w = w.with_arrays({n: np.zeros(w[n].shape) for n in output_projection_names(w)})
        x = HsiCube(rng.random((C, H, W)))
        _require(np.array_equal(mmb_denoise(x, 0.3, w, cfg).data, x.data),
                 f"zeroed projections are not the identity on {x.dims}")
    return "exact identity"


@check("neural", "N4")
def attention_rows(seed):
    rng = np.random.default_rng(seed)
    init = WeightInit(seed)
    init_glam(init, "g", 6, 4)
    w = init.build()
    _, att = glam(rng.random((6, 10, 9)), w, "g", 4, return_attention=True)
    for name, a in att.items():
        _require(np.all(a >= 0) and np.allclose(a.sum(axis=-1), 1.0, atol=1e-6, rtol=0),
                 f"{name} attention rows are not probability vectors")
    return "rows sum to 1"


@check("neural", "C9")
def mmb_in_solver(seed):
    truth = synthetic_scene(16, 16, 4, seed=seed)
    op = SensingOperator(CodedAperture.random_binary(16, 16, 0.5, seed=seed + 1), 1, 4)
    y = forward(op, truth)
    den = MMBDenoiser.random(MambaITConfig(channels=4), 16, 16, seed=seed)
    cfg = SolverConfig.geometric(3, 0.5, tau=0.01, tolerance=0)
    _, state = run(cfg, op, y, den)
    hist = state.residual_history
    _require(len(hist) == 3 and all(math.isfinite(f) and math.isfinite(r) for _, f, r in hist),
             "history incomplete or non-finite")
    return "3 stages, finite history"


# ---------------------------------------------------------------- priors-baseline

@check("priors", "P1")
def prox_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        shape = (int(rng.integers(1, 4)), int(rng.integers(2, 10)), int(rng.integers(2, 10)))
        a, b = HsiCube(rng.standard_normal(shape)), HsiCube(rng.standard_normal(shape))
        eta = float(rng.uniform(0.01, 1.0))
        for P in (lambda v: soft_threshold(v, eta),
                  lambda v: tv_prox(v, eta, TvConfig(variant="anisotropic")),
                  lambda v: tv_prox(v, eta, TvConfig(variant="isotropic"))):
            ratio = np.linalg.norm(P(a).data - P(b).data) / np.linalg.norm(a.data - b.data)
            worst = max(worst, ratio)
    _require(worst <= 1 + 1e-9, f"expansion ratio {worst:.6f}")
    return f"worst ratio {worst:.4f}"


@check("priors", "P2")
def soft_threshold_optimality(seed):
    rng = np.random.default_rng(seed)
    v = HsiCube(rng.standard_normal((3, 6, 5)))
    theta = 0.4
    z = soft_threshold(v, theta).data
    g = v.data - z  # must lie in theta * subdifferential of |z|
    nz = z != 0
    _require(np.allclose(g[nz], theta * np.sign(z[nz]), rtol=0, atol=1e-15), "optimality fails on support")
    _require(np.all(np.abs(g[~nz]) <= theta), "optimality fails off support")
    return "subgradient condition holds"


@check("priors", "P3")
def tv_energy_decrease(seed):
    rng = np.random.default_rng(seed)
    for variant in ("anisotropic", "isotropic"):
        for _ in range(10):
            v = HsiCube(rng.random((2, 9, 7)))
            lam = float(rng.uniform(0.01, 0.5))
            z = tv_prox(v, lam, TvConfig(variant=variant)).data
            e_out = 0.5 * np.sum((z - v.data) ** 2) + lam * tv_norm(z, variant)
            e_in = lam * tv_norm(v.data, variant)
            _require(e_out <= e_in, f"{variant} TV energy rose: {e_out:.6g} > {e_in:.6g}")
    return "energy never increases"


# ---------------------------------------------------------------- io-cli

@check("io", "C10", "I1")
def format_roundtrip(seed):
    rng = np.random.default_rng(seed)
    cube = synthetic_scene(7, 5, 3, seed=seed)
    bare = HsiCube(rng.random((2, 3, 4)))
    mask = CodedAperture.random_binary(6, 4, seed=seed)
    meas = Measurement(rng.standard_normal((9, 6)))
    weights = init_mmb_weights(MambaITConfig(channels=2, features=2, levels=1), 4, 4, seed)
    cases = ((encode_cube, decode_cube, cube), (encode_cube, decode_cube, bare),
             (encode_mask, decode_mask, mask), (encode_measurement, decode_measurement, meas),
             (encode_weights, decode_weights, weights))
    for enc, dec, obj in cases:
        b1 = enc(obj)
        _require(enc(dec(b1)) == b1, f"{enc.__name__} round trip is not byte-identical")
    cfg = RunConfig(stages=7, prox="soft", eta0=0.25, beta_mode="constant(0.5)")
    _require(parse_run_config(format_run_config(cfg)) == cfg, "run config round trip differs")
    return "cube, mask, measurement, weights and run config round-trip"


@check("io", "I2")
def cli_determinism(seed):
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stdout(io.StringIO()):
        t = Path(tmp)
        assert main(["scene", "--width", "12", "--height", "12", "--channels", "3",
                     "--seed", str(seed), "--out", str(t / "x.hsi")]) == 0
        assert main(["mask", "--width", "12", "--height", "12", "--seed", str(seed),
                     "--out", str(t / "m.msk")]) == 0
        (t / "run.cfg").write_text("stages = 4\nprox = tv\nstep = 1\n")
        outs = []
        for i in range(2):
            args = ["simulate", "--cube", str(t / "x.hsi"), "--mask", str(t / "m.msk"), "--step", "1",
                    "--sigma", "0.01", "--seed", str(seed), "--out", str(t / f"y{i}.mea")]
            _require(main(args) == 0, "simulate failed")
            args = ["reconstruct", "--meas", str(t / f"y{i}.mea"), "--mask", str(t / "m.msk"),
                    "--config", str(t / "run.cfg"), "--out", str(t / f"r{i}.hsi"),
                    "--history", str(t / f"h{i}.csv")]
            _require(main(args) == 0, "reconstruct failed")
            outs.append([(t / f"{p}{i}.{e}").read_bytes() for p, e in (("y", "mea"), ("r", "hsi"), ("h", "csv"))])
        _require(outs[0] == outs[1], "two CLI invocations produced different bytes")
    return "simulate + reconstruct byte-identical"


# ---------------------------------------------------------------- runner

CRITERIA = tuple(f"C{i}" for i in range(1, 10))
INVARIANTS = (
    "T1", "T2", "T3", "T4", "O1", "O2", "O3", "O4", "A1", "A2", "A3", "A4",
    "S1", "S2", "S3", "S4", "S5", "N1", "N2", "N3", "N4", "N5", "P1", "P2", "P3",
    "I1", "I2", "I3",
)


@check("io", "I3")
def invariant_coverage(seed):
    covered = {c for ch in REGISTRY for c in ch.covers}
    missing = [i for i in INVARIANTS if i not in covered]
    _require(not missing, f"no check covers {', '.join(missing)}")
    missing = [c for c in CRITERIA if c not in covered]
    _require(not missing, f"no check covers {', '.join(missing)}")
    return f"{len(INVARIANTS)} invariants and {len(CRITERIA)} criteria covered"


def covered_criteria(checks=None):
    checks = REGISTRY if checks is None else checks
    return sorted({c for ch in checks for c in ch.covers if c.startswith("C")}, key=lambda s: int(s[1:]))


def run_all(seed=0, suites=None, quiet=True) -> List[CheckResult]:
    results = []
    for ch in REGISTRY:
        if suites and ch.suite not in suites:
            continue
        t0 = time.perf_counter()
        try:
            with np.errstate(all="raise", under="ignore"):
                detail = ch.fn(seed)
            ok = True
        except Exception as exc:  # a failing check is reported, not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(ch, ok, detail, time.perf_counter() - t0))
    return results


def format_table(results) -> str:
    w = max(len(r.check.name) for r in results) if results else 4
    lines = [f"{'suite':<9} {'check':<{w}} {'result':<6} {'time':>7}  covers / detail"]
    for r in results:
        lines.append(
            f"{r.check.suite:<9} {r.check.name:<{w}} {'PASS' if r.passed else 'FAIL':<6} "
            f"{r.seconds:6.2f}s  [{','.join(r.check.covers)}] {r.detail}"
        )
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)
