"""Command-line entry point: ``cassikit <command> ...``.

Exit codes: 0 success, 1 usage / shape / parameter error, 2 malformed
file, 3 numeric failure or divergence.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .errors import CassiError, ShapeError
from .fileio import (
    atomic_write, history_csv, read_cube, read_mask, read_measurement, sequence_csv,
    singular_values_csv, spectrum_csv, write_cube, write_mask, write_measurement,
)
from .metrics import psnr, ssim
from .runconfig import parse_run_config
from .scenes import synthetic_scene
from .sensing import CodedAperture, SensingOperator, simulate_measurement
from .solver import run, run_hqs
from .ssm import ScanDirection, inverse_sequence, sequence_from_direction
from .tensor import mode_singular_values


class UsageError(CassiError):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _cmd_simulate(a):
    cube, mask = read_cube(a.cube), read_mask(a.mask)
    op = SensingOperator(mask, a.step, cube.channels)
    write_measurement(a.out, simulate_measurement(op, cube, a.sigma, a.seed))
    return 0


def _channels_from_geometry(meas_h, mask_h, step, channels):
    if step == 0:
        if channels is None:
            raise UsageError("--channels is required when the dispersion step is 0")
        if meas_h != mask_h:
            raise ShapeError(f"measurement height {meas_h} != mask height {mask_h} with step 0")
        return channels
    extra = meas_h - mask_h
    if extra < 0 or extra % step:
        raise ShapeError(f"measurement height {meas_h} is not mask height {mask_h} + step * (C - 1)")
    derived = extra // step + 1
    if channels is not None and channels != derived:
        raise ShapeError(f"--channels {channels} disagrees with geometry ({derived})")
    return derived


def _cmd_reconstruct(a):
    y, mask = read_measurement(a.meas), read_mask(a.mask)
    with open(a.config, encoding="utf-8") as fh:
        cfg = parse_run_config(fh.read())
    if y.width != mask.width:
        raise ShapeError(f"measurement width {y.width} != mask width {mask.width}")
    C = _channels_from_geometry(y.height, mask.height, cfg.step, a.channels)
    op = SensingOperator(mask, cfg.step, C)
    prox = cfg.make_prox(op.cube_dims)
    solver = run_hqs if cfg.beta_mode == "zero" else run
    x, state = solver(cfg.solver_config(), op, y, prox)
    write_cube(a.out, x)
    if a.history:
        atomic_write(a.history, history_csv(state.residual_history))
    stage, fid, rel = state.residual_history[-1]
    print(f"stages {stage}  fidelity {fid:.6g}  rel_change {rel:.3g}")
    return 0


def _cmd_selfcheck(a):
    from .selfcheck import format_table, run_all
    results = run_all(seed=a.seed, suites=a.suite or None)
    print(format_table(results))
    return 0 if results and all(r.passed for r in results) else 1


def _cmd_scan(a):
    cube = read_cube(a.cube)
    seq = sequence_from_direction(cube, ScanDirection(a.mode, a.path))
    atomic_write(a.out, sequence_csv(seq))
    ok = np.array_equal(inverse_sequence(seq).data, cube.data)
    print(f"direction {seq.direction}  tokens {seq.length}  width {seq.feature_dim}  "
          f"inverse {'bit-exact' if ok else 'MISMATCH'}")
    return 0 if ok else 3


def _cmd_modes_svd(a):
    cube = read_cube(a.cube)
    atomic_write(a.out, singular_values_csv({k: mode_singular_values(cube, k) for k in (1, 2, 3)}))
    return 0


def _cmd_metrics(a):
    ref, test = read_cube(a.ref), read_cube(a.test)
    p = psnr(ref, test, a.peak)
    print(f"PSNR {'inf' if math.isinf(p) else f'{p:.6f}'} dB")
    print(f"SSIM {ssim(ref, test, a.peak):.6f}")
    return 0


def _cmd_scene(a):
    write_cube(a.out, synthetic_scene(a.width, a.height, a.channels, a.seed, a.objects))
    return 0


def _cmd_mask(a):
    write_mask(a.out, CodedAperture.random_binary(a.width, a.height, a.density, a.seed))
    return 0


def _cmd_spectrum(a):
    cube = read_cube(a.cube)
    if not (0 <= a.col < cube.width and 0 <= a.row < cube.height):
        raise ShapeError(f"pixel ({a.col}, {a.row}) outside {cube.width}x{cube.height}")
    atomic_write(a.out, spectrum_csv(cube, a.col, a.row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cassikit", description="CASSI simulation and reconstruction toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="encode a cube into a noisy snapshot")
    s.add_argument("--cube", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--step", type=int, default=2)
    s.add_argument("--sigma", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_simulate)

    s = sub.add_parser("reconstruct", help="recover a cube from a snapshot")
    s.add_argument("--meas", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--history", help="convergence CSV (stage,fidelity,rel_change)")
    s.add_argument("--channels", type=int, help="band count; only needed when step is 0")
    s.set_defaults(fn=_cmd_reconstruct)

    s = sub.add_parser("selfcheck", help="run the verification suites")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--suite", action="append",
                   choices=("tensor", "operator", "solver", "scan", "neural", "priors", "io"))
    s.set_defaults(fn=_cmd_selfcheck)

    s = sub.add_parser("scan", help="serialize a cube along one scan direction")
    s.add_argument("--cube", required=True)
    s.add_argument("--mode", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--path", type=int, choices=(0, 1, 2, 3), required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_scan)

    s = sub.add_parser("modes-svd", help="per-mode singular values as CSV")
    s.add_argument("--cube", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_modes_svd)

    s = sub.add_parser("metrics", help="PSNR and SSIM between two cubes")
    s.add_argument("--ref", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--peak", type=float, default=1.0)
    s.set_defaults(fn=_cmd_metrics)

    s = sub.add_parser("scene", help="write the synthetic test scene")
    s.add_argument("--width", type=int, default=32)
    s.add_argument("--height", type=int, default=32)
    s.add_argument("--channels", type=int, default=8)
    s.add_argument("--objects", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_scene)

    s = sub.add_parser("mask", help="write a random binary coded aperture")
    s.add_argument("--width", type=int, default=32)
    s.add_argument("--height", type=int, default=32)
    s.add_argument("--density", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_mask)

    s = sub.add_parser("spectrum", help="spectral curve of one pixel as CSV")
    s.add_argument("--cube", required=True)
    s.add_argument("--col", type=int, required=True, help="w index")
    s.add_argument("--row", type=int, required=True, help="h index")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_spectrum)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except CassiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
