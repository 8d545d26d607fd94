"""Command-line driver: precompute, run, validate, moments.

Exit codes: 0 success, 2 configuration/validation failure, 3 runtime
numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .basis import build_dual_bases
from .cache import load_cache, save_cache
from .coefficients import McConfig, collision_tensor_mc, drift_tensor
from .config import RunConfig, load_config_file, serialize_config
from .errors import (
    CflViolation,
    ConfigError,
    CorruptFile,
    EigenFailure,
    HashMismatch,
    IllConditionedCell,
    KincellError,
    NonFiniteState,
    VersionMismatch,
    ZeroDensity,
)
from .geometry import DomainSpec, build_uniform_partition
from .kinematics import ScatteringModel
from .solver import (
    HomogeneousState,
    SlabState,
    project_maxwellian,
    run_1d,
    run_homogeneous,
    two_beam_state,
)
from . import report as report_mod
from .validate import run_validation

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kincell",
        description="Velocity-cell moment model: precompute coefficient tensors "
                    "and integrate homogeneous or 1D slab problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="INI run configuration")
    common.add_argument("--cache", help="override output.cache")
    common.add_argument("--seed", type=int, help="override mc.seed")
    common.add_argument("--samples", type=int, help="override mc.samples_per_pair")
    common.add_argument("--output-dir", help="override output.directory")
    plots = common.add_mutually_exclusive_group()
    plots.add_argument("--plots", dest="plots", action="store_true", default=None)
    plots.add_argument("--no-plots", dest="plots", action="store_false", default=None)

    sub.add_parser("precompute", parents=[common],
                   help="build partition, dual bases, and coefficient tensors")
    sub.add_parser("run", parents=[common],
                   help="integrate the configured problem from a cache")
    sub.add_parser("validate", parents=[common],
                   help="run the invariant suite against a cache")

    moments = sub.add_parser("moments", help="post-process a raw moment dump to macro fields")
    moments.add_argument("--input", required=True, help="raw state dump CSV")
    moments.add_argument("--output", required=True, help="macro fields CSV to write")
    return parser


def _load_config(args) -> RunConfig:
    cfg = load_config_file(args.config)
    if args.cache is not None:
        cfg.cache_path = args.cache
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.samples_per_pair = args.samples
    if getattr(args, "output_dir", None) is not None:
        cfg.output_dir = args.output_dir
    if args.plots is not None:
        cfg.plots = args.plots
    cfg.validate()
    return cfg


def _model(cfg: RunConfig) -> ScatteringModel:
    return ScatteringModel(kind=cfg.model_kind, rate_constant=cfg.rate_constant,
                           vhs_exponent=cfg.vhs_exponent)


def cmd_precompute(cfg: RunConfig) -> int:
    partition = build_uniform_partition(
        DomainSpec(energy_cap=cfg.energy_cap, n_per_axis=cfg.n_per_axis))
    duals = build_dual_bases(partition)
    drift = drift_tensor(partition, duals)
    tensor = collision_tensor_mc(
        partition, duals, _model(cfg),
        McConfig(seed=cfg.seed, samples_per_pair=cfg.samples_per_pair,
                 target_rel_error=cfg.target_rel_error))
    path = cfg.resolved_cache_path()
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    save_cache(path, partition, duals, drift, tensor)
    max_abs = tensor.max_abs()
    max_se = float(tensor.std_errors.max()) if tensor.n_blocks else 0.0
    print(f"cache written: {path}")
    print(f"cells: {partition.n_cells}  blocks: {tensor.n_blocks}  "
          f"max |b|: {max_abs:.6e}  max std error: {max_se:.6e}")
    if cfg.target_rel_error > 0 and max_abs > 0:
        achieved = max_se / max_abs
        print(f"relative error estimate {achieved:.3e} vs target {cfg.target_rel_error:.3e}")
    return EXIT_OK


def _initial_state(cfg: RunConfig, bundle) -> HomogeneousState:
    if cfg.initial_kind == "maxwellian":
        return project_maxwellian(bundle.partition, cfg.rho, cfg.velocity, cfg.temperature)
    if cfg.initial_kind == "two-beam":
        a, b = cfg.beam_cells
        wa, wb = cfg.beam_weights
        n = bundle.partition.n_cells
        if not (0 <= a < n and 0 <= b < n):
            raise ConfigError(f"initial.beam_cells: indices must be in 0..{n - 1}")
        return two_beam_state(bundle.partition, a, b, wa, wb)
    values = np.zeros((bundle.partition.n_cells, 5))
    try:
        with open(cfg.initial_csv, "r", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                values[int(row[0])] = [float(v) for v in row[1:6]]
    except OSError as exc:
        raise ConfigError(f"initial.csv: {exc}") from exc
    return HomogeneousState(values=values, partition_hash=bundle.partition.content_hash)


def cmd_run(cfg: RunConfig) -> int:
    path = cfg.resolved_cache_path()
    try:
        bundle = load_cache(path)
    except FileNotFoundError as exc:
        raise CorruptFile(f"cache {path} not found; run `kincell precompute` first") from exc
    expected = build_uniform_partition(
        DomainSpec(energy_cap=cfg.energy_cap, n_per_axis=cfg.n_per_axis))
    if bundle.partition.content_hash != expected.content_hash:
        raise HashMismatch(
            "cache partition does not match [domain] settings; re-run `kincell precompute`")
    return _run_body(cfg, bundle)


def _run_body(cfg: RunConfig, bundle) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    prefix = os.path.join(cfg.output_dir, cfg.prefix)
    initial = _initial_state(cfg, bundle)
    if cfg.run_kind == "homogeneous":
        series = run_homogeneous(initial, bundle.collision, cfg.dt, cfg.steps,
                                 cfg.output_every)
        report_mod.write_homogeneous_csv(f"{prefix}_macro.csv", series)
        if cfg.dump_state:
            report_mod.write_state_dump(f"{prefix}_state.csv", series)
        if cfg.plots:
            report_mod.render_homogeneous_figures(series, cfg.output_dir, cfg.prefix)
    else:
        field = np.tile(initial.values[None, :, :], (cfg.grid_cells, 1, 1))
        state = SlabState(values=field, dx=cfg.dx, boundary=cfg.boundary,
                          partition_hash=bundle.partition.content_hash)
        series = run_1d(state, bundle.partition, bundle.drift, bundle.collision,
                        cfg.dt, cfg.steps, cfg.output_every, axis=cfg.axis,
                        cfl=cfg.cfl, cfl_strict=cfg.cfl_strict)
        report_mod.write_slab_csv(f"{prefix}_macro.csv", series, cfg.dx)
        if cfg.dump_state:
            report_mod.write_state_dump(f"{prefix}_state.csv", series, dx=cfg.dx)
        if cfg.plots:
            report_mod.render_slab_figures(series, cfg.dx, cfg.output_dir, cfg.prefix)
    report_mod.write_conservation_report(f"{prefix}_conservation.json", series.conservation)
    print(f"outputs written under {prefix}_*")
    print(f"worst normalized invariant drift: {series.conservation.worst():.3e}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    bundle = load_cache(cfg.resolved_cache_path())
    report = run_validation(bundle)
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_moments(args) -> int:
    report_mod.macro_csv_from_dump(args.input, args.output)
    print(f"macro fields written: {args.output}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "moments":
            return cmd_moments(args)
        cfg = _load_config(args)
        if args.command == "precompute":
            return cmd_precompute(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        return cmd_run(cfg)
    except (ConfigError, HashMismatch, CflViolation, IllConditionedCell) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonFiniteState, EigenFailure, ZeroDensity) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorruptFile, VersionMismatch, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except KincellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
