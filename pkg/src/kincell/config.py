"""Run configuration: a flat INI file with one section per concern.

Sections and keys mirror the CLI flags; parse -> serialize -> parse is
idempotent so configs stay diffable.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["RunConfig", "parse_config", "serialize_config", "load_config_file"]

_BOUNDARIES = ("periodic", "copy")
_RUN_KINDS = ("homogeneous", "slab1d")
_INITIAL_KINDS = ("maxwellian", "two-beam", "csv")
_MODEL_KINDS = ("hard-sphere", "vhs")

CACHE_DIR_ENV = "KINCELL_CACHE_DIR"


@dataclass
class RunConfig:
    # [domain]
    energy_cap: float = 9.0
    n_per_axis: int = 2
    # [model]
    model_kind: str = "hard-sphere"
    rate_constant: float = 1.0
    vhs_exponent: float = 1.0
    # [mc]
    seed: int = 0
    samples_per_pair: int = 10000
    target_rel_error: float = 0.0
    # [run]
    run_kind: str = "homogeneous"
    dt: float = 1e-3
    steps: int = 100
    output_every: int = 10
    cfl: float = 0.9
    cfl_strict: bool = True
    # [initial]
    initial_kind: str = "maxwellian"
    rho: float = 1.0
    velocity: tuple = (0.0, 0.0, 0.0)
    temperature: float = 1.0
    beam_cells: tuple = (0, 0)
    beam_weights: tuple = (1.0, 1.0)
    initial_csv: str = ""
    # [grid]
    grid_cells: int = 64
    dx: float = 0.015625
    boundary: str = "periodic"
    axis: int = 0
    # [output]
    cache_path: str = "coefficients.kcel"
    output_dir: str = "."
    prefix: str = "run"
    plots: bool = True
    dump_state: bool = False

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        need(self.energy_cap > 0, "domain.energy_cap", f"must be > 0, got {self.energy_cap}")
        need(self.n_per_axis >= 1, "domain.n_per_axis", f"must be >= 1, got {self.n_per_axis}")
        need(self.model_kind in _MODEL_KINDS, "model.kind",
             f"must be one of {_MODEL_KINDS}, got {self.model_kind!r}")
        need(self.rate_constant > 0, "model.rate_constant", "must be > 0")
        need(0.0 <= self.vhs_exponent <= 1.0, "model.vhs_exponent", "must be in [0, 1]")
        need(self.samples_per_pair >= 1, "mc.samples_per_pair", "must be >= 1")
        need(self.run_kind in _RUN_KINDS, "run.kind",
             f"must be one of {_RUN_KINDS}, got {self.run_kind!r}")
        need(self.dt > 0, "run.dt", f"must be > 0, got {self.dt}")
        need(self.steps >= 0, "run.steps", "must be >= 0")
        need(self.output_every >= 1, "run.output_every", "must be >= 1")
        need(0 < self.cfl <= 1.0, "run.cfl", "must be in (0, 1]")
        need(self.initial_kind in _INITIAL_KINDS, "initial.kind",
             f"must be one of {_INITIAL_KINDS}, got {self.initial_kind!r}")
        if self.initial_kind == "maxwellian":
            need(self.rho > 0, "initial.rho", "must be > 0")
            need(self.temperature > 0, "initial.temperature", "must be > 0")
        if self.initial_kind == "csv":
            need(bool(self.initial_csv), "initial.csv", "path required for csv initial state")
        if self.run_kind == "slab1d":
            need(self.grid_cells >= 2, "grid.cells", "must be >= 2")
            need(self.dx > 0, "grid.dx", "must be > 0")
            need(self.boundary in _BOUNDARIES, "grid.boundary",
                 f"must be one of {_BOUNDARIES}, got {self.boundary!r}")
            need(self.axis in (0, 1, 2), "grid.axis", "must be 0, 1, or 2")
        need(bool(self.cache_path), "output.cache", "cache path required")
        return self

    def resolved_cache_path(self) -> str:
        """Relative cache paths resolve under $KINCELL_CACHE_DIR when set."""
        path = self.cache_path
        base = os.environ.get(CACHE_DIR_ENV)
        if base and not os.path.isabs(path):
            return os.path.join(base, path)
        return path


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    sections = {
        "domain": {"energy_cap": cfg.energy_cap, "n_per_axis": cfg.n_per_axis},
        "model": {"kind": cfg.model_kind, "rate_constant": cfg.rate_constant,
                  "vhs_exponent": cfg.vhs_exponent},
        "mc": {"seed": cfg.seed, "samples_per_pair": cfg.samples_per_pair,
               "target_rel_error": cfg.target_rel_error},
        "run": {"kind": cfg.run_kind, "dt": cfg.dt, "steps": cfg.steps,
                "output_every": cfg.output_every, "cfl": cfg.cfl,
                "cfl_strict": cfg.cfl_strict},
        "initial": {"kind": cfg.initial_kind, "rho": cfg.rho,
                    "velocity": cfg.velocity, "temperature": cfg.temperature,
                    "beam_cells": cfg.beam_cells, "beam_weights": cfg.beam_weights,
                    "csv": cfg.initial_csv},
        "grid": {"cells": cfg.grid_cells, "dx": cfg.dx, "boundary": cfg.boundary,
                 "axis": cfg.axis},
        "output": {"cache": cfg.cache_path, "directory": cfg.output_dir,
                   "prefix": cfg.prefix, "plots": cfg.plots,
                   "dump_state": cfg.dump_state},
    }
    out = io.StringIO()
    for name, keys in sections.items():
        out.write(f"[{name}]\n")
        for key, value in keys.items():
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")
    return out.getvalue()


def _get(parser, section, key, cast, default, errors):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, TypeError):
        errors.append(f"{section}.{key}: cannot parse {raw!r}")
        return default


def _boolean(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(raw)


def _floats(raw: str) -> tuple:
    return tuple(float(v) for v in raw.split())


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.split())


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    errors: list = []
    cfg = RunConfig(
        energy_cap=_get(parser, "domain", "energy_cap", float, 9.0, errors),
        n_per_axis=_get(parser, "domain", "n_per_axis", int, 2, errors),
        model_kind=_get(parser, "model", "kind", str, "hard-sphere", errors),
        rate_constant=_get(parser, "model", "rate_constant", float, 1.0, errors),
        vhs_exponent=_get(parser, "model", "vhs_exponent", float, 1.0, errors),
        seed=_get(parser, "mc", "seed", int, 0, errors),
        samples_per_pair=_get(parser, "mc", "samples_per_pair", int, 10000, errors),
        target_rel_error=_get(parser, "mc", "target_rel_error", float, 0.0, errors),
        run_kind=_get(parser, "run", "kind", str, "homogeneous", errors),
        dt=_get(parser, "run", "dt", float, 1e-3, errors),
        steps=_get(parser, "run", "steps", int, 100, errors),
        output_every=_get(parser, "run", "output_every", int, 10, errors),
        cfl=_get(parser, "run", "cfl", float, 0.9, errors),
        cfl_strict=_get(parser, "run", "cfl_strict", _boolean, True, errors),
        initial_kind=_get(parser, "initial", "kind", str, "maxwellian", errors),
        rho=_get(parser, "initial", "rho", float, 1.0, errors),
        velocity=_get(parser, "initial", "velocity", _floats, (0.0, 0.0, 0.0), errors),
        temperature=_get(parser, "initial", "temperature", float, 1.0, errors),
        beam_cells=_get(parser, "initial", "beam_cells", _ints, (0, 0), errors),
        beam_weights=_get(parser, "initial", "beam_weights", _floats, (1.0, 1.0), errors),
        initial_csv=_get(parser, "initial", "csv", str, "", errors),
        grid_cells=_get(parser, "grid", "cells", int, 64, errors),
        dx=_get(parser, "grid", "dx", float, 0.015625, errors),
        boundary=_get(parser, "grid", "boundary", str, "periodic", errors),
        axis=_get(parser, "grid", "axis", int, 0, errors),
        cache_path=_get(parser, "output", "cache", str, "coefficients.kcel", errors),
        output_dir=_get(parser, "output", "directory", str, ".", errors),
        prefix=_get(parser, "output", "prefix", str, "run", errors),
        plots=_get(parser, "output", "plots", _boolean, True, errors),
        dump_state=_get(parser, "output", "dump_state", _boolean, False, errors),
    )
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def load_config_file(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    return parse_config(text)
