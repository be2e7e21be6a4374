"""TOML run configuration: schema, validation, and override handling.

One config format serves every subcommand; each subcommand requires its own
section.  Unknown sections or keys are rejected at load time with a message
naming the offending field, and all physical parameters are validated
against the module preconditions before any computation starts.
"""
from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np

from .eulerian import StepPlan
from .phase_space import CutoffSpec, DistributionField, GridSpec, WeightedNormSpec

__all__ = [
    "ConfigError",
    "load_config",
    "apply_overrides",
    "validate_config",
    "build_grid",
    "build_plan",
    "build_initial",
    "SCHEMA",
]


class ConfigError(Exception):
    """Invalid configuration; the message names the field."""


# section -> key -> (type, default); None default means required when the
# section is used
SCHEMA = {
    "grid": {
        "d": (int, 1),
        "N_x": (int, 32),
        "N_v": (int, 64),
        "V_max": (float, 6.0),
        "dealias_fraction": (float, 2.0 / 3.0),
    },
    "noise": {
        "enabled": (bool, True),
        "seed": (int, 0),
        "max_wavenumber": (int, 2),
        "coloring": (str, "power"),
        "coloring_param": (float, 6.0),
        "regularity_target": (int, 4),
        "amplitude": (float, 1.0),
    },
    "solver": {
        "dt": (float, 0.01),
        "n_steps": (int, 100),
        "nu": (float, 0.0),
        "R": (float, 100.0),
        "s0": (int, 2),
        "m0": (int, 2),
        "mollifier_epsilon": (float, 0.0),
        "field_mode": (str, "self_consistent"),
        "splitting_order": (str, "strang"),
        "initial": (str, "perturbed_maxwellian"),
        "perturbation": (float, 0.01),
        "perturbation_mode": (int, 1),
    },
    "picard": {
        "j_max": (int, 5),
        "R": (float, 100.0),
        "epsilon": (float, 0.0),
        "T": (float, 0.25),
        "dt": (float, 0.0125),
        "nu": (float, 0.0),
        "delta": (float, 1.0 / 12.0),
        "backend": (str, "eulerian"),
    },
    "hypo": {
        "epsilon": (float, 0.5),
        "nu": (float, 0.5),
        "t_min": (float, 1.0e-3),
        "t_max": (float, 1.0e-1),
        "n_samples": (int, 12),
        "steps_per_interval": (int, 6),
        "seed": (int, 7),
        "k_min": (float, 1.0),
        "k_max": (float, 1.0e5),
        "n_modes": (int, 160),
        "N_v": (int, 512),
        "V_max": (float, 4.0),
    },
    "ensemble": {
        "realizations": (int, 8),
        "base_seed": (int, 0),
        "cadence": (int, 1),
        "stopping_levels": (list, [1.0, 2.0, 4.0, 8.0]),
    },
    "output": {
        "dir": (str, "out"),
        "prefix": (str, "run"),
        "snapshot_steps": (list, []),
    },
    "convergence": {
        "dt_levels": (int, 4),
        "t_final": (float, 0.5),
    },
}

_TYPE_COERCE = {float: (int, float), int: (int,), str: (str,), bool: (bool,), list: (list,)}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return validate_config(doc)


def validate_config(doc: dict) -> dict:
    out = {}
    for section, table in doc.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        known = SCHEMA[section]
        merged = {}
        for key, value in table.items():
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            want, _ = known[key]
            if want is bool and not isinstance(value, bool):
                raise ConfigError(f"{section}.{key}: expected boolean")
            if not isinstance(value, _TYPE_COERCE[want]) or (
                want is not bool and isinstance(value, bool)
            ):
                raise ConfigError(
                    f"{section}.{key}: expected {want.__name__}, got {type(value).__name__}"
                )
            merged[key] = want(value) if want in (int, float) else value
        for key, (want, default) in known.items():
            merged.setdefault(key, default)
        out[section] = merged
    # fill untouched sections with defaults so downstream code can rely on them
    for section, known in SCHEMA.items():
        out.setdefault(section, {k: d for k, (_, d) in known.items()})
    return out


def apply_overrides(doc: dict, overrides: list) -> dict:
    """--override section.key=value entries, parsed with TOML literal rules."""
    doc = {s: dict(t) for s, t in doc.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, _, raw = item.partition("=")
        if key.count(".") != 1:
            raise ConfigError(f"override key {key!r} must be section.key")
        section, name = key.split(".")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw  # bare string
        doc.setdefault(section, {})[name] = value
    return validate_config(doc)


# ----------------------------------------------------------------------
# object builders
# ----------------------------------------------------------------------


def build_grid(doc: dict) -> GridSpec:
    g = doc["grid"]
    try:
        return GridSpec(
            d=g["d"],
            N_x=g["N_x"],
            N_v=g["N_v"],
            V_max=g["V_max"],
            dealias_fraction=g["dealias_fraction"],
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def build_plan(doc: dict) -> StepPlan:
    s = doc["solver"]
    try:
        return StepPlan(
            dt=s["dt"],
            nu=s["nu"],
            cutoff=CutoffSpec(R=s["R"]) if s["R"] > 0 else None,
            norm_spec=WeightedNormSpec(s["s0"], s["m0"]),
            mollifier_epsilon=s["mollifier_epsilon"],
            splitting_order=s["splitting_order"],
            field_mode=s["field_mode"],
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def build_initial(doc: dict, grid: GridSpec) -> DistributionField:
    s = doc["solver"]
    kind = s["initial"]
    v_sq = grid.v_magnitude_sq()
    maxwellian = np.exp(-v_sq / 2.0) / (2.0 * np.pi) ** (grid.d / 2.0)
    if kind == "uniform":
        values = np.broadcast_to(
            maxwellian.reshape((1,) * grid.d + (grid.N_v,) * grid.d), grid.shape
        ).copy()
    elif kind in ("maxwellian", "perturbed_maxwellian"):
        amp = s["perturbation"] if kind == "perturbed_maxwellian" else 0.0
        mode = s["perturbation_mode"]
        pert = np.ones((grid.N_x,) * grid.d)
        for j in range(grid.d):
            shape = [1] * grid.d
            shape[j] = grid.N_x
            pert = pert * (1.0 + amp * np.cos(mode * grid.x)).reshape(shape)
        values = pert.reshape(pert.shape + (1,) * grid.d) * maxwellian.reshape(
            (1,) * grid.d + (grid.N_v,) * grid.d
        )
    else:
        raise ConfigError(f"solver.initial: unknown kind {kind!r}")
    return DistributionField(grid, values)
