"""Run configuration files (TOML).

See ``configs/mrsim_tune.toml`` for a complete annotated example.  Relative
paths inside a config resolve against the directory holding the file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import mrsim
from .errors import ConfigError, DomainError, SpsaError, StructuralError
from .objectives import ObjectiveSpec
from .space import ParameterSpace, ParameterSpec
from .spsa import EngineOptions, FailurePolicy, StepSchedule

_TOP = {"engine", "objective", "parameters", "parameter_overrides", "output"}
_ENGINE = {"seed", "schedule", "replicates", "max_iterations", "grad_tol", "window",
           "checkpoint_every", "failure_policy", "strict_magnitudes", "c_lo", "c_hi", "scale",
           "parallel", "initial_point"}
_OBJECTIVE = {"kind", "noise_sigma", "function", "function_params", "command_template",
              "value_source", "timeout_seconds", "negate", "export_env", "reentrant_safe",
              "profile", "profile_file"}
_OUTPUT = {"trace", "checkpoint", "summary"}


@dataclass
class RunConfig:
    space: ParameterSpace
    objective: ObjectiveSpec
    options: EngineOptions
    initial_point: list[float] | None = None
    trace_path: Path | None = None
    checkpoint_path: Path | None = None
    summary_path: Path | None = None
    source: Path | None = field(default=None, repr=False)


def _check_keys(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}" if where else unknown[0], "unknown key")


def _table(doc: dict, key: str, where: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{where}{key}", "must be a table")
    return value


def load_profile_file(path) -> dict[str, Any]:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return doc.get("profile", doc)


def _space(doc: dict) -> ParameterSpace:
    params = doc.get("parameters")
    if params is None:
        if doc.get("objective", {}).get("kind") != "mrsim":
            raise ConfigError("parameters", "required unless objective.kind is 'mrsim'")
        space = mrsim.default_space()
    else:
        if not isinstance(params, list) or not params:
            raise ConfigError("parameters", "must be a non-empty array of tables")
        specs = []
        for i, item in enumerate(params):
            try:
                specs.append(ParameterSpec.from_dict(item))
            except (SpsaError, TypeError) as exc:
                raise ConfigError(f"parameters[{i}]", str(exc)) from None
        try:
            space = ParameterSpace(specs)
        except StructuralError as exc:
            raise ConfigError("parameters", str(exc)) from None
    for name, changes in _table(doc, "parameter_overrides", "").items():
        if name not in space.names:
            raise ConfigError(f"parameter_overrides.{name}", "no such parameter")
        merged = {**space[name].to_dict(), **changes}
        try:
            space = space.replace(name, ParameterSpec.from_dict(merged))
        except (SpsaError, TypeError) as exc:
            raise ConfigError(f"parameter_overrides.{name}", str(exc)) from None
    return space


def _options(engine: dict, seed_override, max_iterations_override) -> EngineOptions:
    _check_keys(engine, _ENGINE, "engine")
    values = {k: v for k, v in engine.items() if k != "initial_point"}
    if seed_override is not None:
        values["seed"] = seed_override
    if max_iterations_override is not None:
        values["max_iterations"] = max_iterations_override
    if "seed" not in values:
        raise ConfigError("engine.seed", "is required (runs are never seeded from the clock)")
    if not isinstance(values["seed"], int) or isinstance(values["seed"], bool) or values["seed"] < 0:
        raise ConfigError("engine.seed", "must be a nonnegative integer")
    try:
        values["schedule"] = StepSchedule.from_dict(values.get("schedule", {}))
    except (SpsaError, TypeError) as exc:
        raise ConfigError("engine.schedule", str(exc)) from None
    try:
        values["failure_policy"] = FailurePolicy.from_dict(values.get("failure_policy", {}))
    except (SpsaError, TypeError) as exc:
        raise ConfigError("engine.failure_policy", str(exc)) from None
    try:
        return EngineOptions(**values)
    except (DomainError, TypeError) as exc:
        raise ConfigError("engine", str(exc)) from None


def _objective(table: dict, base: Path) -> ObjectiveSpec:
    _check_keys(table, _OBJECTIVE, "objective")
    values = dict(table)
    if "kind" not in values:
        raise ConfigError("objective.kind", "is required")
    profile_file = values.pop("profile_file", None)
    if profile_file is not None:
        try:
            loaded = load_profile_file(base / profile_file)
        except OSError as exc:
            raise ConfigError("objective.profile_file", str(exc)) from None
        values["profile"] = {**loaded, **values.get("profile", {})}
    if values.get("profile") is not None:
        try:
            mrsim.JobProfile.from_dict({**mrsim.reference_profile().to_dict(), **values["profile"]})
        except (DomainError, TypeError) as exc:
            raise ConfigError("objective.profile", str(exc)) from None
    try:
        return ObjectiveSpec(**values)
    except TypeError as exc:
        raise ConfigError("objective", str(exc)) from None


def parse_config(doc: dict, base: Path = Path("."), *, seed_override: int | None = None,
                 max_iterations_override: int | None = None, source: Path | None = None) -> RunConfig:
    _check_keys(doc, _TOP, "")
    engine = _table(doc, "engine", "")
    objective = _objective(_table(doc, "objective", ""), base)
    space = _space(doc)
    objective.validate(space)
    options = _options(engine, seed_override, max_iterations_override)

    initial = engine.get("initial_point")
    if initial is not None:
        if isinstance(initial, dict):
            try:
                values = [initial.get(s.name, s.default) for s in space]
                unknown = set(initial) - set(space.names)
                if unknown:
                    raise ConfigError(f"engine.initial_point.{sorted(unknown)[0]}", "no such parameter")
                cfg = space.config(values)
                space.validate_config(cfg)
                initial = [s.normalize(v) for s, v in zip(space, values)]
            except (DomainError, StructuralError) as exc:
                raise ConfigError("engine.initial_point", str(exc)) from None
        elif not (isinstance(initial, list) and len(initial) == space.n
                  and all(isinstance(x, (int, float)) and 0 <= x <= 1 for x in initial)):
            raise ConfigError("engine.initial_point",
                              f"must be a table of raw values or {space.n} normalized coordinates in [0, 1]")

    output = _table(doc, "output", "")
    _check_keys(output, _OUTPUT, "output")
    paths = {}
    for key in _OUTPUT:
        if key in output:
            p = Path(output[key])
            p = p if p.is_absolute() else base / p
            try:
                p.parent.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError(f"output.{key}", f"cannot create {p.parent}: {exc}") from None
            paths[key] = p
    return RunConfig(space, objective, options,
                     initial_point=[float(x) for x in initial] if initial is not None else None,
                     trace_path=paths.get("trace"),
                     checkpoint_path=paths.get("checkpoint"),
                     summary_path=paths.get("summary"),
                     source=source)


def load_config(path, **overrides) -> RunConfig:
    """Read and validate a TOML run configuration.

    Raises ``OSError`` when the file cannot be read and :class:`ConfigError`
    (naming the offending field and the file) when it is invalid.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from None
    try:
        return parse_config(doc, path.parent, source=path, **overrides)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc.field}", exc.message) from None


def with_options(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, options=replace(cfg.options, **changes))
