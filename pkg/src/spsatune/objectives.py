"""Objective adapters behind a single ``evaluate(config, rng)`` contract.

Lower values are better everywhere.  Three adapters are provided: analytic
synthetics (optionally with additive Gaussian noise), an external process
whose wall-clock time or last stdout line is the measurement, and the
MapReduce cost simulator.
"""

from __future__ import annotations

import logging
import math
import os
import re
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, DomainError, TemplateError
from .space import ParameterSpace, SystemConfig, normalize
from .synthetics import Synthetic, get_synthetic

logger = logging.getLogger(__name__)

OK, FAILED, TIMEOUT = "ok", "failed", "timeout"
VALUE_SOURCES = ("wall_clock_seconds", "stdout_last_line")

_PLACEHOLDER = re.compile(r"\{([^{}]*)\}")


@dataclass(frozen=True)
class ObjectiveSample:
    config: SystemConfig
    value: float
    duration: float
    status: str = OK
    attempt: int = 1
    message: str = ""

    def __post_init__(self):
        if self.status == OK and not math.isfinite(self.value):
            raise DomainError("an ok sample must carry a finite value")


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    noise_sigma: float = 0.0
    function: str = "quadratic"
    function_params: dict[str, Any] = field(default_factory=dict)
    command_template: str = ""
    value_source: str = "wall_clock_seconds"
    timeout_seconds: float = 60.0
    negate: bool = False
    export_env: bool = True
    reentrant_safe: bool | None = None
    profile: dict[str, Any] | None = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "process", "mrsim"):
            raise ConfigError("objective.kind", f"unknown kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise ConfigError("objective.noise_sigma", "must be nonnegative")
        if self.kind == "process":
            if not self.command_template.strip():
                raise ConfigError("objective.command_template", "required for process objectives")
            if self.value_source not in VALUE_SOURCES:
                raise ConfigError("objective.value_source", f"must be one of {VALUE_SOURCES}")
            if not self.timeout_seconds > 0:
                raise ConfigError("objective.timeout_seconds", "must be positive")

    def validate(self, space: ParameterSpace) -> None:
        if self.kind == "process":
            try:
                check_template(self.command_template, space)
            except TemplateError as exc:
                raise ConfigError("objective.command_template", str(exc)) from None
        elif self.kind == "synthetic":
            try:
                get_synthetic(self.function, **self.function_params)
            except (LookupError, TypeError) as exc:
                raise ConfigError("objective.function", str(exc)) from None


class Objective:
    """Base adapter.  Subclasses implement :meth:`_measure`."""

    reentrant_safe = True

    def __init__(self):
        self._lock = threading.Lock()
        self.calls = 0

    def evaluate(self, config: SystemConfig, rng: np.random.Generator | None = None) -> ObjectiveSample:
        with self._lock:
            self.calls += 1
        return self._measure(config, rng)

    def _measure(self, config, rng) -> ObjectiveSample:
        raise NotImplementedError


class FunctionObjective(Objective):
    """Wrap ``fn(config) -> float``; exceptions become failed samples."""

    def __init__(self, fn: Callable[[SystemConfig], float], reentrant_safe: bool = True):
        super().__init__()
        self.fn = fn
        self.reentrant_safe = reentrant_safe

    def _measure(self, config, rng):
        start = time.monotonic()
        try:
            value = float(self.fn(config))
        except Exception as exc:  # noqa: BLE001 - any user failure is a failed sample
            return ObjectiveSample(config, math.nan, time.monotonic() - start, FAILED, message=repr(exc))
        if not math.isfinite(value):
            return ObjectiveSample(config, value, time.monotonic() - start, FAILED, message="non-finite value")
        return ObjectiveSample(config, value, time.monotonic() - start)


class SyntheticObjective(Objective):
    """Analytic function of the normalized coordinates plus N(0, sigma^2) noise."""

    def __init__(self, synthetic: Synthetic, space: ParameterSpace, noise_sigma: float = 0.0):
        super().__init__()
        self.synthetic = synthetic
        self.space = space
        self.noise_sigma = float(noise_sigma)

    def _measure(self, config, rng):
        start = time.monotonic()
        value = self.synthetic.value(normalize(config, self.space))
        if self.noise_sigma > 0:
            if rng is None:
                raise ValueError("a noisy synthetic objective needs an rng")
            value += float(rng.normal(0.0, self.noise_sigma))
        return ObjectiveSample(config, float(value), time.monotonic() - start)


class MRSimObjective(Objective):
    """Total simulated job cost (seconds) from :mod:`spsatune.mrsim`."""

    def __init__(self, profile=None):
        super().__init__()
        from . import mrsim

        self._simulate = mrsim.simulate
        self.profile = profile if profile is not None else mrsim.reference_profile()

    def _measure(self, config, rng):
        start = time.monotonic()
        total = self._simulate(self.profile, config).total
        return ObjectiveSample(config, total, time.monotonic() - start)


def check_template(template: str, space: ParameterSpace) -> list[str]:
    """Split a template and verify its placeholders; returns the raw tokens."""
    try:
        tokens = shlex.split(template, posix=True)
    except ValueError as exc:
        raise TemplateError(f"cannot split command template: {exc}") from None
    if not tokens:
        raise TemplateError("command template is empty")
    names = set(space.names)
    for token in tokens:
        for name in _PLACEHOLDER.findall(token.replace("{{", "").replace("}}", "")):
            if name not in names:
                raise TemplateError(f"unknown placeholder {{{name}}} in command template")
    return tokens


def render_command(template: str, config: SystemConfig, space: ParameterSpace) -> list[str]:
    """Substitute ``{name}`` placeholders with formatted raw values.

    The template is split shell-style (quotes group words) before
    substitution, so values never get re-split and no shell is involved.
    ``{{`` and ``}}`` produce literal braces.
    """
    tokens = check_template(template, space)
    rendered = {spec.name: spec.format_value(value) for spec, value in zip(space.specs, config.values)}

    def sub(token: str) -> str:
        parts = re.split(r"(\{\{|\}\})", token)
        out = []
        for part in parts:
            if part == "{{":
                out.append("{")
            elif part == "}}":
                out.append("}")
            else:
                out.append(_PLACEHOLDER.sub(lambda m: rendered[m.group(1)], part))
        return "".join(out)

    return [sub(t) for t in tokens]


def env_name(param: str) -> str:
    return "SPSA_PARAM_" + re.sub(r"[^0-9A-Za-z]", "_", param).upper()


class ProcessObjective(Objective):
    """Launch an external command per evaluation and measure it.

    No shell is used.  Exit status 0 is required; a deadline overrun kills
    the whole process group and yields a ``timeout`` sample.
    """

    def __init__(self, spec: ObjectiveSpec, space: ParameterSpace):
        super().__init__()
        if spec.kind != "process":
            raise ConfigError("objective.kind", "ProcessObjective needs kind 'process'")
        spec.validate(space)
        self.spec = spec
        self.space = space
        self.reentrant_safe = bool(spec.reentrant_safe)

    def _measure(self, config, rng):
        spec = self.spec
        argv = render_command(spec.command_template, config, self.space)
        env = os.environ.copy()
        if spec.export_env:
            for pspec, value in zip(self.space.specs, config.values):
                env[env_name(pspec.name)] = pspec.format_value(value)
        start = time.monotonic()
        try:
            proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                    text=True, env=env, start_new_session=True)
        except OSError as exc:
            return ObjectiveSample(config, math.nan, time.monotonic() - start, FAILED,
                                   message=f"cannot launch {argv[0]!r}: {exc}")
        try:
            out, err = proc.communicate(timeout=spec.timeout_seconds)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            out, err = proc.communicate()
            duration = time.monotonic() - start
            logger.warning("command timed out after %.3fs: %s", duration, shlex.join(argv))
            return ObjectiveSample(config, math.nan, duration, TIMEOUT,
                                   message=f"exceeded {spec.timeout_seconds}s")
        except BaseException:
            # interrupted while waiting: do not leave the benchmark running
            _kill_group(proc)
            proc.wait()
            raise
        duration = time.monotonic() - start
        if err:
            logger.info("stderr from %s:\n%s", argv[0], err.rstrip())
        if proc.returncode != 0:
            return ObjectiveSample(config, math.nan, duration, FAILED,
                                   message=f"exit status {proc.returncode}")
        if spec.value_source == "wall_clock_seconds":
            value = duration
        else:
            lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
            try:
                value = float(lines[-1])
            except (IndexError, ValueError):
                last = lines[-1] if lines else "<no output>"
                return ObjectiveSample(config, math.nan, duration, FAILED,
                                       message=f"cannot parse last stdout line {last!r}")
            if not math.isfinite(value):
                return ObjectiveSample(config, value, duration, FAILED,
                                       message="last stdout line is not finite")
        if spec.negate:
            value = -value
        return ObjectiveSample(config, value, duration)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def make_objective(spec: ObjectiveSpec, space: ParameterSpace) -> Objective:
    spec.validate(space)
    if spec.kind == "synthetic":
        obj = SyntheticObjective(get_synthetic(spec.function, **spec.function_params), space, spec.noise_sigma)
    elif spec.kind == "process":
        return ProcessObjective(spec, space)
    else:
        from .mrsim import JobProfile, reference_profile

        profile = reference_profile()
        if spec.profile is not None:
            profile = JobProfile.from_dict({**profile.to_dict(), **spec.profile})
        obj = MRSimObjective(profile)
    if spec.reentrant_safe is not None:
        obj.reentrant_safe = spec.reentrant_safe
    return obj


def evaluate(spec: ObjectiveSpec, config: SystemConfig, rng: np.random.Generator | None,
             space: ParameterSpace) -> ObjectiveSample:
    """One-shot measurement of ``config`` under ``spec``."""
    return make_objective(spec, space).evaluate(config, rng)
