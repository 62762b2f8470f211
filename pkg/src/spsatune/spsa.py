"""One-sided SPSA with projection onto the unit cube.

Each iteration measures the objective at the current iterate and at one
randomly perturbed probe per replicate, forms the two-measurement gradient
estimate, averages the replicates and takes a projected step::

    g(i)        = (f(theta + d) - f(theta)) / d(i)
    theta_next  = clip(theta - alpha_n * g / scale, 0, 1)

``d`` has independent random signs and a fixed per-coordinate magnitude.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import rng as rngmod
from .errors import (
    CheckpointWriteError,
    DomainError,
    NumericError,
    ObjectiveAbort,
    StructuralError,
)
from .space import ParameterSpace, SystemConfig, map_default, map_to_system, project

logger = logging.getLogger(__name__)

C_LO = 0.01
C_HI = 0.25


@dataclass(frozen=True)
class Perturbation:
    signed_step: np.ndarray
    magnitudes: np.ndarray

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.signed_step)

    @property
    def n(self) -> int:
        return len(self.magnitudes)


def perturbation_magnitudes(space: ParameterSpace, c_lo: float = C_LO, c_hi: float = C_HI,
                            strict: bool = False) -> np.ndarray:
    """Per-coordinate probe size in normalized units.

    Strict mode uses one raw unit, ``1 / (max - min)``, for every coordinate
    (one bin for booleans and categoricals).  Otherwise the ratio
    ``resolution / (max - min)`` is clamped to ``[c_lo, c_hi]``; integer-valued
    kinds never go below one raw unit so every probe changes the raw value.
    """
    if strict:
        return np.array([s.unit_step for s in space], dtype=float)
    if not 0 < c_lo <= c_hi:
        raise DomainError(f"need 0 < c_lo <= c_hi, got {c_lo}, {c_hi}")
    mags = []
    for spec in space:
        c = min(max(spec.resolution / spec.span, c_lo), c_hi)
        if spec.is_integral:
            c = max(c, spec.unit_step)
        mags.append(c)
    return np.array(mags, dtype=float)


def gen_perturbation(space: ParameterSpace, rng: np.random.Generator, *,
                     c_lo: float = C_LO, c_hi: float = C_HI, strict: bool = False,
                     magnitudes: np.ndarray | None = None) -> Perturbation:
    """Draw symmetric Bernoulli signs and scale them by the space's magnitudes."""
    if magnitudes is None:
        magnitudes = perturbation_magnitudes(space, c_lo, c_hi, strict)
    signs = rng.integers(0, 2, size=space.n) * 2 - 1
    return Perturbation(signs * magnitudes, np.asarray(magnitudes, dtype=float))


@dataclass(frozen=True)
class StepSchedule:
    """Gain sequence.

    ``constant`` keeps ``alpha0`` forever; ``decaying`` uses
    ``alpha0 / (n + 1 + offset) ** decay_exponent`` with the exponent in
    (0.5, 1] so the gains sum to infinity while their squares do not.
    """

    kind: str = "constant"
    alpha0: float = 0.01
    decay_exponent: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "decaying"):
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if not self.alpha0 > 0:
            raise DomainError("alpha0 must be positive")
        if self.kind == "decaying":
            if not 0.5 < self.decay_exponent <= 1.0:
                raise DomainError("decay_exponent must lie in (0.5, 1]")
            if self.offset < 0:
                raise DomainError("offset must be nonnegative")

    def alpha(self, n: int) -> float:
        if self.kind == "constant":
            return self.alpha0
        return self.alpha0 / (n + 1 + self.offset) ** self.decay_exponent

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "constant":
            return {"kind": self.kind, "alpha0": self.alpha0}
        return {"kind": self.kind, "alpha0": self.alpha0,
                "decay_exponent": self.decay_exponent, "offset": self.offset}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StepSchedule":
        return cls(**d)


@dataclass(frozen=True)
class GradientEstimate:
    values: np.ndarray
    f_base: float
    f_perturbed: float
    replicates: int = 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def estimate_gradient(f_base: float, f_perturbed: float, pert: Perturbation) -> GradientEstimate:
    """Two-measurement estimate: one shared numerator over each signed step."""
    if not (math.isfinite(f_base) and math.isfinite(f_perturbed)):
        raise NumericError(f"non-finite measurement: f_base={f_base}, f_perturbed={f_perturbed}")
    values = (f_perturbed - f_base) / pert.signed_step
    return GradientEstimate(values, float(f_base), float(f_perturbed), 1)


def average_gradient(estimates: Sequence[GradientEstimate]) -> GradientEstimate:
    if not estimates:
        raise StructuralError("cannot average an empty list of estimates")
    if len(estimates) == 1:
        return estimates[0]
    dims = {len(e.values) for e in estimates}
    if len(dims) != 1:
        raise StructuralError(f"estimates have mismatched dimensions {sorted(dims)}")
    values = np.mean([e.values for e in estimates], axis=0)
    return GradientEstimate(
        values,
        float(np.mean([e.f_base for e in estimates])),
        float(np.mean([e.f_perturbed for e in estimates])),
        len(estimates),
    )


class Decision(str, enum.Enum):
    CONTINUE = "continue"
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class Limits:
    max_iterations: int = 100
    grad_tol: float | None = None
    window: int = 5

    def tolerance(self, n: int) -> float:
        return self.grad_tol if self.grad_tol is not None else 1e-3 * math.sqrt(n)


@dataclass
class TunerState:
    iteration: int
    theta: np.ndarray
    rng_state: str
    schedule: StepSchedule
    best_theta: np.ndarray
    best_value: float
    seed: int
    window: int = 5
    history: tuple[float, ...] = ()
    eval_count: int = 0
    worst_value: float | None = None
    gain_scale: float | None = 1.0

    def __eq__(self, other):
        if not isinstance(other, TunerState):
            return NotImplemented
        return (self.iteration == other.iteration
                and np.array_equal(self.theta, other.theta)
                and self.rng_state == other.rng_state
                and self.schedule == other.schedule
                and np.array_equal(self.best_theta, other.best_theta)
                and _same_float(self.best_value, other.best_value)
                and self.seed == other.seed
                and self.window == other.window
                and self.history == other.history
                and self.eval_count == other.eval_count
                and _same_float(self.worst_value, other.worst_value)
                and _same_float(self.gain_scale, other.gain_scale))

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "theta": [float(x) for x in self.theta],
            "rng": {"name": rngmod.RNG_NAME, "version": rngmod.RNG_VERSION, "state": self.rng_state},
            "schedule": self.schedule.to_dict(),
            "best_theta": [float(x) for x in self.best_theta],
            "best_value": _float_out(self.best_value),
            "seed": self.seed,
            "window": self.window,
            "history": list(self.history),
            "eval_count": self.eval_count,
            "worst_value": _float_out(self.worst_value),
            "gain_scale": _float_out(self.gain_scale),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TunerState":
        rng = d["rng"]
        if rng["name"] != rngmod.RNG_NAME or rng["version"] != rngmod.RNG_VERSION:
            raise ValueError(f"unsupported rng {rng['name']} v{rng['version']}")
        return cls(
            iteration=int(d["iteration"]),
            theta=np.array(d["theta"], dtype=float),
            rng_state=rng["state"],
            schedule=StepSchedule.from_dict(d["schedule"]),
            best_theta=np.array(d["best_theta"], dtype=float),
            best_value=_float_in(d["best_value"]),
            seed=int(d["seed"]),
            window=int(d["window"]),
            history=tuple(float(x) for x in d["history"]),
            eval_count=int(d["eval_count"]),
            worst_value=_float_in(d["worst_value"]),
            gain_scale=_float_in(d["gain_scale"]),
        )


def _same_float(a, b) -> bool:
    if a is None or b is None:
        return a is b
    return a == b or (math.isnan(a) and math.isnan(b))


def _float_out(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _float_in(x):
    if x is None:
        return None
    return float(x)


def spsa_step(state: TunerState, grad: GradientEstimate, alpha: float | None = None) -> TunerState:
    """Projected descent step plus bookkeeping (history, best-so-far, counters)."""
    if len(grad.values) != len(state.theta):
        raise StructuralError(f"gradient has dimension {len(grad.values)}, state has {len(state.theta)}")
    if alpha is None:
        alpha = state.schedule.alpha(state.iteration)
    scale = state.gain_scale or 1.0
    theta = project(state.theta - alpha * grad.values / scale)
    history = (state.history + (grad.norm / scale,))[-state.window:]
    best_theta, best_value = state.best_theta, state.best_value
    if grad.f_base < best_value:
        best_theta, best_value = state.theta.copy(), grad.f_base
    return replace(
        state,
        iteration=state.iteration + 1,
        theta=theta,
        history=history,
        best_theta=best_theta,
        best_value=best_value,
        eval_count=state.eval_count + 2 * grad.replicates,
    )


def should_terminate(state: TunerState, limits: Limits) -> Decision:
    if state.iteration >= limits.max_iterations:
        return Decision.BUDGET_EXHAUSTED
    window = limits.window
    if len(state.history) >= window:
        recent = state.history[-window:]
        if max(recent) - min(recent) < limits.tolerance(len(state.theta)):
            return Decision.CONVERGED
    return Decision.CONTINUE


def finite_difference_oracle(f: Callable[[np.ndarray], float], theta, h: float) -> np.ndarray:
    """Forward differences along each axis; ``n + 1`` evaluations of ``f``."""
    theta = np.asarray(theta, dtype=float)
    if not h > 0:
        raise DomainError("step h must be positive")
    if np.any(theta < 0) or np.any(theta + h > 1):
        raise DomainError("theta + h * e_i must stay inside [0, 1]^n for every i")
    f0 = f(theta)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        shifted = theta.copy()
        shifted[i] += h
        grad[i] = (f(shifted) - f0) / h
    return grad


# --------------------------------------------------------------------------
# run loop


@dataclass(frozen=True)
class FailurePolicy:
    """What to do when an evaluation does not come back ``ok``.

    Each evaluation is retried ``retries`` times.  If it still fails the
    policy either aborts the run or substitutes a penalty: the fixed
    ``penalty`` when given, else the worst value seen so far pushed out by
    ``penalty_factor`` (``worst + (factor - 1) * |worst|``).
    """

    retries: int = 2
    on_failure: str = "penalty"
    penalty: float | None = None
    penalty_factor: float = 1.5

    def __post_init__(self):
        if self.retries < 0:
            raise DomainError("retries must be nonnegative")
        if self.on_failure not in ("penalty", "abort"):
            raise DomainError(f"on_failure must be 'penalty' or 'abort', got {self.on_failure!r}")

    def penalty_value(self, worst: float | None) -> float | None:
        if self.penalty is not None:
            return float(self.penalty)
        if worst is None:
            return None
        return worst + (self.penalty_factor - 1.0) * abs(worst)

    def to_dict(self) -> dict[str, Any]:
        return {"retries": self.retries, "on_failure": self.on_failure,
                "penalty": self.penalty, "penalty_factor": self.penalty_factor}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FailurePolicy":
        return cls(**d)


@dataclass(frozen=True)
class EngineOptions:
    seed: int
    schedule: StepSchedule = field(default_factory=StepSchedule)
    replicates: int = 1
    max_iterations: int = 100
    grad_tol: float | None = None
    window: int = 5
    checkpoint_every: int = 0
    failure_policy: FailurePolicy = field(default_factory=FailurePolicy)
    strict_magnitudes: bool = False
    c_lo: float = C_LO
    c_hi: float = C_HI
    # "initial" divides the gradient by |f(theta_0)|, "current" by |f(theta_n)|;
    # both make alpha unit-free
    scale: float | str = 1.0
    parallel: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be at least 1")
        if self.max_iterations < 0:
            raise DomainError("max_iterations must be nonnegative")
        if self.window < 1:
            raise DomainError("window must be at least 1")
        if self.checkpoint_every < 0:
            raise DomainError("checkpoint_every must be nonnegative")
        if isinstance(self.scale, str):
            if self.scale not in ("initial", "current"):
                raise DomainError(f"scale must be a positive number, 'initial' or 'current', got {self.scale!r}")
        elif not self.scale > 0:
            raise DomainError("scale must be positive")

    @property
    def limits(self) -> Limits:
        return Limits(self.max_iterations, self.grad_tol, self.window)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "schedule": self.schedule.to_dict(),
            "replicates": self.replicates,
            "max_iterations": self.max_iterations,
            "grad_tol": self.grad_tol,
            "window": self.window,
            "checkpoint_every": self.checkpoint_every,
            "failure_policy": self.failure_policy.to_dict(),
            "strict_magnitudes": self.strict_magnitudes,
            "c_lo": self.c_lo,
            "c_hi": self.c_hi,
            "scale": self.scale,
            "parallel": self.parallel,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EngineOptions":
        d = dict(d)
        d["schedule"] = StepSchedule.from_dict(d.get("schedule", {}))
        d["failure_policy"] = FailurePolicy.from_dict(d.get("failure_policy", {}))
        return cls(**d)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: list[float]
    system_config: dict[str, Any]
    f_base: float
    f_perturbed: list[float]
    grad_norm: float
    alpha: float
    eval_count_cumulative: int
    best_value_so_far: float
    wall_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "theta": self.theta,
            "system_config": self.system_config,
            "f_base": self.f_base,
            "f_perturbed": self.f_perturbed,
            "grad_norm": self.grad_norm,
            "alpha": self.alpha,
            "eval_count_cumulative": self.eval_count_cumulative,
            "best_value_so_far": self.best_value_so_far,
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "IterationRecord":
        return cls(**d)


@dataclass
class RunResult:
    state: TunerState
    trace: list[IterationRecord]
    status: Decision
    space: ParameterSpace

    @property
    def final_theta(self) -> np.ndarray:
        return self.state.theta

    @property
    def final_config(self) -> SystemConfig:
        return map_to_system(self.state.theta, self.space)

    @property
    def best_config(self) -> SystemConfig:
        return map_to_system(self.state.best_theta, self.space)


def init_state(space: ParameterSpace, options: EngineOptions, theta0=None) -> TunerState:
    """Fresh state at ``theta0``, or at the space's defaults when omitted."""
    theta = map_default(space) if theta0 is None else np.asarray(theta0, dtype=float)
    if theta.shape != (space.n,):
        raise StructuralError(f"initial point must have dimension {space.n}")
    theta = project(theta)
    return TunerState(
        iteration=0,
        theta=theta,
        rng_state=rngmod.dump_state(rngmod.make_rng(options.seed)),
        schedule=options.schedule,
        best_theta=theta.copy(),
        best_value=math.inf,
        seed=int(options.seed),
        window=options.window,
        gain_scale=None if isinstance(options.scale, str) else float(options.scale),
    )


def _evaluate_with_retries(objective, config, policy: FailurePolicy, seed: int, path: tuple):
    sample = None
    for attempt in range(1, policy.retries + 2):
        sample = objective.evaluate(config, rngmod.child_rng(seed, *path, attempt))
        sample = replace(sample, attempt=attempt)
        if sample.status == "ok":
            return sample
        logger.warning("evaluation %s attempt %d: %s", path, attempt, sample.status)
    return sample


def run(space: ParameterSpace, objective, options: EngineOptions, *,
        state: TunerState | None = None, theta0=None,
        sink: Callable[[IterationRecord], None] | None = None,
        checkpoint: Callable[[TunerState], None] | None = None) -> RunResult:
    """Run the tuning loop until the budget is spent or the gradient settles.

    ``objective`` needs ``evaluate(config, rng) -> ObjectiveSample`` and a
    ``reentrant_safe`` flag.  ``sink`` receives every trace row as soon as
    the iteration completes; ``checkpoint`` is called with the state every
    ``options.checkpoint_every`` iterations, on completion, and (best
    effort) when the run is interrupted.
    """
    if state is None:
        state = init_state(space, options, theta0)
    elif len(state.theta) != space.n:
        raise StructuralError("state dimension does not match the parameter space")
    limits = options.limits
    policy = options.failure_policy
    mags = perturbation_magnitudes(space, options.c_lo, options.c_hi, options.strict_magnitudes)
    K = options.replicates
    parallel = options.parallel and getattr(objective, "reentrant_safe", False)
    pool = ThreadPoolExecutor(max_workers=2 * K) if parallel and 2 * K > 1 else None
    trace: list[IterationRecord] = []

    def _save(st):
        if checkpoint is None:
            return
        try:
            checkpoint(st)
        except OSError as exc:
            raise CheckpointWriteError(f"checkpoint write failed: {exc}", st) from exc

    try:
        while (decision := should_terminate(state, limits)) is Decision.CONTINUE:
            started = time.perf_counter()
            n = state.iteration
            gen = rngmod.load_state(state.rng_state)
            perts = [gen_perturbation(space, gen, magnitudes=mags) for _ in range(K)]
            base_cfg = map_to_system(state.theta, space)
            jobs = []
            for k, pert in enumerate(perts):
                probe = map_to_system(project(state.theta + pert.signed_step), space)
                jobs.append((base_cfg, (n, k, 0)))
                jobs.append((probe, (n, k, 1)))
            if pool is not None:
                futures = [pool.submit(_evaluate_with_retries, objective, cfg, policy, state.seed, path)
                           for cfg, path in jobs]
                samples = [f.result() for f in futures]
            else:
                samples = [_evaluate_with_retries(objective, cfg, policy, state.seed, path)
                           for cfg, path in jobs]

            worst = state.worst_value
            values = []
            for (cfg, path), sample in zip(jobs, samples):
                if sample.status == "ok":
                    value = float(sample.value)
                    worst = value if worst is None else max(worst, value)
                else:
                    value = policy.penalty_value(worst) if policy.on_failure == "penalty" else None
                    if value is None:
                        raise ObjectiveAbort(
                            f"evaluation at iteration {n + 1} failed with status {sample.status!r}"
                            f" after {sample.attempt} attempt(s)", state)
                    logger.warning("substituting penalty %g for failed evaluation %s", value, path)
                values.append(value)

            f_bases = values[0::2]
            f_perts = values[1::2]
            estimates = [estimate_gradient(fb, fp, p) for fb, fp, p in zip(f_bases, f_perts, perts)]
            grad = average_gradient(estimates)
            current = state
            if current.gain_scale is None or options.scale == "current":
                current = replace(current, gain_scale=abs(grad.f_base) or 1.0)
            alpha = current.schedule.alpha(n)
            new_state = spsa_step(current, grad, alpha)
            new_state = replace(new_state, rng_state=rngmod.dump_state(gen), worst_value=worst)

            record = IterationRecord(
                iteration=new_state.iteration,
                theta=[float(x) for x in state.theta],
                system_config=_jsonable(base_cfg),
                f_base=grad.f_base,
                f_perturbed=[float(v) for v in f_perts],
                grad_norm=grad.norm / new_state.gain_scale,
                alpha=float(alpha),
                eval_count_cumulative=new_state.eval_count,
                best_value_so_far=float(new_state.best_value),
                wall_ms=round((time.perf_counter() - started) * 1000.0, 3),
            )
            state = new_state
            trace.append(record)
            if sink is not None:
                sink(record)
            if options.checkpoint_every and state.iteration % options.checkpoint_every == 0:
                _save(state)
            logger.debug("iteration %d f_base=%.6g |g|=%.4g", state.iteration, grad.f_base, record.grad_norm)
    except KeyboardInterrupt:
        if checkpoint is not None:
            try:
                checkpoint(state)
            except OSError:
                logger.exception("final checkpoint on interrupt failed")
        raise
    except ObjectiveAbort:
        if checkpoint is not None:
            try:
                checkpoint(state)
            except OSError:
                logger.exception("checkpoint after objective abort failed")
        raise
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    _save(state)
    return RunResult(state, trace, decision, space)


def _jsonable(config: SystemConfig) -> dict[str, Any]:
    out = {}
    for name, value in zip(config.names, config.values):
        out[name] = value if isinstance(value, int) else float(value)
    return out
