"""Derivative-free configuration tuning with one-sided SPSA."""

from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .errors import (
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    DomainError,
    NumericError,
    ObjectiveAbort,
    SpsaError,
    StructuralError,
    TemplateError,
)
from .objectives import (
    FunctionObjective,
    MRSimObjective,
    ObjectiveSample,
    ObjectiveSpec,
    ProcessObjective,
    SyntheticObjective,
    evaluate,
    make_objective,
    render_command,
)
from .space import (
    ParameterSpace,
    ParameterSpec,
    SystemConfig,
    map_default,
    map_to_system,
    normalize,
    project,
)
from .spsa import (
    Decision,
    EngineOptions,
    FailurePolicy,
    GradientEstimate,
    IterationRecord,
    Limits,
    Perturbation,
    RunResult,
    StepSchedule,
    TunerState,
    average_gradient,
    estimate_gradient,
    finite_difference_oracle,
    gen_perturbation,
    init_state,
    perturbation_magnitudes,
    run,
    should_terminate,
    spsa_step,
)
from .synthetics import builtin_synthetics, get_synthetic

__version__ = "0.1.0"
