"""Coupled neuronal oscillator ensembles and a TD3 suppression agent."""

from .dynamics import (
    EnsembleConfig,
    EnsembleState,
    Heterogeneity,
    NumericalDivergence,
    RegimeKind,
    init_ensemble,
    mean_field,
    step_ensemble,
)
from .env import (
    EnvConfig,
    StepResult,
    SuppressionEnv,
    TemporalRepConfig,
    compute_reward,
    temporal_representation,
)
from .evaluation import (
    EvalProtocol,
    SuppressionReport,
    TraceRecord,
    energy,
    mean_point_of_convergence,
    run_evaluation,
    suppression_coefficient,
)
from .td3 import Agent, BufferTooSmall, ReplayBuffer, Td3Hyperparams, Transition

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "BufferTooSmall",
    "EnsembleConfig",
    "EnsembleState",
    "EnvConfig",
    "EvalProtocol",
    "Heterogeneity",
    "NumericalDivergence",
    "RegimeKind",
    "ReplayBuffer",
    "StepResult",
    "SuppressionEnv",
    "SuppressionReport",
    "Td3Hyperparams",
    "TemporalRepConfig",
    "TraceRecord",
    "Transition",
    "compute_reward",
    "energy",
    "init_ensemble",
    "mean_field",
    "mean_point_of_convergence",
    "run_evaluation",
    "step_ensemble",
    "suppression_coefficient",
    "temporal_representation",
]
