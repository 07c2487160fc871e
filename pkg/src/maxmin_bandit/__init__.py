"""Deterministic simulator and analysis toolkit for the multi-player
max-min fairness bandit game on a collision channel."""

__version__ = "0.1.0"

from .agent import Agent, AgentConfig, EpochRecord, Phase, PhaseSchedule, phase_lengths
from .env import (
    BUILTIN_MATRICES,
    CollisionEnv,
    NoiseModel,
    RewardMatrix,
    TurnOutcome,
    expected_min_utility,
    instantaneous_regret,
    load_matrix,
    no_collision_indicator,
)
from .harness import (
    BatchSummary,
    Checkpoint,
    EpochDiagnostic,
    ExperimentConfig,
    RunTrace,
    convergence_epoch,
    epoch_count_bound,
    run_batch,
    run_single,
    write_manifest,
    write_summary_csv,
    write_trace_csv,
)
from .oracle import (
    AbsorptionEstimate,
    BipartiteGraph,
    GapReport,
    MatchingHistogram,
    MatchingResult,
    MaxSumResult,
    enumeration_size,
    estimate_absorption_time,
    gamma_star,
    is_gamma_matching,
    matching_histogram,
    max_bipartite_matching,
    max_sum_matching,
    minimal_gap,
)

__all__ = [
    "__version__",
    "Agent",
    "AgentConfig",
    "EpochRecord",
    "Phase",
    "PhaseSchedule",
    "phase_lengths",
    "BUILTIN_MATRICES",
    "CollisionEnv",
    "NoiseModel",
    "RewardMatrix",
    "TurnOutcome",
    "expected_min_utility",
    "instantaneous_regret",
    "load_matrix",
    "no_collision_indicator",
    "BatchSummary",
    "Checkpoint",
    "EpochDiagnostic",
    "ExperimentConfig",
    "RunTrace",
    "convergence_epoch",
    "epoch_count_bound",
    "run_batch",
    "run_single",
    "write_manifest",
    "write_summary_csv",
    "write_trace_csv",
    "AbsorptionEstimate",
    "BipartiteGraph",
    "GapReport",
    "MatchingHistogram",
    "MatchingResult",
    "MaxSumResult",
    "enumeration_size",
    "estimate_absorption_time",
    "gamma_star",
    "is_gamma_matching",
    "matching_histogram",
    "max_bipartite_matching",
    "max_sum_matching",
    "minimal_gap",
]
