"""Planar modular-controller training toolkit.

Thin wrapper over the C++ core: morphology builders, deterministic planar
environments, the boss+modules policy pipeline, and the analysis tooling.
"""

from ._memo import (  # noqa: F401
    Checkpoint,
    ConfigurationError,
    DimensionError,
    Env,
    EnvConfig,
    MissingPrerequisiteError,
    ModulePartition,
    MorphologyGraph,
    ObsLayout,
    RunningNormalizer,
    build_crawler,
    build_lifter,
    config_hash_of,
    emit_curve_data,
    gae,
    jacobi_svd,
    load_checkpoint,
    log_prob,
    observation_layout,
    orthogonal_init,
    reward_grasp,
    reward_locomotion,
    run_experiment,
    spectrum_summary,
    validate_partition,
)

__all__ = [
    "Checkpoint",
    "ConfigurationError",
    "DimensionError",
    "Env",
    "EnvConfig",
    "MissingPrerequisiteError",
    "ModulePartition",
    "MorphologyGraph",
    "ObsLayout",
    "RunningNormalizer",
    "build_crawler",
    "build_lifter",
    "config_hash_of",
    "emit_curve_data",
    "gae",
    "jacobi_svd",
    "load_checkpoint",
    "log_prob",
    "observation_layout",
    "orthogonal_init",
    "reward_grasp",
    "reward_locomotion",
    "run_experiment",
    "spectrum_summary",
    "validate_partition",
]
