"""Python access to the hierarchical quadruped controller."""

from ._quadhrl import (
    CheckpointError,
    ConfigError,
    TreadmillEnv,
    __version__,
    action_probabilities,
    config_hash,
    default_config,
    primitive_table,
    resolve_config,
    run_compare,
    run_episode,
    solve_qp,
    toy_value_iteration,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "TreadmillEnv",
    "__version__",
    "action_probabilities",
    "config_hash",
    "default_config",
    "primitive_table",
    "resolve_config",
    "run_compare",
    "run_episode",
    "solve_qp",
    "toy_value_iteration",
]
