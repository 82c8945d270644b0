"""Model-aided deep Q-learning for UAV data collection.

Scenario configs are passed around as JSON text in the same schema the
``madql`` command-line tool reads and writes.
"""

import json

from ._madql import (
    ConfigError,
    InvariantViolation,
    UsageError,
    apply_overrides,
    default_scenario,
    epsilon,
    evaluate,
    is_los,
    pso_minimize,
    throughput,
    train,
    true_gain_db,
    validate_config,
)

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "UsageError",
    "apply_overrides",
    "default_scenario",
    "epsilon",
    "evaluate",
    "is_los",
    "load_scenario",
    "pso_minimize",
    "throughput",
    "train",
    "true_gain_db",
    "validate_config",
]


def load_scenario(text):
    """Validated scenario as a dict."""
    return json.loads(validate_config(text))
