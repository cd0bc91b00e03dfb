"""Red-team scenario generation for autonomous-vehicle testing."""

import json

from ._core import (
    ConfigError,
    Environment,
    FormatError,
    IllegalActionError,
    Role,
    VehicleState,
    __version__,
    action_table,
    compute_ttc,
    gae,
    metrics_from_csv,
)
from . import _core


def default_config():
    """Default configuration as a dict."""
    return json.loads(_core.default_config())


def _config_text(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def train(algo, scenario="svi", seed=0, episodes=None, config=None):
    """Train a red-team policy. Returns (curves, checkpoint dict)."""
    curves, ckpt = _core.train(algo, scenario, seed, episodes, _config_text(config))
    return curves, json.loads(ckpt)


def evaluate(checkpoint=None, scenario="svi", episodes=100, seed=0, config=None, greedy=None):
    """Evaluate a checkpoint dict, or the no-interference baseline when None."""
    ckpt = None if checkpoint is None else json.dumps(checkpoint)
    return _core.evaluate(ckpt, scenario, episodes, seed, _config_text(config), greedy)


__all__ = [
    "ConfigError",
    "Environment",
    "FormatError",
    "IllegalActionError",
    "Role",
    "VehicleState",
    "action_table",
    "compute_ttc",
    "default_config",
    "evaluate",
    "gae",
    "metrics_from_csv",
    "train",
]
