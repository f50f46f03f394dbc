"""Python access to the expert-council planner."""

import json

from ._core import (
    ConfigError,
    InvalidInput,
    ParseFailure,
    fuse,
    game24_oracle,
    routing_distribution,
    sms_utility,
    uct,
)
from . import _core


def run(config):
    """Run every task in `config` (a dict) and return rows plus summary."""
    return json.loads(_core.run_json(json.dumps(config)))


def ablation(config, axis):
    """Run each variant along `axis` ("routing", "value-signal", "council-size")."""
    return json.loads(_core.ablation_json(json.dumps(config), axis))


__all__ = [
    "ConfigError",
    "InvalidInput",
    "ParseFailure",
    "ablation",
    "fuse",
    "game24_oracle",
    "routing_distribution",
    "run",
    "sms_utility",
    "uct",
]
