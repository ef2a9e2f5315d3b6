"""Budgeted black-box hyperparameter search."""

import json

from ._core import *  # noqa: F401,F403
from ._core import TunekitError, normalize_message, optimize

__all__ = [
    "maximize",
    "minimize",
    "optimize",
    "encode",
    "decode",
    "TunekitError",
]


def maximize(f, space, num_evals, **kwargs):
    """Maximize f(**params) over space = {name: (lower, upper)}."""
    return optimize(f, space, num_evals, "maximize", **kwargs)


def minimize(f, space, num_evals, **kwargs):
    """Minimize f(**params) over space = {name: (lower, upper)}."""
    return optimize(f, space, num_evals, "minimize", **kwargs)


def encode(message):
    """Protocol line for a message dict, validated by the engine."""
    return normalize_message(json.dumps(message))


def decode(line):
    """Message dict from a protocol line; raises on schema violations."""
    return json.loads(normalize_message(line))
