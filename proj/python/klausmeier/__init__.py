"""Stochastic Klausmeier simulator."""

import json

from ._core import (
    ConfigError,
    cutoff_phi,
    default_config,
    eigenvalues,
    pm_inequality_gap,
    resolve_config,
    run,
    simulate,
    validate_hypotheses,
)

__all__ = [
    "ConfigError",
    "config",
    "cutoff_phi",
    "default_config",
    "eigenvalues",
    "pm_inequality_gap",
    "resolve_config",
    "run",
    "simulate",
    "validate_hypotheses",
]


def config(text="", overrides=(), seed=None):
    """Resolved config as a dict."""
    return json.loads(resolve_config(text, list(overrides), seed))
