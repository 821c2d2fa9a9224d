"""Python front end to the kfplab core.

Configs are passed as JSON text or dicts; pipeline stages write the same
artifacts as the command-line driver.
"""
import json

from ._kfplab import (
    ConfigError,
    InvariantFailure,
    NumericalError,
    __version__,
    coercivity_constant,
    diffusion_coefficient,
    fit_exp,
    fit_power,
    fit_stretched_exp,
    leading_eigenvalue,
    velocity_operator,
)
from . import _kfplab as _core

_STAGES = ("check_operator", "spectrum", "evolve", "decompose",
           "probe_regularization", "rates", "report", "run_all")


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def config_hash(config):
    return _core.config_hash(_text(config))


def run(stage, config, out, threads=1, force=False):
    """Run one pipeline stage; returns the exit code (0 pass, 1 failed check)."""
    if stage not in _STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    return getattr(_core, stage)(_text(config), str(out), threads, force)


__all__ = [
    "ConfigError", "InvariantFailure", "NumericalError", "__version__",
    "coercivity_constant", "config_hash", "diffusion_coefficient", "fit_exp",
    "fit_power", "fit_stretched_exp", "leading_eigenvalue", "run",
    "velocity_operator",
]
