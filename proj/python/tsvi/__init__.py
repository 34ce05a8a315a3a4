"""Trust-region graphical Stein variational inference."""

import json as _json

from ._tsvi import (
    ConfigError,
    SingularityError,
    Target,
    ancestral_sample,
    approx_kl,
    cg_steihaug,
    gaussian_target,
    load_problem,
    median_heuristic,
    mmd,
    run,
    stein_gradient,
    stein_hessian,
)
from ._tsvi import generate_problem as _generate_problem
from ._tsvi import run_experiment as _run_experiment


def generate_problem(section):
    """Build a target from a problem section (dict or JSON string)."""
    if not isinstance(section, str):
        section = _json.dumps(section)
    return _generate_problem(section)


def run_experiment(config, out_dir):
    """Run a full experiment from a config (dict or JSON string)."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    _run_experiment(config, str(out_dir))


__all__ = [
    "ConfigError",
    "SingularityError",
    "Target",
    "ancestral_sample",
    "approx_kl",
    "cg_steihaug",
    "gaussian_target",
    "generate_problem",
    "load_problem",
    "median_heuristic",
    "mmd",
    "run",
    "run_experiment",
    "stein_gradient",
    "stein_hessian",
]
