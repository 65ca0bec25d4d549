"""Reconstruction-capacity experiments for diffraction-limited imaging."""

import json

from ._core import (
    Povm,
    RecSpectrum,
    __version__,
    chernoff_exponent,
    eigentask_values,
    make_povm,
    probability_kernel,
    rec_spectrum,
    sample_counts,
    scenario_names,
    total_rec,
)
from ._core import (
    default_config_json as _default_config_json,
    merged_with_defaults_json as _merged_json,
    run_experiment_json as _run_json,
    validate_config_json as _validate_json,
)

__all__ = [
    "Povm",
    "RecSpectrum",
    "__version__",
    "chernoff_exponent",
    "default_config",
    "eigentask_values",
    "make_povm",
    "probability_kernel",
    "rec_spectrum",
    "run_experiment",
    "sample_counts",
    "scenario_names",
    "total_rec",
    "validate_config",
]


def default_config(scenario):
    """Full default config dict for a scenario name."""
    return json.loads(_default_config_json(scenario))


def validate_config(config):
    """List of problems for a (partial) config dict; empty means valid."""
    return _validate_json(json.dumps(_merged(config)))


def run_experiment(config):
    """Run a scenario from a (partial) config dict; writes into output_dir."""
    _run_json(json.dumps(_merged(config)))


def _merged(config):
    return json.loads(_merged_json(json.dumps(config)))
