"""Continuous-time Markov multi-state models for daily greenhouse yield states."""

import json

from ._yieldmsm import (
    InputError,
    ModelSpec,
    NumericalError,
    PanelDataset,
    ParameterSet,
    __version__,
    generator,
    hazard_ratio,
    log_likelihood,
    run_command,
    simulate_panel,
    sojourn_time,
    transition_probability_matrix,
    uniformization,
)
from ._yieldmsm import fit as _fit


def fit(data, spec, algorithm="bfgs"):
    """Maximum-likelihood fit; returns the fit report as a dict."""
    return json.loads(_fit(data, spec, algorithm))


__all__ = [
    "InputError",
    "ModelSpec",
    "NumericalError",
    "PanelDataset",
    "ParameterSet",
    "__version__",
    "fit",
    "generator",
    "hazard_ratio",
    "log_likelihood",
    "run_command",
    "simulate_panel",
    "sojourn_time",
    "transition_probability_matrix",
    "uniformization",
]
