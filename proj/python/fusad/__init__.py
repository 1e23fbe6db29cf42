"""Python access to the FusAD core (spectral ops, model, metrics, CLI)."""

import json

from ._fusad import (  # noqa: F401
    ConfigError,
    FusadError,
    InputError,
    Model,
    NumericalError,
    accuracy,
    cwt,
    cwt_roundtrip,
    default_scales,
    denoise,
    fit_band_thresholds,
    hanning,
    irfft,
    label_smooth_ce,
    masked_mse,
    mse_mae,
    prf1,
    rfft,
    run_cli,
    synth_classification,
)
from ._fusad import parameter_accounting as _parameter_accounting

__version__ = "0.1.0"


def _dump(config):
    return config if isinstance(config, str) else json.dumps(config)


def model(config):
    """Build a model from a dict (or JSON string) of model settings."""
    return Model(_dump(config))


def parameter_accounting(config):
    """Per-component parameter counts for a model configuration."""
    return dict(_parameter_accounting(_dump(config)))
