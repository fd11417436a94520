"""Weak-error studies for Euler schemes."""

import json as _json

from ._weaklab import (
    ConfigError,
    SdeModel,
    TestFunction,
    black_scholes_call,
    black_scholes_model,
    bounded_vol_model,
    constant_model,
    density_error_exact,
    estimate_expectation,
    exp_abs,
    fit_rate,
    gbm_euler_mean,
    gbm_model,
    identity,
    list_studies,
    ou_model,
    power,
    principal_density_pi,
    validate,
)
from ._weaklab import run_study as _run_study

__version__ = "0.1.0"


def run_study(config, write_files=False):
    """Run a study from a dict or JSON string; the summary comes back parsed."""
    text = config if isinstance(config, str) else _json.dumps(config)
    out = _run_study(text, write_files)
    if "summary" in out:
        out["summary"] = _json.loads(out["summary"])
    return out
