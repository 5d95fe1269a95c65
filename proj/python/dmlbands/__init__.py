"""High-dimensional debiased ML inference: simultaneous sup-t bands,
finite-sample bound calculators, and a Monte Carlo harness."""

import json as _json

from ._dmlbands import (  # noqa: F401
    NumericalError,
    ValidationError,
    anti_concentration_bound,
    ate_bands,
    entropy_sum,
    gaussian_max_sample,
    ks_distance,
    maximal_inequality_bound,
    normal_cdf,
    normal_quantile,
    pava,
    run_json,
    sup_t_critical_value,
    theorem1_bound,
    theorem2_bound,
    __version__,
)


def run(config: dict) -> dict:
    """Run a config document (same schema as the CLI) and return the report."""
    return _json.loads(run_json(_json.dumps(config)))
