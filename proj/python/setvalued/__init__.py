"""Bayesian analysis of set-valued interlaboratory comparison data.

Items are 1-based integers throughout; a response is a list of n items.
"""

import json

from ._core import (
    BudgetError,
    NumericalError,
    __version__,
    bayes_factor,
    brute_force_posterior,
    count_at_distance,
    dispersion_pmf,
    hamming_pmf,
    mcmc_posterior,
    monotonicity,
    prior_cdf,
    prior_density,
    simulate,
)
from . import _core


def analyze(path, universe, n, **options):
    """Run a full analysis of a CSV file.

    Options use the keys of the report's "config" block (seed, model,
    inference, epsilon, ...). Returns (report dict, {sidecar: TSV text}).
    """
    text, sidecars = _core.analyze_csv(str(path), universe, n, options)
    return json.loads(text), sidecars


def check_distribution(family, u, universe, n, draws, seed=1):
    """Sampled distance histogram against the exact pmf, as a dict."""
    return json.loads(_core.check_distribution(family, u, universe, n, draws, seed))


__all__ = [
    "BudgetError",
    "NumericalError",
    "__version__",
    "analyze",
    "bayes_factor",
    "brute_force_posterior",
    "check_distribution",
    "count_at_distance",
    "dispersion_pmf",
    "hamming_pmf",
    "mcmc_posterior",
    "monotonicity",
    "prior_cdf",
    "prior_density",
    "simulate",
]
