"""Two-phase correlated randomized response for multi-attribute LDP frequency estimation.

Modules: ``core`` (types, validation, I/O), ``grr`` (the single-attribute
oracle), ``mechanisms`` (client-side perturbation), ``aggregation``
(server-side estimators), ``pyopt`` (MSE model and copy probability),
``synth`` / ``ingest`` (data), ``harness`` (experiments) and ``cli``.
"""

from .core import (
    CorrRRError,
    Dataset,
    clamp_normalize,
    load_dataset,
    rng_stream,
    save_dataset,
    true_marginals,
)
from .grr import GrrParams, grr_estimate, grr_params, grr_perturb, ldp_ratio
from .harness import ExperimentConfig, ResultRow, amplified_epsilon, mse_metric, run_experiment, run_once
from .mechanisms import CORR_RR, MECHANISMS, RSFD, RSRFD, SPL, mechanism_channel
from .pyopt import PairContext, avg_mse, infer_py_matrix, optimal_py
from .synth import SynthSpec, gen_synthetic, measure_correlation

__version__ = "0.1.0"

__all__ = [
    "CORR_RR", "MECHANISMS", "RSFD", "RSRFD", "SPL",
    "CorrRRError", "Dataset", "ExperimentConfig", "GrrParams", "PairContext", "ResultRow", "SynthSpec",
    "amplified_epsilon", "avg_mse", "clamp_normalize", "gen_synthetic", "grr_estimate", "grr_params",
    "grr_perturb", "infer_py_matrix", "ldp_ratio", "load_dataset", "measure_correlation",
    "mechanism_channel", "mse_metric", "optimal_py", "rng_stream", "run_experiment", "run_once",
    "save_dataset", "true_marginals",
]
