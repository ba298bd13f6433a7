"""Fast greedy inference for Dirichlet process Gaussian mixtures with variable selection.

Sequential allocation (:mod:`sugs.allocation`), greedy variable switches
(:mod:`sugs.varsel`), model scores (:mod:`sugs.scoring`) and model-averaged
co-clustering (:mod:`sugs.bma`) on top of a normal inverse-chi-squared
conjugate model (:mod:`sugs.conjugate`).
"""

__version__ = "0.1.0"

from .allocation import BetaGrid, BetaPosterior, SugsFit, sugs_pass
from .bma import bma_coclustering, bma_variable_scores, coclustering, model_weights, occams_window, summarize
from .conjugate import ClusterState, Hyperparameters
from .evaluate import ScenarioSpec, adjusted_rand_index, simulate, variable_recovery
from .scoring import FittedModel, log_marginal_likelihood_model, log_pseudo_marginal_likelihood, select_best
from .varsel import SearchConfig, full_search, sugsvarsel_pass

__all__ = [
    "BetaGrid",
    "BetaPosterior",
    "ClusterState",
    "FittedModel",
    "Hyperparameters",
    "ScenarioSpec",
    "SearchConfig",
    "SugsFit",
    "adjusted_rand_index",
    "bma_coclustering",
    "bma_variable_scores",
    "coclustering",
    "full_search",
    "log_marginal_likelihood_model",
    "log_pseudo_marginal_likelihood",
    "model_weights",
    "occams_window",
    "select_best",
    "simulate",
    "sugs_pass",
    "sugsvarsel_pass",
    "summarize",
    "variable_recovery",
]
