"""Greedy variable selection layered on the sequential allocation pass.

A variable is *on* when it follows cluster-specific parameters and *off*
when it follows a single global component.  Given a partition each switch is
set to its most probable value; given the switches the partition is refitted
with :func:`~sugs.allocation.sugs_pass`.  :func:`full_search` wraps this in
the random sub-sampling initialisation and many random orderings.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .allocation import BetaGrid, sugs_pass
from .conjugate import Hyperparameters, NumericalDegeneracyError, cluster_log_ml_table
from .scoring import (
    FittedModel,
    global_log_ml,
    log_marginal_likelihood_model,
    log_pseudo_marginal_likelihood,
    relabel,
)

log = logging.getLogger(__name__)


@dataclass
class VarSelFit:
    z: np.ndarray
    gamma: np.ndarray
    iterations_run: int
    log_ml: float
    log_phi: np.ndarray = field(repr=False, default=None)
    all_off: bool = False


def variable_log_posterior(data, z, prior_on: float, hyper: Hyperparameters, variables=None):
    """Normalised log posteriors ``(log p(on), log p(off))`` for each variable.

    Returns two arrays over ``variables`` (all variables by default).
    """
    if not 0.0 < prior_on < 1.0:
        raise ValueError("prior_on must lie in (0, 1)")
    data = np.asarray(data, dtype=float)
    if variables is not None:
        data = data[:, variables]
        hyper = hyper.subset(variables)
    z = np.asarray(z)
    if z.min() < 0 or np.unique(z).size != z.max() + 1:
        raise ValueError("partition labels must be 0..K-1 with no empty cluster")
    on = math.log(prior_on) + cluster_log_ml_table(data, z, hyper).sum(axis=0)
    off = math.log1p(-prior_on) + global_log_ml(data, hyper)
    norm = np.logaddexp(on, off)
    return on - norm, off - norm


def greedy_gamma_update(data, z, prior_on: float, hyper: Hyperparameters, variables=None) -> np.ndarray:
    """Most probable switch for each variable given ``z``; exact ties switch on."""
    on, off = variable_log_posterior(data, z, prior_on, hyper, variables)
    return (on >= off).astype(np.int8)


def sugsvarsel_pass(
    data,
    ordering,
    gamma0,
    n_iter: int,
    hyper: Hyperparameters,
    beta_grid: BetaGrid,
    prior_on: float = 0.5,
) -> VarSelFit:
    """Alternate allocation passes and switch updates ``n_iter`` times."""
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    gamma = np.asarray(gamma0).astype(np.int8)
    all_off = False
    for _ in range(n_iter):
        fit = sugs_pass(data, ordering, gamma, hyper, beta_grid)
        gamma = greedy_gamma_update(data, fit.z, prior_on, hyper)
        all_off = all_off or not gamma.any()
    log_ml = log_marginal_likelihood_model(data, fit.z, gamma, hyper)
    return VarSelFit(
        z=fit.z,
        gamma=gamma,
        iterations_run=n_iter,
        log_ml=log_ml,
        log_phi=fit.beta_posterior.log_phi,
        all_off=all_off,
    )


@dataclass
class SearchConfig:
    """Settings for :func:`full_search`.

    ``n_subsamples`` is the number of random variable subsets used for
    initialisation, ``n_orderings`` the number of orderings refitted on the
    full data for each of them.
    """

    n_subsamples: int = 20
    n_orderings: int = 30
    n_iter: int = 2
    p1_fraction: float = 0.1
    init_orderings: int = 10
    prior_on: float = 0.5
    seed: int = 0
    threads: int = 1
    compute_pml: bool = False
    pml_mode: str = "exact"

    def as_dict(self) -> dict:
        return asdict(self)


def _n_selected(p1_fraction: float, n_vars: int) -> int:
    if not 0.0 < p1_fraction <= 1.0:
        raise ValueError("p1_fraction must lie in (0, 1]")
    p1 = int(round(p1_fraction * n_vars))
    if p1 < 1:
        raise ValueError(f"p1_fraction={p1_fraction} selects no variables out of {n_vars}")
    return p1


def _init_task(args):
    data, columns, orderings, n_iter, hyper, beta_grid, prior_on = args
    reduced = data[:, columns]
    h_red = hyper.subset(columns)
    best = None
    for ordering in orderings:
        fit = sugsvarsel_pass(reduced, ordering, np.ones(columns.size, np.int8), n_iter, h_red, beta_grid, prior_on)
        if best is None or fit.log_ml > best.log_ml:
            best = fit
    z = relabel(best.z)
    gamma = greedy_gamma_update(data, z, prior_on, hyper)
    gamma[columns] = best.gamma
    return gamma


def _map(fn, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        # map preserves submission order, so results do not depend on scheduling
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def subsample_init(
    data,
    p1_fraction: float,
    m_subsamples: int,
    orderings_per_subsample: int,
    seed=0,
    hyper: Hyperparameters | None = None,
    beta_grid: BetaGrid | None = None,
    n_iter: int = 2,
    prior_on: float = 0.5,
    threads: int = 1,
) -> list[np.ndarray]:
    """Initial switch vectors from fits on random subsets of the variables.

    For each subset the best of several orderings (by marginal likelihood on
    the subset) supplies a partition; variables outside the subset are then
    switched greedily against that partition using the full data.
    """
    data = np.asarray(data, dtype=float)
    n, n_vars = data.shape
    if m_subsamples < 1 or orderings_per_subsample < 1:
        raise ValueError("counts must be at least 1")
    p1 = _n_selected(p1_fraction, n_vars)
    hyper = Hyperparameters.from_data(data) if hyper is None else hyper
    beta_grid = BetaGrid.default() if beta_grid is None else beta_grid
    rng = np.random.default_rng(seed)
    tasks = []
    for _ in range(m_subsamples):
        columns = np.sort(rng.choice(n_vars, size=p1, replace=False))
        orderings = [rng.permutation(n) for _ in range(orderings_per_subsample)]
        tasks.append((data, columns, orderings, n_iter, hyper, beta_grid, prior_on))
    return _map(_init_task, tasks, threads)


def _search_task(args):
    data, ordering, gamma0, cfg, hyper, beta_grid, provenance = args
    try:
        fit = sugsvarsel_pass(data, ordering, gamma0, cfg.n_iter, hyper, beta_grid, cfg.prior_on)
    except (NumericalDegeneracyError, FloatingPointError) as exc:
        return None, {**provenance, "error": str(exc)}
    z = relabel(fit.z)
    model = FittedModel(
        z=z,
        gamma=fit.gamma,
        log_ml=fit.log_ml,
        provenance=provenance,
        log_phi=fit.log_phi,
        meta={"all_off": True} if fit.all_off else {},
    )
    if cfg.compute_pml:
        model.log_pml = log_pseudo_marginal_likelihood(
            data, z, fit.gamma, hyper, beta_grid, fit.log_phi, mode=cfg.pml_mode
        )
    return model, None


@dataclass
class ModelSet:
    models: list[FittedModel]
    init_gammas: list[np.ndarray]
    failures: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)


def full_search(
    data,
    config: SearchConfig | None = None,
    hyper: Hyperparameters | None = None,
    beta_grid: BetaGrid | None = None,
) -> ModelSet:
    """Run the sub-sampling initialisation and refit every start on the full data.

    Produces ``n_subsamples * n_orderings`` models, less any whose pass failed
    numerically (those are listed in ``failures``).  Models are returned in
    task order, which depends only on the seed.
    """
    cfg = SearchConfig() if config is None else config
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    hyper = Hyperparameters.from_data(data) if hyper is None else hyper
    beta_grid = BetaGrid.default() if beta_grid is None else beta_grid

    init_seed, order_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    gammas = subsample_init(
        data,
        cfg.p1_fraction,
        cfg.n_subsamples,
        cfg.init_orderings,
        seed=init_seed,
        hyper=hyper,
        beta_grid=beta_grid,
        n_iter=cfg.n_iter,
        prior_on=cfg.prior_on,
        threads=cfg.threads,
    )
    rng = np.random.default_rng(order_seed)
    tasks = []
    for s, gamma0 in enumerate(gammas):
        for q in range(cfg.n_orderings):
            provenance = {"subsample": s, "ordering": q, "seed": cfg.seed}
            tasks.append((data, rng.permutation(n), gamma0, cfg, hyper, beta_grid, provenance))
    log.debug("full search: %d tasks on %d threads", len(tasks), cfg.threads)

    models, failures = [], []
    for model, failure in _map(_search_task, tasks, cfg.threads):
        if model is None:
            log.warning("pass failed: %s", failure)
            failures.append(failure)
        else:
            models.append(model)
    return ModelSet(models=models, init_gammas=gammas, failures=failures)


def default_threads() -> int:
    return int(os.environ.get("SUGS_THREADS", "1"))
