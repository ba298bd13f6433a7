"""Scoring fitted partitions: marginal and pseudo-marginal likelihoods."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .allocation import BetaGrid, BetaPosterior
from .conjugate import (
    Hyperparameters,
    cluster_log_ml_table,
    state_from_data,
    student_t_logpdf,
)


@dataclass(eq=False)
class FittedModel:
    """A partition of the observations together with its variable switches and scores.

    ``provenance`` records where in the search the model came from, e.g.
    ``{"subsample": 3, "ordering": 7, "seed": 11}``; models are ordered by it
    when scores tie.
    """

    z: np.ndarray
    gamma: np.ndarray
    log_ml: float
    log_pml: float | None = None
    provenance: dict = field(default_factory=dict)
    log_phi: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return int(np.max(self.z)) + 1

    def provenance_key(self) -> tuple:
        return tuple(self.provenance.get(k, 0) for k in ("subsample", "ordering", "seed"))

    def to_dict(self) -> dict:
        return {
            "log_ml": float(self.log_ml),
            "log_pml": None if self.log_pml is None else float(self.log_pml),
            "n_clusters": self.n_clusters,
            "z": [int(v) for v in self.z],
            "gamma": [int(v) for v in self.gamma],
            "provenance": dict(self.provenance),
            **({"meta": dict(self.meta)} if self.meta else {}),
        }


def relabel(z) -> np.ndarray:
    """Compact labels ``0..K-1`` in order of first appearance."""
    z = np.asarray(z)
    _, first, inverse = np.unique(z, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse].astype(np.int64)


def global_log_ml(data, hyper: Hyperparameters) -> np.ndarray:
    """Per-variable log evidence of all observations under one shared component."""
    data = np.asarray(data, dtype=float)
    return cluster_log_ml_table(data, np.zeros(data.shape[0], dtype=np.int64), hyper, 1)[0]


def log_marginal_likelihood_model(data, z, gamma, hyper: Hyperparameters) -> float:
    """Log evidence of ``data`` given a partition and variable switches.

    Switched-on variables are scored cluster by cluster; switched-off
    variables are scored as a single component over all observations, so the
    value is comparable across different switch vectors.
    """
    data = np.asarray(data, dtype=float)
    gamma = np.asarray(gamma).astype(bool)
    z = relabel(z)
    total = 0.0
    if gamma.any():
        total += cluster_log_ml_table(data[:, gamma], z, hyper.subset(gamma)).sum()
    if (~gamma).any():
        total += global_log_ml(data[:, ~gamma], hyper.subset(~gamma)).sum()
    return float(total)


def _grid_log_crp(counts, beta_grid: BetaGrid, log_phi, n_prev: int) -> np.ndarray:
    """Grid-averaged log CRP weights for existing clusters plus a new one.

    ``n_prev`` is the number of observations the counts refer to.
    """
    log_denom = np.log(beta_grid.values + n_prev)
    with np.errstate(divide="ignore"):
        log_counts = np.log(np.asarray(counts, dtype=float))
    old = logsumexp(log_phi - log_denom)
    new = logsumexp(log_phi + np.log(beta_grid.values) - log_denom)
    return np.append(log_counts + old, new)


def log_pseudo_marginal_likelihood(
    data,
    z,
    gamma,
    hyper: Hyperparameters,
    beta_grid: BetaGrid | None = None,
    beta_posterior: BetaPosterior | np.ndarray | None = None,
    mode: str = "exact",
) -> float:
    """Sum over observations of the log leave-one-out predictive density.

    Each observation's predictive is a mixture over the clusters of the
    remaining data plus a new cluster, weighted by the CRP probabilities
    averaged over the concentration grid.  ``beta_posterior`` is the grid
    posterior from the fit (the prior weights are used when omitted).

    ``mode="exact"`` removes the observation from its cluster before scoring;
    ``mode="approx"`` scores it against the full-data posterior.  A singleton
    emptied by removal contributes only through the new-cluster term.

    Switched-off variables contribute their global-component leave-one-out
    predictive, identical for every cluster.
    """
    if mode not in ("exact", "approx"):
        raise ValueError(f"unknown PML mode {mode!r}")
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    gamma = np.asarray(gamma).astype(bool)
    z = relabel(z)
    beta_grid = BetaGrid.default() if beta_grid is None else beta_grid
    if beta_posterior is None:
        log_phi = beta_grid.initial_posterior().log_phi
    elif isinstance(beta_posterior, BetaPosterior):
        log_phi = beta_posterior.log_phi
    else:
        log_phi = np.asarray(beta_posterior, dtype=float)

    n_clusters = int(z.max()) + 1
    on = data[:, gamma]
    h_on = hyper.subset(gamma)
    states = [state_from_data(h_on, on[z == k]) for k in range(n_clusters)]
    m = np.array([s.m for s in states])  # (K, D_on)
    t = np.array([s.t for s in states])
    counts = np.array([s.count for s in states], dtype=float)

    off = data[:, ~gamma]
    h_off = hyper.subset(~gamma)
    g_state = state_from_data(h_off, off)

    total = 0.0
    for i in range(n):
        xi = on[i]
        ki = z[i]
        cnt = counts.copy()
        mi, ti = m, t
        if mode == "exact":
            cnt[ki] -= 1
            mi = m.copy()
            ti = t.copy()
            lam_full = hyper.lambda0 + counts[ki]
            mi[ki] = (lam_full * m[ki] - xi) / (lam_full - 1.0)
            ti[ki] = t[ki] - xi**2
        lam = hyper.lambda0 + cnt[:, None]
        nu = hyper.nu0 + cnt[:, None]
        nu_s = ti - lam * mi**2
        keep = cnt > 0
        log_pred = student_t_logpdf(xi, mi[keep], nu[keep], lam[keep], nu_s[keep]).sum(axis=1)
        prior_pred = student_t_logpdf(
            xi, h_on.mu0, hyper.nu0, hyper.lambda0, h_on.t0 - hyper.lambda0 * h_on.mu0**2
        ).sum()
        n_prev = int(cnt.sum())
        log_w = _grid_log_crp(cnt[keep], beta_grid, log_phi, n_prev)
        term = logsumexp(log_w + np.append(log_pred, prior_pred))

        if off.shape[1]:
            gs = g_state
            if mode == "exact":
                lam_g = gs.lam - 1.0
                mg = (gs.lam * gs.m - off[i]) / lam_g
                tg = gs.t - off[i] ** 2
                term += student_t_logpdf(off[i], mg, gs.nu - 1.0, lam_g, tg - lam_g * mg**2).sum()
            else:
                term += student_t_logpdf(off[i], gs.m, gs.nu, gs.lam, gs.nu_s).sum()
        total += term
    return float(total)


def select_best(models, criterion: str = "ml") -> FittedModel:
    """Highest-scoring model; ties go to the smallest provenance key."""
    models = list(models)
    if not models:
        raise ValueError("cannot select from an empty model set")
    if criterion == "ml":
        key = lambda m: m.log_ml
    elif criterion == "pml":
        if any(m.log_pml is None for m in models):
            raise ValueError("PML requested but not computed for every model")
        key = lambda m: m.log_pml
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    best = max(key(m) for m in models)
    return min((m for m in models if key(m) == best), key=FittedModel.provenance_key)
