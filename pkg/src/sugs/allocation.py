"""Sequential greedy allocation of observations to Dirichlet process clusters.

The DP concentration is given a discrete prior on a grid of values and is
integrated out at every step; the grid weights are updated after each
allocation.  One call to :func:`sugs_pass` processes the data once, in the
order given, and assigns each observation to the cluster with the highest
posterior allocation probability.

Cluster labels are 0-based and compact: a fit with ``K`` clusters uses the
labels ``0 .. K-1``, numbered in order of creation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .conjugate import (
    DEGENERACY_RTOL,
    LOG_PI,
    ClusterState,
    Hyperparameters,
    NumericalDegeneracyError,
    prior_state,
    state_from_data,
    student_t_logpdf,
)

DEFAULT_BETA_VALUES = (0.01, 0.1, 1.0, 5.0, 10.0, 15.0, 30.0, 50.0, 100.0)


@dataclass(frozen=True)
class BetaGrid:
    """Discrete prior for the DP concentration: support ``values``, masses ``kappa``."""

    values: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if values.shape != kappa.shape:
            raise ValueError("values and kappa must have the same length")
        if values.size == 0 or np.any(values <= 0):
            raise ValueError("grid values must be positive")
        if np.any(kappa < 0) or abs(kappa.sum() - 1.0) > 1e-12:
            raise ValueError("kappa must be a probability vector")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kappa", kappa)

    @classmethod
    def from_gamma_prior(cls, values=DEFAULT_BETA_VALUES, shape=1.0, rate=1.0) -> "BetaGrid":
        """Weights proportional to a Gamma(shape, rate) density at each grid point."""
        values = np.asarray(values, dtype=float)
        log_dens = stats.gamma.logpdf(values, a=shape, scale=1.0 / rate)
        return cls(values, np.exp(log_dens - logsumexp(log_dens)))

    @classmethod
    def uniform(cls, values) -> "BetaGrid":
        values = np.asarray(values, dtype=float)
        return cls(values, np.full(values.shape, 1.0 / values.size))

    @classmethod
    def default(cls) -> "BetaGrid":
        return cls.from_gamma_prior()

    def __len__(self):
        return self.values.size

    def initial_posterior(self) -> "BetaPosterior":
        with np.errstate(divide="ignore"):
            return BetaPosterior(np.log(self.kappa))


@dataclass(frozen=True)
class BetaPosterior:
    log_phi: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return np.exp(self.log_phi)


@dataclass
class SugsFit:
    """Result of one sequential pass.

    ``z`` is indexed by observation (not by processing position).
    """

    z: np.ndarray
    clusters: list[ClusterState]
    beta_posterior: BetaPosterior
    ordering: np.ndarray
    active: np.ndarray = field(repr=False)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def counts(self) -> np.ndarray:
        return np.array([c.count for c in self.clusters])


def crp_log_prior(counts, beta: float, i: int) -> np.ndarray:
    """Log prior allocation probabilities for the ``i``-th observation (1-based).

    Entries ``0..K-2`` correspond to the existing clusters, the last entry to
    a new cluster.
    """
    counts = np.asarray(counts, dtype=float)
    if i < 2:
        raise ValueError("the CRP prior is defined for i >= 2")
    if counts.sum() != i - 1:
        raise ValueError(f"cluster counts sum to {counts.sum()}, expected {i - 1}")
    if np.any(counts <= 0):
        raise ValueError("existing clusters must be non-empty")
    denom = np.log(beta + i - 1)
    return np.append(np.log(counts), np.log(beta)) - denom


def _crp_log_prior_grid(counts, grid: BetaGrid, i: int) -> np.ndarray:
    """``log pi[k, l]`` for every cluster slot ``k`` and grid point ``l``."""
    counts = np.asarray(counts, dtype=float)
    log_denom = np.log(grid.values + i - 1)
    rows = np.log(counts)[:, None] - log_denom[None, :]
    new = np.log(grid.values) - log_denom
    return np.vstack([rows, new[None, :]])


def _stack_log_predictive(x, clusters, hyper_like: ClusterState, active) -> np.ndarray:
    out = np.empty(len(clusters) + 1)
    for k, state in enumerate(list(clusters) + [hyper_like]):
        nu_s = state.checked_nu_s()[active]
        out[k] = student_t_logpdf(x[active], state.m[active], state.nu, state.lam, nu_s).sum()
    return out


def allocation_log_posterior(
    x,
    clusters,
    beta_grid: BetaGrid,
    beta_post: BetaPosterior,
    i: int,
    gamma=None,
    prior: ClusterState | None = None,
    hyper: Hyperparameters | None = None,
) -> np.ndarray:
    """Normalised log posterior over existing clusters plus one new cluster.

    Only variables switched on in ``gamma`` enter the likelihood; switched-off
    variables share one global component whose contribution is identical for
    every cluster and therefore cancels.  The new-cluster slot uses ``prior``
    (or the prior built from ``hyper``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if prior is None:
        if hyper is None:
            raise ValueError("either prior or hyper is required")
        prior = prior_state(hyper)
    active = np.ones(x.size, dtype=bool) if gamma is None else np.asarray(gamma, dtype=bool)
    counts = [c.count for c in clusters]
    log_lik = _stack_log_predictive(x, clusters, prior, active)
    log_pi = _crp_log_prior_grid(counts, beta_grid, i)
    log_w = logsumexp(beta_post.log_phi[None, :] + log_pi, axis=1) + log_lik
    norm = logsumexp(log_w)
    if not np.isfinite(norm):
        raise FloatingPointError("allocation weights underflowed to zero")
    return log_w - norm


def update_phi(beta_post: BetaPosterior, chosen_k: int, counts, beta_grid: BetaGrid, i: int) -> BetaPosterior:
    """Condition the grid weights on the allocation of observation ``i``.

    ``counts`` are the cluster sizes before the allocation; ``chosen_k ==
    len(counts)`` means a new cluster was opened.
    """
    if i < 2:
        # the first observation opens a cluster with probability one
        return BetaPosterior(beta_post.log_phi.copy())
    log_pi = _crp_log_prior_grid(counts, beta_grid, i)[chosen_k]
    log_phi = beta_post.log_phi + log_pi
    return BetaPosterior(log_phi - logsumexp(log_phi))


@numba.njit(cache=True)
def _logsumexp1(a):
    mx = -np.inf
    for v in a:
        if v > mx:
            mx = v
    if mx == -np.inf:
        return mx
    s = 0.0
    for v in a:
        s += math.exp(v - mx)
    return mx + math.log(s)


@numba.njit(cache=True)
def _sugs_kernel(x, mu0, lam0, nu0, t0, log_beta, beta, log_phi0):
    """Greedy pass over the rows of ``x`` in the order given.

    Returns ``(z, log_phi, status, fail_pos)``; ``status`` is 0 on success,
    1 for a degenerate scale statistic and 2 for underflowed weights.
    """
    n, d = x.shape
    n_grid = beta.shape[0]
    z = np.empty(n, dtype=np.int64)
    log_phi = log_phi0.copy()

    m = np.empty((n, d))
    t = np.empty((n, d))
    inv_vs = np.empty((n, d))
    sum_log_vs = np.empty(n)
    counts = np.zeros(n, dtype=np.int64)

    vs0 = t0 - lam0 * mu0 * mu0
    prior_inv_vs = 1.0 / vs0
    prior_sum_log_vs = 0.0
    for j in range(d):
        prior_sum_log_vs += math.log(vs0[j])

    log_w = np.empty(n + 1)
    tmp = np.empty(n_grid)
    n_clusters = 0

    for i in range(n):
        xi = x[i]
        if i == 0:
            k_best = 0
        else:
            # CRP factor integrated over the grid
            for l in range(n_grid):
                tmp[l] = log_phi[l] - math.log(beta[l] + i)
            log_old = _logsumexp1(tmp)
            for l in range(n_grid):
                tmp[l] += log_beta[l]
            log_new = _logsumexp1(tmp)

            for k in range(n_clusters + 1):
                if k < n_clusters:
                    nk = counts[k]
                    lam = lam0 + nk
                    nu = nu0 + nk
                    mk = m[k]
                    ivk = inv_vs[k]
                    slv = sum_log_vs[k]
                    crp = log_old + math.log(nk)
                else:
                    lam = lam0
                    nu = nu0
                    mk = mu0
                    ivk = prior_inv_vs
                    slv = prior_sum_log_vs
                    crp = log_new
                c = lam / (1.0 + lam)
                acc = 0.0
                for j in range(d):
                    diff = xi[j] - mk[j]
                    acc += math.log1p(c * diff * diff * ivk[j])
                const = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * LOG_PI - 0.5 * math.log(1.0 / c)
                log_w[k] = crp + d * const - 0.5 * slv - 0.5 * (nu + 1.0) * acc
            norm = _logsumexp1(log_w[: n_clusters + 1])
            if not np.isfinite(norm):
                return z, log_phi, 2, i
            k_best = 0
            best = log_w[0]
            for k in range(1, n_clusters + 1):
                if log_w[k] > best:
                    best = log_w[k]
                    k_best = k

            # condition the grid weights on the chosen allocation
            for l in range(n_grid):
                if k_best < n_clusters:
                    tmp[l] = log_phi[l] + math.log(counts[k_best]) - math.log(beta[l] + i)
                else:
                    tmp[l] = log_phi[l] + log_beta[l] - math.log(beta[l] + i)
            s = _logsumexp1(tmp)
            for l in range(n_grid):
                log_phi[l] = tmp[l] - s

        z[i] = k_best
        if k_best == n_clusters:
            for j in range(d):
                m[k_best, j] = mu0[j]
                t[k_best, j] = t0[j]
            n_clusters += 1
        nk = counts[k_best]
        lam = lam0 + nk
        new_lam = lam + 1.0
        slv = 0.0
        for j in range(d):
            mj = (lam * m[k_best, j] + xi[j]) / new_lam
            tj = t[k_best, j] + xi[j] * xi[j]
            vs = tj - new_lam * mj * mj
            if not vs >= DEGENERACY_RTOL * abs(tj):
                return z, log_phi, 1, i
            m[k_best, j] = mj
            t[k_best, j] = tj
            inv_vs[k_best, j] = 1.0 / vs
            slv += math.log(vs)
        sum_log_vs[k_best] = slv
        counts[k_best] = nk + 1

    return z, log_phi, 0, n


def sugs_pass(data, ordering, gamma, hyper: Hyperparameters, beta_grid: BetaGrid) -> SugsFit:
    """One greedy sequential allocation pass over ``data`` in ``ordering``.

    ``gamma`` switches variables on (1) or off (0); only switched-on variables
    drive the allocation.  The result is a deterministic function of its
    arguments.
    """
    data = np.asarray(data, dtype=float)
    n, n_vars = data.shape
    if n < 1:
        raise ValueError("need at least one observation")
    ordering = np.asarray(ordering, dtype=np.int64)
    if ordering.shape != (n,) or not np.array_equal(np.sort(ordering), np.arange(n)):
        raise ValueError("ordering must be a permutation of range(n)")
    active = np.ones(n_vars, dtype=bool) if gamma is None else np.asarray(gamma).astype(bool)
    if active.shape != (n_vars,) or hyper.n_vars != n_vars:
        raise ValueError("gamma and hyperparameters must match the number of variables")

    x = np.ascontiguousarray(data[ordering][:, active])
    mu0 = np.ascontiguousarray(hyper.mu0[active])
    t0 = np.ascontiguousarray(hyper.t0[active])
    log_phi0 = beta_grid.initial_posterior().log_phi
    z_ordered, log_phi, status, pos = _sugs_kernel(
        x, mu0, hyper.lambda0, hyper.nu0, t0, np.log(beta_grid.values), beta_grid.values, log_phi0
    )
    if status == 1:
        raise NumericalDegeneracyError(
            f"degenerate cluster statistics at ordering position {pos} (observation {ordering[pos]})"
        )
    if status == 2:
        raise FloatingPointError(
            f"allocation weights underflowed at ordering position {pos} (observation {ordering[pos]})"
        )

    z = np.empty(n, dtype=np.int64)
    z[ordering] = z_ordered
    n_clusters = int(z.max()) + 1
    clusters = [state_from_data(hyper, data[z == k]) for k in range(n_clusters)]
    return SugsFit(
        z=z,
        clusters=clusters,
        beta_posterior=BetaPosterior(log_phi),
        ordering=ordering,
        active=active,
    )
