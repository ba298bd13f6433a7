"""Normal inverse-chi-squared conjugate machinery for diagonal Gaussian clusters.

Each variable carries an independent NIχ² prior

    mean | var ~ N(mu0, var / lambda0),    var ~ Inv-χ²(nu0, s0)

and a cluster keeps the accumulator form of the posterior: the posterior
mean ``m``, the counts ``lam = lambda0 + n`` and ``nu = nu0 + n``, and the raw
sum of squares ``t`` (initialised to ``nu0*s0 + lambda0*mu0**2``).  The scale
statistic ``nu*S`` is recovered on demand as ``t - lam*m**2``.

All densities are returned on the log scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

LOG_PI = np.log(np.pi)
DEGENERACY_RTOL = 1e-12


class InvalidHyperparameterError(ValueError):
    pass


class NumericalDegeneracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Hyperparameters:
    """Prior hyperparameters shared by every cluster.

    ``mu0`` is per variable; the remaining three are scalars.
    """

    mu0: np.ndarray
    lambda0: float = 0.01
    nu0: float = 1.0
    s0: float = 0.2

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        object.__setattr__(self, "mu0", mu0)
        for name in ("lambda0", "nu0", "s0"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise InvalidHyperparameterError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        if not np.all(np.isfinite(mu0)):
            raise InvalidHyperparameterError("mu0 must be finite")

    @property
    def n_vars(self) -> int:
        return self.mu0.shape[0]

    @property
    def t0(self) -> np.ndarray:
        return self.nu0 * self.s0 + self.lambda0 * self.mu0**2

    @classmethod
    def from_data(cls, data, lambda0=0.01, nu0=1.0, s0=0.2, mu0=None) -> "Hyperparameters":
        """Default prior centred on the per-variable data mean.

        ``nu0`` defaults to 1, the dimension of each independent per-variable
        block.  Pass ``nu0="n_vars"`` to tie it to the total number of
        variables instead; with many variables that makes the variance prior
        very concentrated and the allocation pass over-splits.
        """
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be a 2-D array")
        if mu0 is None:
            mu0 = data.mean(axis=0)
        else:
            mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), (data.shape[1],))
        if nu0 == "n_vars":
            nu0 = float(data.shape[1])
        return cls(mu0=mu0, lambda0=lambda0, nu0=nu0, s0=s0)

    def subset(self, columns) -> "Hyperparameters":
        return Hyperparameters(self.mu0[columns], self.lambda0, self.nu0, self.s0)


@dataclass(frozen=True)
class ClusterState:
    """Sufficient statistics of one cluster's posterior, per variable.

    ``lam`` and ``nu`` are shared across variables because every variable sees
    the same observations.
    """

    m: np.ndarray
    lam: float
    nu: float
    t: np.ndarray
    count: int

    @property
    def n_vars(self) -> int:
        return self.m.shape[0]

    @property
    def nu_s(self) -> np.ndarray:
        return self.t - self.lam * self.m**2

    @property
    def s(self) -> np.ndarray:
        return self.nu_s / self.nu

    def checked_nu_s(self) -> np.ndarray:
        nu_s = self.nu_s
        bad = nu_s < DEGENERACY_RTOL * np.abs(self.t)
        if np.any(bad):
            d = int(np.flatnonzero(bad)[0])
            raise NumericalDegeneracyError(
                f"non-positive scale statistic nu*S={nu_s[d]!r} for variable {d} "
                f"(count={self.count})"
            )
        return nu_s


def prior_state(hyper: Hyperparameters, n_vars: int | None = None) -> ClusterState:
    if n_vars is not None and n_vars != hyper.n_vars:
        raise ValueError(f"hyperparameters describe {hyper.n_vars} variables, not {n_vars}")
    return ClusterState(
        m=hyper.mu0.copy(), lam=hyper.lambda0, nu=hyper.nu0, t=hyper.t0, count=0
    )


def _as_obs(state: ClusterState, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != state.m.shape:
        raise ValueError(f"observation has shape {x.shape}, state expects {state.m.shape}")
    return x


def update(state: ClusterState, x) -> ClusterState:
    """Absorb one observation."""
    x = _as_obs(state, x)
    lam = state.lam + 1.0
    return ClusterState(
        m=(state.lam * state.m + x) / lam,
        lam=lam,
        nu=state.nu + 1.0,
        t=state.t + x**2,
        count=state.count + 1,
    )


def downdate(state: ClusterState, x) -> ClusterState:
    """Remove an observation previously absorbed by :func:`update`."""
    if state.count < 1:
        raise ValueError("cannot downdate an empty cluster")
    x = _as_obs(state, x)
    lam = state.lam - 1.0
    return ClusterState(
        m=(state.lam * state.m - x) / lam,
        lam=lam,
        nu=state.nu - 1.0,
        t=state.t - x**2,
        count=state.count - 1,
    )


def state_from_data(hyper: Hyperparameters, data) -> ClusterState:
    """Batch equivalent of folding :func:`update` over the rows of ``data``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        data = data.reshape(-1, hyper.n_vars)
    elif data.shape[1] != hyper.n_vars:
        raise ValueError(f"data has {data.shape[1]} variables, hyperparameters have {hyper.n_vars}")
    n = data.shape[0]
    lam = hyper.lambda0 + n
    return ClusterState(
        m=(hyper.lambda0 * hyper.mu0 + data.sum(axis=0)) / lam,
        lam=lam,
        nu=hyper.nu0 + n,
        t=hyper.t0 + (data**2).sum(axis=0),
        count=n,
    )


def student_t_logpdf(x, loc, nu, lam, nu_s):
    """Log density of the posterior predictive t, elementwise.

    Scale-squared is ``(1 + lam) * S / lam`` with ``S = nu_s / nu``.
    """
    scaled = (1.0 + lam) * nu_s / lam  # nu * scale**2
    return (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * (LOG_PI + np.log(scaled))
        - 0.5 * (nu + 1.0) * np.log1p((x - loc) ** 2 / scaled)
    )


def predictive_log_density_per_var(state: ClusterState, x) -> np.ndarray:
    x = _as_obs(state, x)
    return student_t_logpdf(x, state.m, state.nu, state.lam, state.checked_nu_s())


def predictive_log_density(state: ClusterState, x) -> float:
    """Log predictive density of ``x`` summed over variables."""
    return float(predictive_log_density_per_var(state, x).sum())


def log_marginal_likelihood_per_var(state: ClusterState, hyper: Hyperparameters) -> np.ndarray:
    if state.count == 0:
        return np.zeros(state.n_vars)
    nu_s = state.checked_nu_s()
    nu0_s0 = hyper.nu0 * hyper.s0
    return (
        -0.5 * state.count * LOG_PI
        + gammaln(state.nu / 2.0)
        - gammaln(hyper.nu0 / 2.0)
        + 0.5 * (np.log(hyper.lambda0) + hyper.nu0 * np.log(nu0_s0))
        - 0.5 * (np.log(state.lam) + state.nu * np.log(nu_s))
    )


def log_marginal_likelihood(state: ClusterState, hyper: Hyperparameters) -> float:
    """Log evidence of the observations absorbed into ``state``, summed over variables."""
    return float(log_marginal_likelihood_per_var(state, hyper).sum())


def cluster_log_ml_table(data, z, hyper: Hyperparameters, n_clusters=None) -> np.ndarray:
    """Per-cluster, per-variable log marginal likelihoods for a labelled dataset.

    Returns an array of shape ``(K, D)``; row ``k`` is the evidence of the
    members of cluster ``k`` for each variable.  Clusters must be non-empty.
    """
    data = np.asarray(data, dtype=float)
    z = np.asarray(z)
    if n_clusters is None:
        n_clusters = int(z.max()) + 1 if z.size else 0
    counts = np.bincount(z, minlength=n_clusters).astype(float)
    if np.any(counts == 0):
        raise ValueError(f"empty cluster in partition: {np.flatnonzero(counts == 0).tolist()}")
    n_vars = data.shape[1]
    sums = np.zeros((n_clusters, n_vars))
    sq = np.zeros((n_clusters, n_vars))
    np.add.at(sums, z, data)
    np.add.at(sq, z, data**2)

    lam = hyper.lambda0 + counts[:, None]
    nu = hyper.nu0 + counts[:, None]
    m = (hyper.lambda0 * hyper.mu0 + sums) / lam
    t = hyper.t0 + sq
    nu_s = t - lam * m**2
    bad = nu_s < DEGENERACY_RTOL * np.abs(t)
    if np.any(bad):
        k, d = np.argwhere(bad)[0]
        raise NumericalDegeneracyError(
            f"non-positive scale statistic in cluster {k}, variable {d}"
        )
    nu0_s0 = hyper.nu0 * hyper.s0
    return (
        -0.5 * counts[:, None] * LOG_PI
        + gammaln(nu / 2.0)
        - gammaln(hyper.nu0 / 2.0)
        + 0.5 * (np.log(hyper.lambda0) + hyper.nu0 * np.log(nu0_s0))
        - 0.5 * (np.log(lam) + nu * np.log(nu_s))
    )
