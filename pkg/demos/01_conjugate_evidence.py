# Evidence of a small sample under the normal / inverse-chi-squared prior,
# computed three ways: closed form, sequential predictives, and the cluster table.
import numpy as np

from sugs import Hyperparameters
from sugs.conjugate import (
    cluster_log_ml_table,
    log_marginal_likelihood,
    predictive_log_density,
    prior_state,
    state_from_data,
    update,
)

rng = np.random.default_rng(1)
x = rng.normal(loc=[0.0, 3.0], scale=1.0, size=(8, 2))
hyper = Hyperparameters.from_data(x)
print("prior mean", hyper.mu0, "lambda0", hyper.lambda0, "nu0", hyper.nu0, "s0", hyper.s0)

state = state_from_data(hyper, x)
print("closed form log evidence:", log_marginal_likelihood(state, hyper))

# one observation at a time, adding the log predictive before each update
s, total = prior_state(hyper), 0.0
for row in x:
    total += predictive_log_density(s, row)
    s = update(s, row)
print("sum of sequential predictives:", total)

# splitting the rows into two groups scores each group separately
z = np.array([0, 0, 0, 0, 1, 1, 1, 1])
table = cluster_log_ml_table(x, z, hyper)
print("per cluster, per variable:\n", table)
print("two-group evidence:", table.sum())
