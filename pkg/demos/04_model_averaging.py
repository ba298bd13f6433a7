# Averaging over models near the best one. Here the data break the
# independence assumption: one component has correlated variables.
import numpy as np

from sugs import (
    SearchConfig,
    adjusted_rand_index,
    bma_coclustering,
    bma_variable_scores,
    full_search,
    model_weights,
    select_best,
    simulate,
    summarize,
)
from sugs.evaluate import correlated_component_spec

ds = simulate(correlated_component_spec(seed=1))
models = full_search(ds.data, SearchConfig(n_subsamples=10, n_orderings=30, p1_fraction=0.5, seed=1)).models

best = select_best(models)
weights = model_weights(models, window_k=20)
print(f"{len(weights.window)} of {len(models)} models inside the window")

s = bma_coclustering(models, weights)
z_bma = summarize(s, cut_height=0.5)
print("best model:  K =", best.n_clusters, " ARI =", round(adjusted_rand_index(ds.true_z, best.z), 3))
print("averaged:    K =", z_bma.max() + 1, " ARI =", round(adjusted_rand_index(ds.true_z, z_bma), 3))
print("variable scores", np.round(bma_variable_scores(models, weights), 3))

np.set_printoptions(precision=2, linewidth=150)
order = np.argsort(ds.true_z, kind="stable")
print("co-clustering, rows sorted by true component (first 10):")
print(s[np.ix_(order, order)][:10, :10])
