# One greedy sequential pass over a 2-d, three-cluster sample.
# The partition depends on the order in which rows are visited.
import numpy as np

from sugs import BetaGrid, Hyperparameters, adjusted_rand_index, sugs_pass

rng = np.random.default_rng(7)
centres = np.array([[0.0, 0.0], [4.0, 4.0], [-4.0, 4.0]])
truth = rng.choice(3, size=90, p=[0.5, 0.3, 0.2])
x = centres[truth] + rng.normal(size=(90, 2))

hyper = Hyperparameters.from_data(x)
grid = BetaGrid.default()
gamma = np.ones(2, dtype=int)

for trial in range(5):
    order = rng.permutation(len(x))
    fit = sugs_pass(x, order, gamma, hyper, grid)
    top = grid.values[np.argmax(fit.beta_posterior.phi)]
    print(f"ordering {trial}: K={fit.n_clusters} sizes={fit.counts.tolist()} "
          f"ARI={adjusted_rand_index(truth, fit.z):.3f} most probable beta={top}")
