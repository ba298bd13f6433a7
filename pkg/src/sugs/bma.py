"""Bayesian model averaging over fitted partitions.

Models are weighted by their marginal likelihood under a uniform model
prior, restricted to Occam's window, and their co-clustering matrices and
switch vectors are averaged with those weights.  :func:`summarize` turns the
averaged co-clustering matrix back into a single partition with
average-linkage clustering.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

DEFAULT_WINDOW = 20.0


@dataclass(frozen=True)
class ModelWeights:
    """Normalised log weights of the models inside Occam's window.

    ``window`` holds indices into the model list; ``log_weights[j]`` belongs
    to ``window[j]``.
    """

    log_weights: np.ndarray
    window: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _log_mls(models) -> np.ndarray:
    return np.array([m if np.isscalar(m) else m.log_ml for m in models], dtype=float)


def coclustering(z) -> np.ndarray:
    z = np.asarray(z)
    return (z[:, None] == z[None, :]).astype(float)


def occams_window(models, window_k: float = DEFAULT_WINDOW) -> np.ndarray:
    """Indices of models whose posterior is within a factor ``window_k`` of the best.

    ``models`` may be fitted models or raw log marginal likelihoods.
    """
    log_ml = _log_mls(models)
    if log_ml.size == 0:
        raise ValueError("empty model set")
    if window_k < 1:
        raise ValueError("window_k must be at least 1")
    gap = log_ml.max() - log_ml
    return np.flatnonzero(gap <= math.log(window_k))


def model_weights(models, window_k: float = DEFAULT_WINDOW) -> ModelWeights:
    log_ml = _log_mls(models)
    window = occams_window(log_ml, window_k)
    lw = log_ml[window]
    return ModelWeights(log_weights=lw - logsumexp(lw), window=window)


def bma_coclustering(models, weights: ModelWeights) -> np.ndarray:
    models = list(models)
    n = len(models[weights.window[0]].z)
    s = np.zeros((n, n))
    for idx, w in zip(weights.window, weights.weights):
        s += w * coclustering(models[idx].z)
    np.fill_diagonal(s, 1.0)
    return np.clip(s, 0.0, 1.0)


def bma_variable_scores(models, weights: ModelWeights) -> np.ndarray:
    models = list(models)
    f = np.zeros(len(models[weights.window[0]].gamma))
    for idx, w in zip(weights.window, weights.weights):
        f += w * np.asarray(models[idx].gamma, dtype=float)
    return np.clip(f, 0.0, 1.0)


def upgma(dist) -> list[tuple[int, int, float, int]]:
    """Average-linkage merge sequence for a square distance matrix.

    Each merge is ``(a, b, height, size)`` where ``a < b`` are slot indices; the
    merged cluster keeps slot ``a``.  Among equal distances the
    lexicographically smallest slot pair merges first.
    """
    d = np.array(dist, dtype=float)
    n = d.shape[0]
    np.fill_diagonal(d, np.inf)
    sizes = np.ones(n)
    merges = []
    for _ in range(n - 1):
        # d is symmetric with an infinite diagonal, so the first row-major
        # minimum is the lexicographically smallest pair with a < b
        flat = int(np.argmin(d))
        a, b = divmod(flat, n)
        height = d[a, b]
        na, nb = sizes[a], sizes[b]
        row = (na * d[a] + nb * d[b]) / (na + nb)
        d[a, :] = row
        d[:, a] = row
        d[a, a] = np.inf
        d[b, :] = np.inf
        d[:, b] = np.inf
        sizes[a] = na + nb
        merges.append((a, b, float(height), int(sizes[a])))
    return merges


def summarize(s_bmac, cut_height: float = 0.5) -> np.ndarray:
    """Single partition from a co-clustering matrix.

    Average-linkage on ``1 - s``; merges above ``cut_height`` are discarded.
    Labels are compact and numbered by first appearance.
    """
    s = np.asarray(s_bmac, dtype=float)
    n = s.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    parent = np.arange(n)
    for a, b, height, _ in upgma(1.0 - s):
        if height > cut_height:
            # average linkage is monotone, so every later merge is higher too
            break
        parent[parent == b] = a
    _, first, inverse = np.unique(parent, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64)


def write_matrix_csv(path, matrix, ids=None) -> None:
    """Dense row-major CSV with observation ids as the header row."""
    matrix = np.asarray(matrix)
    ids = [str(i) for i in (range(matrix.shape[0]) if ids is None else ids)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)
