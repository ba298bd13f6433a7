"""Synthetic Gaussian-mixture scenarios and clustering metrics."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ScenarioSpec:
    """Gaussian mixture on the first ``d_relevant`` variables, standard noise elsewhere.

    ``covariances`` holds one ``d_relevant x d_relevant`` matrix per component;
    ``None`` (for the whole list or one entry) means the identity.
    """

    n: int
    d_total: int
    d_relevant: int
    weights: list
    means: list
    covariances: list | None = None
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if not 0 <= self.d_relevant <= self.d_total:
            raise ValueError("d_relevant must lie in [0, d_total]")
        means = np.asarray(self.means, dtype=float).reshape(len(w), self.d_relevant)
        self.weights = w.tolist()
        self.means = means.tolist()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LabeledDataset:
    data: np.ndarray
    true_z: np.ndarray
    true_gamma: np.ndarray
    spec: ScenarioSpec | None = field(default=None, repr=False)

    def save(self, data_path, truth_path) -> None:
        """CSV of the data (header ``v0..v{D-1}``) and a JSON sidecar with the truth."""
        n, d = self.data.shape
        with open(data_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"v{j}" for j in range(d)])
            for row in self.data:
                writer.writerow([repr(float(v)) for v in row])
        truth = {
            "z": [int(v) for v in self.true_z],
            "gamma": [int(v) for v in self.true_gamma],
            "spec": None if self.spec is None else self.spec.to_dict(),
            "seed": None if self.spec is None else self.spec.seed,
        }
        Path(truth_path).write_text(json.dumps(truth, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, data_path, truth_path) -> "LabeledDataset":
        data = np.loadtxt(data_path, delimiter=",", skiprows=1, ndmin=2)
        truth = json.loads(Path(truth_path).read_text(encoding="utf-8"))
        spec = None if truth.get("spec") is None else ScenarioSpec(**truth["spec"])
        return cls(data, np.asarray(truth["z"]), np.asarray(truth["gamma"]), spec)


def simulate(spec: ScenarioSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    weights = np.asarray(spec.weights)
    means = np.asarray(spec.means)
    n_comp = weights.size
    z = rng.choice(n_comp, size=spec.n, p=weights)
    data = rng.standard_normal((spec.n, spec.d_total))
    covs = spec.covariances or [None] * n_comp
    for k in range(n_comp):
        rows = z == k
        block = data[rows, : spec.d_relevant]
        if covs[k] is not None:
            chol = np.linalg.cholesky(np.asarray(covs[k], dtype=float))
            block = block @ chol.T
        data[rows, : spec.d_relevant] = block + means[k]
    gamma = np.zeros(spec.d_total, dtype=np.int8)
    gamma[: spec.d_relevant] = 1
    return LabeledDataset(data=data, true_z=z, true_gamma=gamma, spec=spec)


def three_component_spec(n: int, d_total: int, relevant_fraction: float, seed: int = 0) -> ScenarioSpec:
    """Weights 0.5/0.3/0.2 centred at 0, +2 and -2 on every relevant variable."""
    d_rel = int(round(relevant_fraction * d_total))
    means = [[0.0] * d_rel, [2.0] * d_rel, [-2.0] * d_rel]
    return ScenarioSpec(n, d_total, d_rel, [0.5, 0.3, 0.2], means, seed=seed)


def correlated_component_spec(seed: int = 0) -> ScenarioSpec:
    """30 points in 2 relevant dimensions; the third component has correlated noise."""
    return ScenarioSpec(
        n=30,
        d_total=4,
        d_relevant=2,
        weights=[0.4, 0.4, 0.2],
        means=[[2.0, 2.0], [-3.0, -3.0], [-3.0, 4.0]],
        covariances=[None, None, [[2.0, 1.0], [1.0, 2.0]]],
        seed=seed,
    )


def _comb2(a):
    a = np.asarray(a, dtype=float)
    return a * (a - 1.0) / 2.0


def adjusted_rand_index(z1, z2) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table.

    Returns 1 when both partitions are trivial in the same way (expected and
    maximum index coincide and the partitions agree), 0 when only the
    expected index is attainable.
    """
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    if z1.shape != z2.shape:
        raise ValueError("partitions must have equal length")
    _, a = np.unique(z1, return_inverse=True)
    _, b = np.unique(z2, return_inverse=True)
    table = np.zeros((a.max(initial=-1) + 1, b.max(initial=-1) + 1))
    np.add.at(table, (a, b), 1)
    n = z1.size
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(n)
    if total == 0:
        return 1.0
    expected = rows * cols / total
    max_index = 0.5 * (rows + cols)
    if max_index == expected:
        return 1.0 if index == max_index else 0.0
    return float((index - expected) / (max_index - expected))


def variable_recovery(gamma, truth) -> tuple[float, float]:
    """Fractions of truly relevant variables switched on and of irrelevant ones switched off.

    A fraction over an empty set is reported as 1.
    """
    gamma = np.asarray(gamma).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if gamma.shape != truth.shape:
        raise ValueError("switch vectors must have equal length")
    rel = gamma[truth].mean() if truth.any() else 1.0
    irr = (~gamma[~truth]).mean() if (~truth).any() else 1.0
    return float(rel), float(irr)


def summarize_replicates(values) -> dict:
    """Median with lower and upper quartiles."""
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3)}
