import hashlib
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import pair_counting_ari, set_partitions
from sugs.evaluate import (
    LabeledDataset,
    ScenarioSpec,
    adjusted_rand_index,
    correlated_component_spec,
    simulate,
    summarize_replicates,
    three_component_spec,
    variable_recovery,
)


class TestARI:
    def test_identical(self):
        assert adjusted_rand_index([0, 0, 1, 2], [5, 5, 3, 1]) == 1.0

    def test_one_cluster_vs_singletons(self):
        for n in (2, 3, 7):
            assert adjusted_rand_index([0] * n, list(range(n))) == 0.0

    def test_hand_case(self):
        assert adjusted_rand_index([1, 1, 2, 2], [1, 1, 1, 2]) == pytest.approx(pair_counting_ari([1, 1, 2, 2], [1, 1, 1, 2]))

    @pytest.mark.parametrize("n", range(1, 6))
    def test_exhaustive_against_pair_counting(self, n):
        parts = list(set_partitions(n))
        for a, b in itertools.product(parts, repeat=2):
            assert adjusted_rand_index(a, b) == pytest.approx(pair_counting_ari(a, b), abs=1e-12)

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=30), st.permutations(range(4)))
    def test_symmetric_and_relabel_invariant(self, pairs, perm):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        v = adjusted_rand_index(a, b)
        assert v == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
        assert v == pytest.approx(adjusted_rand_index(np.array(perm)[a], b), abs=1e-12)
        assert -1.0 <= v <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([0, 1], [0])


class TestVariableRecovery:
    truth = np.array([1, 1, 0, 0, 0])

    def test_cases(self):
        assert variable_recovery(self.truth, self.truth) == (1.0, 1.0)
        assert variable_recovery(np.ones(5), self.truth) == (1.0, 0.0)
        assert variable_recovery(1 - self.truth, self.truth) == (0.0, 0.0)
        assert variable_recovery([1, 0, 1, 0, 0], self.truth) == (0.5, pytest.approx(2 / 3))


class TestSimulate:
    def test_three_component_shape(self):
        ds = simulate(three_component_spec(100, 200, 0.5, seed=0))
        assert ds.data.shape == (100, 200)
        assert ds.true_gamma.sum() == 100 and ds.true_gamma[:100].all()
        assert set(np.unique(ds.true_z)) <= {0, 1, 2}

    def test_component_means(self):
        ds = simulate(three_component_spec(3000, 10, 0.3, seed=1))
        for k, mu in enumerate((0.0, 2.0, -2.0)):
            rows = ds.data[ds.true_z == k]
            np.testing.assert_allclose(rows[:, :3].mean(), mu, atol=0.05)
            np.testing.assert_allclose(rows[:, 3:].mean(), 0.0, atol=0.05)
        np.testing.assert_allclose(np.bincount(ds.true_z) / 3000, [0.5, 0.3, 0.2], atol=0.03)

    def test_correlated_component(self):
        spec = correlated_component_spec(seed=2)
        assert (spec.n, spec.d_total, spec.d_relevant) == (30, 4, 2)
        big = ScenarioSpec(20000, 4, 2, [0.0, 0.0, 1.0], spec.means, spec.covariances, seed=3)
        cov = np.cov(simulate(big).data[:, :2].T)
        np.testing.assert_allclose(cov, [[2, 1], [1, 2]], atol=0.1)

    def test_single_component(self):
        ds = simulate(ScenarioSpec(50, 3, 1, [1.0, 0.0, 0.0], [[0.0], [1.0], [2.0]], seed=4))
        assert (ds.true_z == 0).all()

    def test_seeded(self):
        digest = lambda s: hashlib.sha256(simulate(three_component_spec(20, 5, 0.4, seed=s)).data.tobytes()).hexdigest()
        assert digest(7) == digest(7)
        assert digest(7) != digest(8)

    @pytest.mark.parametrize("kwargs", [dict(weights=[0.5, 0.4]), dict(d_relevant=6)])
    def test_invalid_spec(self, kwargs):
        base = dict(n=10, d_total=5, d_relevant=1, weights=[0.5, 0.5], means=[[0.0], [1.0]])
        base.update(kwargs)
        with pytest.raises(ValueError):
            ScenarioSpec(**base)


def test_dataset_round_trip(tmp_path):
    ds = simulate(correlated_component_spec(seed=5))
    ds.save(tmp_path / "data.csv", tmp_path / "truth.json")
    back = LabeledDataset.load(tmp_path / "data.csv", tmp_path / "truth.json")
    np.testing.assert_array_equal(back.data, ds.data)
    np.testing.assert_array_equal(back.true_z, ds.true_z)
    np.testing.assert_array_equal(back.true_gamma, ds.true_gamma)
    assert back.spec == ds.spec


def test_summarize_replicates():
    assert summarize_replicates([1, 2, 3, 4, 5]) == {"median": 3.0, "q1": 2.0, "q3": 4.0}
