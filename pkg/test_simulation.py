#!/usr/bin/env python3
"""
Tests for random k-parents model generation and sequential sampling.
"""

import sys

import numpy as np
import pytest

from dag_bridge import is_k_parents, max_in_degree, minimal_dag, staged_tree_of_dag
from scoring import fit_mle
from simulation import (
    default_names,
    generate_k_parents,
    random_dag,
    random_k_parents_model,
    random_merge_staging,
    random_parameters,
    sample,
)
from staged_tree import (
    StagedTreeError,
    VariableSpec,
    atomic_probability,
    build_event_tree,
    leaf_distribution,
    saturated_staging,
)


def test_random_dag_respects_k_and_is_reproducible():
    for seed in range(20):
        G = random_dag(8, 2, seed)
        assert max_in_degree(G) <= 2
        assert G.names == default_names(8)
        assert random_dag(8, 2, seed).parent_sets == G.parent_sets
    assert random_dag(6, 0, 1).n_edges == 0
    with pytest.raises(StagedTreeError):
        random_dag(0, 2, 1)


def test_parent_counts_are_uniform():
    draws, k = 10000, 2
    counts = np.zeros((5, k + 1), dtype=int)
    for seed in range(draws):
        for child, parents in enumerate(random_dag(5, k, seed).parent_sets):
            counts[child, len(parents)] += 1
    assert counts[0].tolist() == [draws, 0, 0]
    for child in range(1, 5):
        options = min(k, child) + 1
        probability = 1.0 / options
        sigma = np.sqrt(draws * probability * (1.0 - probability))
        assert np.all(np.abs(counts[child, :options] - draws * probability) <= 3.0 * sigma)
        assert counts[child, options:].sum() == 0


def test_stage_vectors_are_uniform_on_the_simplex():
    tree = build_event_tree([VariableSpec.numbered("X1", 200), VariableSpec.numbered("X2", 3)])
    staging = saturated_staging(tree)
    vectors = np.vstack([random_parameters(tree, staging, seed).params[1] for seed in range(100)])
    assert vectors.shape == (20000, 3)
    # each coordinate of a uniform point on the 2-simplex is Beta(1, 2), variance 1/18
    sigma = np.sqrt(1.0 / 18.0 / vectors.shape[0])
    assert np.all(np.abs(vectors.mean(axis=0) - 1.0 / 3.0) <= 3.0 * sigma)
    assert np.allclose(vectors.sum(axis=1), 1.0, atol=1e-12)


def test_random_merge_coarsens(binary_tree):
    staging = saturated_staging(binary_tree)
    for seed in range(10):
        assert random_merge_staging(staging, 0.5, seed).is_coarsening_of(staging)
    assert random_merge_staging(staging, 0.0, 3).same_partition(staging)
    merged = random_merge_staging(staging, 1.0, 3)
    assert [merged.n_stages(depth) for depth in range(4)] == [1, 1, 1, 1]
    with pytest.raises(StagedTreeError):
        random_merge_staging(staging, 1.5, 3)


def test_random_parameters_are_distributions(binary_tree, diamond_staging):
    model = random_parameters(binary_tree, diamond_staging, seed=8)
    for matrix in model.params:
        assert np.allclose(matrix.sum(axis=1), 1.0)
        assert matrix.min() >= 0.0
    assert leaf_distribution(model).sum() == pytest.approx(1.0)


def test_generated_model_is_k_parents():
    for seed in range(10):
        generated = generate_k_parents(6, 2, seed=seed)
        model = generated.model
        assert is_k_parents(model.tree, model.staging, 2)
        assert minimal_dag(model.tree, model.staging).is_subgraph_of(generated.dag)
        assert model.staging.is_coarsening_of(staged_tree_of_dag(generated.dag, model.tree))


def test_generation_is_deterministic():
    first = random_k_parents_model(5, 2, cardinalities=[2, 3, 2, 2, 3], seed=42)
    second = random_k_parents_model(5, 2, cardinalities=[2, 3, 2, 2, 3], seed=42)
    assert first.tree.cardinalities == (2, 3, 2, 2, 3)
    assert first.staging.same_partition(second.staging)
    assert all(np.array_equal(a, b) for a, b in zip(first.params, second.params))
    with pytest.raises(StagedTreeError):
        random_k_parents_model(3, 1, cardinalities=[2, 2])


def test_distinct_seeds_give_distinct_stagings():
    distinct = sum(
        not random_k_parents_model(6, 2, seed=2 * pair).staging.same_partition(
            random_k_parents_model(6, 2, seed=2 * pair + 1).staging
        )
        for pair in range(100)
    )
    assert distinct >= 95


def test_fit_mle_recovers_the_generating_vectors(diamond_model):
    data = sample(diamond_model, 100000, seed=21)
    fitted = fit_mle(diamond_model.tree, diamond_model.staging, data)
    for truth, estimate in zip(diamond_model.params, fitted.params):
        assert np.max(np.abs(truth - estimate)) < 0.02


def test_k_zero_gives_the_empty_dag():
    model = random_k_parents_model(5, 0, seed=1)
    assert minimal_dag(model.tree, model.staging).n_edges == 0


def test_sample_is_reproducible(diamond_model):
    first = sample(diamond_model, 100, seed=5)
    assert first.n == 100
    assert np.array_equal(first.codes, sample(diamond_model, 100, seed=5).codes)
    assert sample(diamond_model, 0, seed=5).n == 0
    with pytest.raises(StagedTreeError):
        sample(diamond_model, -1, seed=5)


@pytest.mark.parametrize("seed", range(10))
def test_leaf_frequencies_match_atomic_probabilities(seed):
    model = random_k_parents_model(4, 2, seed=seed)
    n = 50000
    data = sample(model, n, seed=seed + 100)
    leaves = np.ravel_multi_index(tuple(data.codes.T), model.tree.cardinalities)
    observed = np.bincount(leaves, minlength=model.tree.n_leaves)
    for leaf, count in enumerate(observed):
        probability = atomic_probability(model, model.tree.prefix_of(model.p, leaf))
        sigma = np.sqrt(n * probability * (1.0 - probability))
        assert abs(count - n * probability) <= 4.0 * sigma + 1e-9


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
