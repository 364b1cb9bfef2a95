#!/usr/bin/env python3
"""
Tests for the normalized hamming distance between stagings.
"""

import itertools
import sys

import numpy as np
import pytest

from metrics import context_intervention_distance, normalized_hamming, partition_distance
from staged_tree import DimensionMismatchError, Staging, VariableSpec, build_event_tree


def _brute_force(labels_a, labels_b):
    """Fewest relabelled vertices, trying every stage matching"""
    stages = max(labels_a.max(), labels_b.max()) + 1
    overlap = np.zeros((stages, stages), dtype=int)
    for a, b in zip(labels_a, labels_b):
        overlap[a, b] += 1
    kept = max(
        sum(overlap[row, column] for row, column in enumerate(permutation))
        for permutation in itertools.permutations(range(stages))
    )
    return len(labels_a) - kept


def test_partition_distance_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(100):
        size = int(rng.integers(1, 9))
        labels_a = rng.integers(0, min(size, 5), size)
        labels_b = rng.integers(0, min(size, 5), size)
        assert partition_distance(labels_a, labels_b) == _brute_force(labels_a, labels_b)


def test_partition_distance_ignores_label_names():
    assert partition_distance(np.array([0, 0, 1, 1]), np.array([1, 1, 0, 0])) == 0
    assert partition_distance(np.array([0, 0, 0, 0]), np.array([0, 1, 2, 3])) == 3
    with pytest.raises(DimensionMismatchError):
        partition_distance(np.array([0, 1]), np.array([0, 1, 2]))


def test_hamming_between_the_example_stagings(binary_tree, diamond_staging, context_staging):
    # one move out of 4 vertices at depth 2, one out of 8 at depth 3
    assert normalized_hamming(binary_tree, diamond_staging, context_staging) == pytest.approx(0.375)
    assert normalized_hamming(binary_tree, context_staging, diamond_staging) == pytest.approx(0.375)
    assert normalized_hamming(binary_tree, diamond_staging, diamond_staging) == 0.0


def test_hamming_requires_the_same_tree(binary_tree, diamond_staging):
    small = build_event_tree([VariableSpec.numbered(f"X{i}", 2) for i in range(1, 4)])
    with pytest.raises(DimensionMismatchError):
        normalized_hamming(small, diamond_staging, Staging.from_raw([[0], [0, 1], [0, 0, 1, 1]]))


def test_context_intervention_distance_is_not_available(binary_tree, diamond_staging):
    with pytest.raises(NotImplementedError):
        context_intervention_distance(binary_tree, diamond_staging, diamond_staging)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
