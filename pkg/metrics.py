"""
Distances between stagings of the same event tree.
"""

import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from staged_tree import DimensionMismatchError, EventTree, Staging

logger = logging.getLogger(__name__)


def partition_distance(labels_a: np.ndarray, labels_b: np.ndarray) -> int:
    """Fewest vertices to relabel so two partitions coincide (exact matching)"""
    labels_a, labels_b = np.asarray(labels_a), np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise DimensionMismatchError(f"partitions over {labels_a.size} and {labels_b.size} vertices")
    stages_a, stages_b = int(labels_a.max()) + 1, int(labels_b.max()) + 1
    overlap = np.bincount(labels_a * stages_b + labels_b, minlength=stages_a * stages_b)
    overlap = overlap.reshape(stages_a, stages_b)
    rows, columns = linear_sum_assignment(overlap, maximize=True)
    return int(labels_a.size - overlap[rows, columns].sum())


def normalized_hamming(tree: EventTree, staging_a: Staging, staging_b: Staging) -> float:
    """Sum over depths of the fraction of vertices whose stage must change"""
    staging_a.check_tree(tree)
    staging_b.check_tree(tree)
    total = 0.0
    for depth in range(1, tree.p):
        moves = partition_distance(staging_a.assignments[depth], staging_b.assignments[depth])
        total += moves / tree.n_vertices(depth)
    return total


def context_intervention_distance(tree: EventTree, staging_a: Staging, staging_b: Staging) -> float:
    raise NotImplementedError(
        "context intervention distance is defined in an external reference and is not implemented"
    )
