"""
Shared fixtures: the four-variable binary tree drawn in the usual examples,
its DAG-equivalent staging, a finer staging whose minimal DAG is complete,
and a fitted model over it.
"""

import numpy as np
import pytest

from dag_bridge import Dag
from staged_tree import StagedTree, Staging, VariableSpec, build_event_tree


@pytest.fixture
def binary_tree():
    return build_event_tree([VariableSpec.numbered(f"X{i}", 2) for i in range(1, 5)])


@pytest.fixture
def diamond_dag():
    """X1 -> X2, X1 -> X3, X2 -> X4, X3 -> X4"""
    return Dag.from_edges(("X1", "X2", "X3", "X4"), [(0, 1), (0, 2), (1, 3), (2, 3)])


@pytest.fixture
def diamond_staging():
    # {v3,v4} {v5,v6} at depth 2; {v7,v11} {v8,v12} {v9,v13} {v10,v14} at depth 3
    return Staging.from_raw([[0], [0, 1], [0, 0, 1, 1], [0, 1, 2, 3, 0, 1, 2, 3]])


@pytest.fixture
def context_staging():
    """Same depths 0-1; v5, v6 split at depth 2 and v10, v14 split at depth 3"""
    return Staging.from_raw([[0], [0, 1], [0, 0, 1, 2], [0, 1, 2, 3, 0, 1, 2, 4]])


@pytest.fixture
def diamond_model(binary_tree, diamond_staging):
    params = (
        np.array([[0.3, 0.7]]),
        np.array([[0.2, 0.8], [0.6, 0.4]]),
        np.array([[0.5, 0.5], [0.1, 0.9]]),
        np.array([[0.9, 0.1], [0.4, 0.6], [0.25, 0.75], [0.7, 0.3]]),
    )
    return StagedTree(binary_tree, diamond_staging, params)
