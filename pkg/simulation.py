"""
Random k-parents staged trees and sequential sampling.

Every operation is a pure function of its parameters and seed. Randomness
comes from numpy's PCG64 generator (`numpy.random.default_rng`); composite
generators split their seed with `SeedSequence.spawn` so each step draws
from an independent stream.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from dag_bridge import Dag, staged_tree_of_dag
from data import Dataset
from staged_tree import (
    EventTree,
    StagedTree,
    Staging,
    StagedTreeError,
    VariableSpec,
    build_event_tree,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def default_names(p: int):
    return tuple(f"X{position + 1}" for position in range(p))


def random_dag(p: int, k: int, seed: SeedLike, names: Optional[Sequence[str]] = None) -> Dag:
    """Per variable j: a uniform parent count in 0..min(k, j-1), then a uniform subset"""
    if p < 1 or k < 0:
        raise StagedTreeError(f"random_dag needs p >= 1 and k >= 0, got p={p}, k={k}")
    rng = _rng(seed)
    parent_sets = []
    for child in range(p):
        count = int(rng.integers(0, min(k, child) + 1))
        chosen = rng.choice(child, size=count, replace=False) if count else []
        parent_sets.append(tuple(sorted(int(parent) for parent in chosen)))
    return Dag(tuple(names) if names is not None else default_names(p), tuple(parent_sets))


def random_merge_staging(staging: Staging, merge_prob: float = 0.5, seed: SeedLike = 0) -> Staging:
    """Visit stages in shuffled order; each after the first joins a retained stage with merge_prob"""
    if not 0.0 <= merge_prob <= 1.0:
        raise StagedTreeError(f"merge_prob must lie in [0, 1], got {merge_prob}")
    rng = _rng(seed)
    merged = []
    for depth, labels in enumerate(staging.assignments):
        visit = rng.permutation(staging.n_stages(depth))
        target = np.arange(visit.size)
        retained = [int(visit[0])]
        for stage in visit[1:]:
            if rng.random() < merge_prob:
                target[stage] = retained[int(rng.integers(len(retained)))]
            else:
                retained.append(int(stage))
        merged.append(target[labels])
    return Staging(tuple(merged))


def random_parameters(tree: EventTree, staging: Staging, seed: SeedLike) -> StagedTree:
    """Stage vectors uniform on their simplex (normalized standard exponentials)"""
    staging.check_tree(tree)
    rng = _rng(seed)
    params = []
    for depth in range(tree.p):
        draws = rng.standard_exponential((staging.n_stages(depth), tree.cardinalities[depth]))
        params.append(draws / draws.sum(axis=1, keepdims=True))
    return StagedTree(tree, staging, tuple(params))


def sample(model: StagedTree, n: int, seed: SeedLike) -> Dataset:
    """n independent root-to-leaf walks drawing each X_i from the current stage vector"""
    if n < 0:
        raise StagedTreeError(f"sample size must be >= 0, got {n}")
    rng = _rng(seed)
    codes = np.zeros((n, model.p), dtype=np.int64)
    vertex = np.zeros(n, dtype=np.int64)
    for depth, cardinality in enumerate(model.tree.cardinalities):
        vectors = model.params[depth][model.staging.assignments[depth][vertex]]
        uniform = rng.random(n)
        drawn = (uniform[:, None] >= np.cumsum(vectors, axis=1)).sum(axis=1)
        drawn = np.minimum(drawn, cardinality - 1)
        codes[:, depth] = drawn
        vertex = vertex * cardinality + drawn
    return Dataset(model.tree.variables, codes)


@dataclass(frozen=True)
class GeneratedModel:
    dag: Dag
    model: StagedTree


def _cardinalities(p: int, cardinalities: Union[int, Sequence[int]]) -> Sequence[int]:
    if isinstance(cardinalities, int):
        return [cardinalities] * p
    cardinalities = list(cardinalities)
    if len(cardinalities) != p:
        raise StagedTreeError(f"{len(cardinalities)} cardinalities given for p={p}")
    return cardinalities


def generate_k_parents(p: int, k: int, cardinalities: Union[int, Sequence[int]] = 2,
                       merge_prob: float = 0.5, seed: SeedLike = 0) -> GeneratedModel:
    """random_dag -> staged_tree_of_dag -> random_merge_staging -> random_parameters"""
    if isinstance(seed, (np.random.Generator, np.random.SeedSequence)):
        streams = seed.spawn(3)
    else:
        streams = np.random.SeedSequence(seed).spawn(3)
    names = default_names(p)
    tree = build_event_tree([
        VariableSpec.numbered(name, cardinality)
        for name, cardinality in zip(names, _cardinalities(p, cardinalities))
    ])
    dag = random_dag(p, k, streams[0], names)
    staging = random_merge_staging(staged_tree_of_dag(dag, tree), merge_prob, streams[1])
    model = random_parameters(tree, staging, streams[2])
    logger.debug(
        f"Generated {k}-parents model over {p} variables: {dag.n_edges} DAG edges, "
        f"{staging.total_stages} stages"
    )
    return GeneratedModel(dag, model)


def random_k_parents_model(p: int, k: int, cardinalities: Union[int, Sequence[int]] = 2,
                           merge_prob: float = 0.5, seed: SeedLike = 0) -> StagedTree:
    return generate_k_parents(p, k, cardinalities, merge_prob, seed).model
