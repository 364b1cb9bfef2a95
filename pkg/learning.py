"""
Structure search: backward hill-climbing over stage merges (BHC), BIC
hill-climbing over DAGs with an in-degree cap, and the k-parents pipeline
that chains the two.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from config import settings
from dag_bridge import Dag, max_in_degree, minimal_dag, staged_tree_of_dag
from data import Dataset, aggregate_counts, vertex_counts
from scoring import (
    EmptyDatasetError,
    Score,
    count_dof,
    family_bic,
    fit_mle,
    score_model,
    stage_loglik_terms,
)
from staged_tree import (
    EventTree,
    InvalidVariableError,
    StagedTree,
    Staging,
    StagedTreeError,
    build_event_tree,
    saturated_staging,
    stage_id,
)

logger = logging.getLogger(__name__)

# smallest BIC decrease a move must achieve to be accepted
MIN_IMPROVEMENT = 1e-9

METHODS = ("kparents", "bhc-saturated", "dag-only")


class SizeGuardError(StagedTreeError):
    pass


class MergeStep(BaseModel):
    depth: int = Field(..., description="Depth of the merged stages")
    stage_a: str = Field(..., description="Surviving stage ID (input staging numbering)")
    stage_b: str = Field(..., description="Stage ID absorbed into stage_a")
    bic: float = Field(..., description="BIC after the merge")


class SearchTrace(BaseModel):
    initial_bic: float = Field(..., description="BIC of the starting staging")
    final_bic: float = Field(..., description="BIC of the returned staging")
    iterations: List[MergeStep] = Field(default_factory=list, description="Merges in order")
    build_time: float = Field(0.0, description="Seconds spent building the starting tree")
    search_time: float = Field(0.0, description="Seconds spent in the search")


class _DepthMerges:
    """Stage counts of one depth with each stage's best merge partner cached.

    Row a only pairs with partners b > a, so (a, best_partner[a]) is the
    lexicographically smallest pair among equal BIC changes of that row.
    """

    def __init__(self, counts: np.ndarray, n: int):
        self.counts = np.asarray(counts, dtype=np.float64).copy()
        size = self.counts.shape[0]
        self.active = np.ones(size, dtype=bool)
        self.terms = stage_loglik_terms(self.counts)
        self.penalty = (self.counts.shape[1] - 1) * math.log(n)
        self.owner = np.arange(size)
        self.best_delta = np.full(size, np.inf)
        self.best_partner = np.full(size, -1)
        for row in range(size):
            self._refresh(row)

    def _deltas(self, rows: np.ndarray, stage: int) -> np.ndarray:
        merged = self.counts[rows] + self.counts[stage]
        gain = stage_loglik_terms(merged) - self.terms[rows] - self.terms[stage]
        return -2.0 * gain - self.penalty

    def _refresh(self, row: int):
        partners = np.flatnonzero(self.active[row + 1:]) + row + 1
        if not self.active[row] or partners.size == 0:
            self.best_delta[row], self.best_partner[row] = np.inf, -1
            return
        deltas = self._deltas(partners, row)
        best = int(np.argmin(deltas))
        self.best_delta[row], self.best_partner[row] = deltas[best], partners[best]

    def best(self) -> Tuple[float, int, int]:
        row = int(np.argmin(self.best_delta))
        return float(self.best_delta[row]), row, int(self.best_partner[row])

    def merge(self, a: int, b: int):
        self.counts[a] += self.counts[b]
        self.counts[b] = 0.0
        self.active[b] = False
        self.terms[a] = stage_loglik_terms(self.counts[a])
        self.terms[b] = 0.0
        self.owner[self.owner == b] = a
        self.best_delta[b], self.best_partner[b] = np.inf, -1
        stale = np.flatnonzero(self.active & ((self.best_partner == a) | (self.best_partner == b)))
        for row in stale:
            self._refresh(int(row))
        self._refresh(a)
        # rows before a may now prefer the merged stage
        lower = np.flatnonzero(self.active[:a])
        if lower.size:
            deltas = self._deltas(lower, a)
            current = self.best_delta[lower]
            better = (deltas < current) | ((deltas == current) & (a < self.best_partner[lower]))
            self.best_delta[lower[better]] = deltas[better]
            self.best_partner[lower[better]] = a


def bhc(tree: EventTree, initial_staging: Staging, data: Dataset) -> Tuple[Staging, SearchTrace]:
    """Greedily apply the merge with the largest BIC decrease until none decreases BIC"""
    if data.n == 0:
        raise EmptyDatasetError("backward hill-climbing needs at least one record")
    initial_staging.check_tree(tree)
    started = time.perf_counter()
    stage_counts = aggregate_counts(vertex_counts(data, tree), initial_staging)
    loglik = float(sum(stage_loglik_terms(counts).sum() for counts in stage_counts))
    current_bic = -2.0 * loglik + count_dof(tree, initial_staging) * math.log(data.n)
    depths = [_DepthMerges(counts, data.n) for counts in stage_counts]
    trace = SearchTrace(initial_bic=current_bic, final_bic=current_bic)

    while True:
        chosen: Optional[Tuple[float, int, int, int]] = None
        for depth, state in enumerate(depths):
            delta, a, b = state.best()
            if chosen is None or delta < chosen[0]:
                chosen = (delta, depth, a, b)
        delta, depth, a, b = chosen
        if not delta < -MIN_IMPROVEMENT:
            break
        depths[depth].merge(a, b)
        current_bic += delta
        trace.iterations.append(MergeStep(
            depth=depth, stage_a=stage_id(depth, a), stage_b=stage_id(depth, b), bic=current_bic
        ))
        logger.debug(f"Merged stages {a} and {b} at depth {depth}: BIC {current_bic:.4f}")

    staging = Staging(tuple(
        state.owner[labels] for state, labels in zip(depths, initial_staging.assignments)
    ))
    trace.final_bic = current_bic
    trace.search_time = time.perf_counter() - started
    logger.info(
        f"🔍 BHC finished after {len(trace.iterations)} merges: "
        f"BIC {trace.initial_bic:.3f} -> {trace.final_bic:.3f}"
    )
    return staging, trace


def _resolve_order(names: Tuple[str, ...], order: Optional[Sequence[str]]) -> Optional[Dict[int, int]]:
    if order is None:
        return None
    order = list(order)
    if sorted(order) != sorted(names) or len(set(order)) != len(order):
        raise InvalidVariableError(f"order {order} is not a permutation of {list(names)}")
    return {names.index(name): rank for rank, name in enumerate(order)}


def hc_dag(data: Dataset, max_parents: Optional[int] = None, order: Optional[Sequence[str]] = None,
           forced_leaves: Iterable[str] = ()) -> Dag:
    """Add/delete/reverse hill-climbing from the empty DAG, minimizing BN BIC"""
    p = data.p
    k = p - 1 if max_parents is None else int(max_parents)
    if k < 0:
        raise StagedTreeError(f"max_parents must be >= 0, got {k}")
    forced: FrozenSet[int] = frozenset()
    for name in forced_leaves:
        if name not in data.names:
            raise InvalidVariableError(f"forced leaf {name!r} is not a column; known: {list(data.names)}")
        forced |= {data.names.index(name)}
    if data.n == 0:
        raise EmptyDatasetError("DAG search needs at least one record")
    rank = _resolve_order(data.names, order)

    cache: Dict[Tuple[int, FrozenSet[int]], float] = {}

    def local(child: int, parents: FrozenSet[int]) -> float:
        key = (child, parents)
        if key not in cache:
            cache[key] = family_bic(data, child, sorted(parents))
        return cache[key]

    graph = nx.DiGraph()
    graph.add_nodes_from(range(p))
    parents: List[FrozenSet[int]] = [frozenset() for _ in range(p)]
    current = [local(child, parents[child]) for child in range(p)]

    while True:
        best_delta, best_move = -MIN_IMPROVEMENT, None
        for i in range(p):
            for j in range(p):
                if i == j:
                    continue
                if i in parents[j]:
                    delta = local(j, parents[j] - {i}) - current[j]
                    if delta < best_delta:
                        best_delta, best_move = delta, ("delete", i, j)
                    if rank is not None or j in forced or len(parents[i]) >= k:
                        continue
                    graph.remove_edge(i, j)
                    acyclic = not nx.has_path(graph, i, j)
                    graph.add_edge(i, j)
                    if acyclic:
                        delta = (local(j, parents[j] - {i}) - current[j]
                                 + local(i, parents[i] | {j}) - current[i])
                        if delta < best_delta:
                            best_delta, best_move = delta, ("reverse", i, j)
                else:
                    if i in forced or len(parents[j]) >= k or i in parents[j]:
                        continue
                    if rank is not None:
                        if rank[i] > rank[j]:
                            continue
                    elif nx.has_path(graph, j, i):
                        continue
                    delta = local(j, parents[j] | {i}) - current[j]
                    if delta < best_delta:
                        best_delta, best_move = delta, ("add", i, j)
        if best_move is None:
            break
        move, i, j = best_move
        if move == "add":
            parents[j] = parents[j] | {i}
            graph.add_edge(i, j)
        elif move == "delete":
            parents[j] = parents[j] - {i}
            graph.remove_edge(i, j)
        else:
            parents[j] = parents[j] - {i}
            parents[i] = parents[i] | {j}
            graph.remove_edge(i, j)
            graph.add_edge(j, i)
            current[i] = local(i, parents[i])
        current[j] = local(j, parents[j])
        logger.debug(f"hc_dag {move} {data.names[i]} -> {data.names[j]} (ΔBIC {best_delta:.4f})")

    if rank is not None:
        positions = sorted(range(p), key=lambda column: rank[column])
    else:
        positions = list(nx.lexicographical_topological_sort(graph))
    new_index = {column: position for position, column in enumerate(positions)}
    dag = Dag.from_edges(
        [data.names[column] for column in positions],
        [(new_index[u], new_index[v]) for u, v in graph.edges],
    )
    logger.info(f"🕸️  Learned DAG with {dag.n_edges} edges, max in-degree {max_in_degree(dag)}")
    return dag


def learn_k_parents(data: Dataset, k: int, forced_leaves: Iterable[str] = (),
                    order: Optional[Sequence[str]] = None,
                    dag: Optional[Dag] = None) -> Tuple[StagedTree, Dag, SearchTrace]:
    """(i) learn a DAG with at most k parents, (ii) build T_G, (iii) run BHC.

    A supplied `dag` replaces step (i).
    """
    if k < 1:
        raise StagedTreeError(f"k must be >= 1, got {k}")
    if data.n == 0:
        raise EmptyDatasetError("k-parents learning needs at least one record")
    started = time.perf_counter()
    if dag is None:
        dag = hc_dag(data, k, order, forced_leaves)
    elif max_in_degree(dag) > k:
        raise StagedTreeError(f"supplied DAG has in-degree {max_in_degree(dag)} > k={k}")
    ordered = data.select(dag.names)
    tree = build_event_tree(ordered.schema)
    initial = staged_tree_of_dag(dag, tree)
    build_time = time.perf_counter() - started
    staging, trace = bhc(tree, initial, ordered)
    trace.build_time = build_time
    return fit_mle(tree, staging, ordered), dag, trace


def learn_dag_only(data: Dataset, k: Optional[int] = None, forced_leaves: Iterable[str] = (),
                   order: Optional[Sequence[str]] = None,
                   dag: Optional[Dag] = None) -> Tuple[StagedTree, Dag, SearchTrace]:
    """T_G of the learned DAG, fitted without any merging"""
    started = time.perf_counter()
    if dag is None:
        dag = hc_dag(data, k, order, forced_leaves)
    ordered = data.select(dag.names)
    tree = build_event_tree(ordered.schema)
    staging = staged_tree_of_dag(dag, tree)
    model = fit_mle(tree, staging, ordered)
    bic = score_model(model, ordered).bic if ordered.n else math.nan
    trace = SearchTrace(initial_bic=bic, final_bic=bic, build_time=time.perf_counter() - started)
    return model, dag, trace


def check_saturated_size(tree: EventTree, max_leaves: Optional[int] = None, force: bool = False):
    limit = settings.saturated_max_leaves if max_leaves is None else max_leaves
    if tree.n_leaves > limit and not force:
        raise SizeGuardError(
            f"the saturated tree over {tree.p} variables has {tree.n_leaves} leaves, above the "
            f"limit of {limit}; pass --force (force=True) to run it anyway"
        )


def bhc_saturated(data: Dataset, force: bool = False,
                  max_leaves: Optional[int] = None) -> Tuple[StagedTree, SearchTrace]:
    """BHC from the saturated staging, refused above the leaf limit unless forced"""
    tree = build_event_tree(data.schema)
    check_saturated_size(tree, max_leaves, force)
    started = time.perf_counter()
    initial = saturated_staging(tree)
    build_time = time.perf_counter() - started
    staging, trace = bhc(tree, initial, data)
    trace.build_time = build_time
    return fit_mle(tree, staging, data), trace


@dataclass(frozen=True)
class LearningResult:
    method: str
    model: StagedTree
    dag: Dag
    trace: SearchTrace
    score: Score


def learn(data: Dataset, method: str = "kparents", k: Optional[int] = 2,
          forced_leaves: Iterable[str] = (), order: Optional[Sequence[str]] = None,
          force: bool = False, max_leaves: Optional[int] = None) -> LearningResult:
    if data.n == 0:
        raise EmptyDatasetError("learning needs at least one record")
    forced_leaves = tuple(forced_leaves)
    if method == "bhc-saturated":
        if forced_leaves:
            raise StagedTreeError(
                f"forced leaves {list(forced_leaves)} need a DAG search; bhc-saturated has none"
            )
        if order is not None:
            _resolve_order(data.names, order)
            data = data.select(order)
    if method == "kparents":
        model, dag, trace = learn_k_parents(data, k if k is not None else max(data.p - 1, 1), forced_leaves, order)
    elif method == "dag-only":
        model, dag, trace = learn_dag_only(data, k, forced_leaves, order)
    elif method == "bhc-saturated":
        model, trace = bhc_saturated(data, force, max_leaves)
        dag = minimal_dag(model.tree, model.staging)
    else:
        raise StagedTreeError(f"unknown method {method!r}; choose from {list(METHODS)}")
    return LearningResult(method, model, dag, trace, score_model(model, data.select(model.tree.names)))
