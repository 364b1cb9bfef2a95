"""
Conversions between DAGs and stagings over a fixed variable order:
the staged tree of a DAG and the minimal DAG of a staging.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from staged_tree import (
    DimensionMismatchError,
    EventTree,
    InvalidParametersError,
    InvalidVariableError,
    StagedTree,
    Staging,
    StagedTreeError,
    _dependent_coordinates,
    canonical_labels,
)

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Dag:
    """Parent sets over variables listed in a topological order"""

    names: Tuple[str, ...]
    parent_sets: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise InvalidVariableError(f"duplicate variable names in {list(self.names)}")
        if len(self.parent_sets) != len(self.names):
            raise DimensionMismatchError(
                f"{len(self.parent_sets)} parent sets for {len(self.names)} variables"
            )
        normalized = []
        for child, parents in enumerate(self.parent_sets):
            parents = tuple(int(parent) for parent in parents)
            if len(set(parents)) != len(parents):
                raise StagedTreeError(f"duplicate parents for {self.names[child]!r}: {parents}")
            if any(not 0 <= parent < child for parent in parents):
                raise StagedTreeError(
                    f"parents of {self.names[child]!r} must precede it in the order, got {parents}"
                )
            normalized.append(tuple(sorted(parents)))
        object.__setattr__(self, "parent_sets", tuple(normalized))

    @property
    def p(self) -> int:
        return len(self.names)

    def edges(self) -> List[Tuple[int, int]]:
        return [(parent, child) for child, parents in enumerate(self.parent_sets) for parent in parents]

    def named_edges(self) -> List[Tuple[str, str]]:
        return [(self.names[parent], self.names[child]) for parent, child in self.edges()]

    @property
    def n_edges(self) -> int:
        return sum(len(parents) for parents in self.parent_sets)

    def in_degree(self, child: int) -> int:
        return len(self.parent_sets[child])

    def is_subgraph_of(self, other: "Dag") -> bool:
        return self.names == other.names and all(
            set(mine) <= set(theirs) for mine, theirs in zip(self.parent_sets, other.parent_sets)
        )

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.names)
        graph.add_edges_from(self.named_edges())
        return graph

    @classmethod
    def from_edges(cls, names: Sequence[str], edges: Iterable[Tuple[int, int]]) -> "Dag":
        parents: List[List[int]] = [[] for _ in names]
        for parent, child in edges:
            parents[child].append(parent)
        return cls(tuple(names), tuple(tuple(group) for group in parents))

    @classmethod
    def from_named_edges(cls, names: Sequence[str], edges: Iterable[Tuple[str, str]]) -> "Dag":
        index = {name: position for position, name in enumerate(names)}
        try:
            return cls.from_edges(names, [(index[parent], index[child]) for parent, child in edges])
        except KeyError as e:
            raise InvalidVariableError(f"edge mentions unknown variable {e.args[0]!r}")

    @classmethod
    def empty(cls, names: Sequence[str]) -> "Dag":
        return cls(tuple(names), tuple(() for _ in names))

    @classmethod
    def complete(cls, names: Sequence[str]) -> "Dag":
        return cls(tuple(names), tuple(tuple(range(child)) for child in range(len(names))))


def max_in_degree(G: Dag) -> int:
    return max((len(parents) for parents in G.parent_sets), default=0)


def _check_dimensions(G: Dag, tree: EventTree):
    if G.p != tree.p:
        raise DimensionMismatchError(f"DAG has {G.p} variables, tree has {tree.p}")
    if G.names != tree.names:
        raise DimensionMismatchError(
            f"DAG order {list(G.names)} differs from tree order {list(tree.names)}"
        )


def _parent_configuration(tree: EventTree, depth: int, parents: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of x_parents for every depth-`depth` vertex"""
    labels = np.zeros(tree.n_vertices(depth), dtype=np.int64)
    for parent in parents:
        labels = labels * tree.cardinalities[parent] + tree.coordinate(depth, parent)
    return labels


def staged_tree_of_dag(G: Dag, tree: EventTree) -> Staging:
    """Stage vertices by their parent configuration"""
    _check_dimensions(G, tree)
    return Staging(tuple(
        _parent_configuration(tree, depth, G.parent_sets[depth]) for depth in range(tree.p)
    ))


def minimal_dag(tree: EventTree, staging: Staging) -> Dag:
    """i is a parent of j iff the depth-j stage function varies with coordinate i"""
    staging.check_tree(tree)
    parent_sets = tuple(
        tuple(_dependent_coordinates(staging.assignments[depth], tree.cardinalities[:depth]))
        for depth in range(tree.p)
    )
    return Dag(tree.names, parent_sets)


def is_k_parents(tree: EventTree, staging: Staging, k: int) -> bool:
    if k < 0:
        raise StagedTreeError(f"k must be >= 0, got {k}")
    return max_in_degree(minimal_dag(tree, staging)) <= k


def _check_tables(G: Dag, tables: Sequence[np.ndarray]) -> List[np.ndarray]:
    if len(tables) != G.p:
        raise DimensionMismatchError(f"{len(tables)} tables for {G.p} variables")
    tables = [np.asarray(table, dtype=np.float64) for table in tables]
    cardinalities = [table.shape[1] for table in tables]
    for child, table in enumerate(tables):
        configurations = math.prod(cardinalities[q] for q in G.parent_sets[child])
        if table.ndim != 2 or table.shape[0] != configurations:
            raise InvalidParametersError(
                f"table of {G.names[child]!r} has shape {table.shape}, "
                f"expected ({configurations}, {cardinalities[child]})"
            )
        if table.min() < 0 or np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_TOLERANCE):
            raise InvalidParametersError(f"table of {G.names[child]!r} is not row-stochastic")
    return tables


def bn_joint_of_dag(G: Dag, tables: Sequence[np.ndarray]) -> np.ndarray:
    """Joint P(x) = prod_k P(x_k | x_parents) over all outcomes, mixed-radix order.

    tables[k] has one row per parent configuration (parents ascending, first
    parent most significant) and one column per level of X_k.
    """
    tables = _check_tables(G, tables)
    cardinalities = [table.shape[1] for table in tables]
    joint = np.ones(cardinalities)
    for child, table in enumerate(tables):
        shape = [1] * G.p
        for axis in (*G.parent_sets[child], child):
            shape[axis] = cardinalities[axis]
        joint = joint * table.reshape(shape)
    return joint.ravel()


def bn_staged_tree(G: Dag, tree: EventTree, tables: Sequence[np.ndarray]) -> StagedTree:
    """T_G carrying the conditional tables of a BN as stage vectors"""
    _check_dimensions(G, tree)
    tables = _check_tables(G, tables)
    labels, params = [], []
    for depth in range(tree.p):
        raw = _parent_configuration(tree, depth, G.parent_sets[depth])
        canonical, representatives = canonical_labels(raw)
        labels.append(canonical)
        params.append(tables[depth][representatives])
    return StagedTree(tree, Staging(tuple(labels)), tuple(params))


# --- DAG file formats --------------------------------------------------------

class DagDocument(BaseModel):
    variables: List[str] = Field(..., description="Variables in topological order")
    parents: Dict[str, List[str]] = Field(..., description="Parent names of each variable")


def dag_to_text(G: Dag) -> str:
    # declaring every variable first pins the order on reload
    lines = list(G.names)
    lines += [f"{parent} -> {child}" for parent, child in G.named_edges()]
    return "\n".join(lines) + "\n"


def dag_from_text(text: str, names: Optional[Sequence[str]] = None) -> Dag:
    """Parse "parent -> child" lines; a bare name declares a variable.

    Without `names` the variables are ordered by the smallest-lexicographic
    topological order of first appearance.
    """
    graph = nx.DiGraph()
    seen: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            parent, child = (part.strip() for part in line.split("->", 1))
            if not parent or not child:
                raise StagedTreeError(f"line {number}: malformed edge {line!r}")
            for name in (parent, child):
                seen.setdefault(name, len(seen))
                graph.add_node(name)
            graph.add_edge(parent, child)
        else:
            seen.setdefault(line, len(seen))
            graph.add_node(line)
    return _dag_from_graph(graph, names, key=lambda name: seen[name])


def _dag_from_graph(graph: nx.DiGraph, names: Optional[Sequence[str]], key) -> Dag:
    if not nx.is_directed_acyclic_graph(graph):
        raise StagedTreeError(f"graph has a cycle: {nx.find_cycle(graph)}")
    if names is None:
        names = list(nx.lexicographical_topological_sort(graph, key=key))
    else:
        missing = set(graph.nodes) - set(names)
        if missing:
            raise InvalidVariableError(f"edges mention unknown variables {sorted(missing)}")
    return Dag.from_named_edges(names, graph.edges)


def dag_to_document(G: Dag) -> DagDocument:
    return DagDocument(
        variables=list(G.names),
        parents={G.names[child]: [G.names[q] for q in parents] for child, parents in enumerate(G.parent_sets)},
    )


def dag_from_document(document: DagDocument) -> Dag:
    graph = nx.DiGraph()
    graph.add_nodes_from(document.variables)
    for child, parents in document.parents.items():
        unknown = [name for name in (child, *parents) if name not in document.variables]
        if unknown:
            raise InvalidVariableError(f"adjacency mentions unknown variables {unknown}")
        graph.add_edges_from((parent, child) for parent in parents)
    position = {name: index for index, name in enumerate(document.variables)}
    G = _dag_from_graph(graph, None, key=lambda name: position[name])
    if list(G.names) != list(document.variables):
        logger.info(f"Variables re-listed in topological order {list(G.names)}")
    return G


def save_dag(G: Dag, path: Union[str, Path]):
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(dag_to_document(G).model_dump_json(indent=2) + "\n")
    else:
        path.write_text(dag_to_text(G))
    logger.info(f"💾 DAG with {G.n_edges} edges written to {path}")


def load_dag(path: Union[str, Path]) -> Dag:
    path = Path(path)
    if path.suffix == ".json":
        return dag_from_document(DagDocument.model_validate(json.loads(path.read_text())))
    return dag_from_text(path.read_text())
