"""
Graphviz DOT export for DAGs and staged trees (stage = fill color).
"""

import logging
from pathlib import Path
from typing import Optional, Union

from graphviz import Digraph

from config import settings
from dag_bridge import Dag
from learning import SizeGuardError
from staged_tree import StagedTree

logger = logging.getLogger(__name__)

PALETTE = (
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33", "#a65628", "#f781bf",
    "#8dd3c7", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#bc80bd",
)


def stage_color(stage: int, n_stages: int) -> str:
    """Distinct colors among the n_stages stages of one depth"""
    if n_stages <= len(PALETTE):
        return PALETTE[stage]
    return f"{stage / n_stages:.4f} 0.600 0.900"


def dag_to_dot(G: Dag, name: str = "dag") -> Digraph:
    graph = Digraph(name=name)
    graph.attr(rankdir="LR")
    for variable in G.names:
        graph.node(variable, variable, shape="circle")
    for parent, child in G.named_edges():
        graph.edge(parent, child)
    return graph


def staged_tree_to_dot(model: StagedTree, name: str = "staged_tree",
                       max_vertices: Optional[int] = None) -> Digraph:
    """Vertices v0, v1, ... numbered depth by depth as in the usual drawings"""
    tree = model.tree
    limit = settings.dot_max_vertices if max_vertices is None else max_vertices
    if tree.n_internal > limit:
        raise SizeGuardError(
            f"tree has {tree.n_internal} internal vertices, above the DOT limit of {limit}"
        )
    graph = Digraph(name=name)
    graph.attr(rankdir="LR")
    offset = 0
    for depth in range(tree.p + 1):
        count = tree.n_vertices(depth)
        next_offset = offset + count
        n_stages = model.staging.n_stages(depth) if depth < tree.p else 0
        for vertex in range(count):
            node = f"v{offset + vertex}"
            if depth < tree.p:
                stage = int(model.staging.assignments[depth][vertex])
                graph.node(node, str(offset + vertex), shape="circle", style="filled",
                           fillcolor=stage_color(stage, n_stages), tooltip=f"stage {depth}:{stage}")
            else:
                graph.node(node, "", shape="point")
            if depth > 0:
                parent_vertex, code = divmod(vertex, tree.cardinalities[depth - 1])
                variable = tree.variables[depth - 1]
                graph.edge(f"v{previous_offset + parent_vertex}", node,
                           label=f"{variable.name}={variable.levels[code]}")
        previous_offset, offset = offset, next_offset
    return graph


def write_dot(graph: Digraph, path: Union[str, Path]):
    Path(path).write_text(graph.source)
    logger.info(f"💾 DOT graph written to {path}")
