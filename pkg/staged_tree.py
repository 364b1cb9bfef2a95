"""
Event trees, stagings and staged tree models.

Vertices are never materialized: the depth-i vertex set is the set of value
prefixes x_[i], addressed by the mixed-radix index with x_1 most significant.
A staging stores, per depth, one integer stage label per vertex; labels are
kept canonical (0..m-1 in order of first occurrence).
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-12


class StagedTreeError(ValueError):
    """Base class for every domain error raised by the toolkit"""


class InvalidVariableError(StagedTreeError):
    pass


class InvalidStagingError(StagedTreeError):
    pass


class InvalidParametersError(StagedTreeError):
    pass


class InvalidOutcomeError(StagedTreeError):
    pass


class SchemaMismatchError(StagedTreeError):
    pass


class DimensionMismatchError(StagedTreeError):
    pass


class MarginalizationError(StagedTreeError):
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def canonical_labels(raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Relabel stage labels 0..m-1 by first occurrence.

    Returns the canonical labels and, for each canonical label, the raw label
    it came from.
    """
    raw = np.asarray(raw, dtype=np.int64)
    if raw.size == 0:
        return raw.copy(), raw.copy()
    uniques, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].astype(np.int64), uniques[order]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    levels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(level) for level in self.levels))
        if not self.name:
            raise InvalidVariableError("variable name must be non-empty")
        if len(self.levels) < 2:
            raise InvalidVariableError(
                f"variable {self.name!r} needs at least 2 levels, got {len(self.levels)}"
            )
        if len(set(self.levels)) != len(self.levels):
            raise InvalidVariableError(f"variable {self.name!r} has duplicate levels {self.levels}")

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    def code(self, label: str) -> int:
        try:
            return self.levels.index(str(label))
        except ValueError:
            raise InvalidOutcomeError(f"{label!r} is not a level of {self.name!r} {self.levels}")

    @classmethod
    def numbered(cls, name: str, cardinality: int) -> "VariableSpec":
        """Variable with levels "0", "1", ..."""
        return cls(name, tuple(str(code) for code in range(cardinality)))


@dataclass(frozen=True)
class EventTree:
    variables: Tuple[VariableSpec, ...]
    cardinalities: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise InvalidVariableError("an event tree needs at least one variable")
        names = [variable.name for variable in self.variables]
        if len(set(names)) != len(names):
            raise InvalidVariableError(f"duplicate variable names in {names}")
        object.__setattr__(
            self, "cardinalities", tuple(variable.cardinality for variable in self.variables)
        )

    @property
    def p(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(variable.name for variable in self.variables)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidVariableError(f"unknown variable {name!r}; known: {list(self.names)}")

    def n_vertices(self, depth: int) -> int:
        """Number of vertices at a depth (depth p are the leaves)"""
        return math.prod(self.cardinalities[:depth])

    @property
    def n_leaves(self) -> int:
        return self.n_vertices(self.p)

    @property
    def n_internal(self) -> int:
        return sum(self.n_vertices(depth) for depth in range(self.p))

    def vertex_index(self, prefix: Sequence[int]) -> int:
        index = 0
        for position, code in enumerate(prefix):
            cardinality = self.cardinalities[position]
            if not 0 <= int(code) < cardinality:
                raise InvalidOutcomeError(
                    f"code {code} out of range for {self.variables[position].name!r} "
                    f"(cardinality {cardinality})"
                )
            index = index * cardinality + int(code)
        return index

    def prefix_of(self, depth: int, index: int) -> Tuple[int, ...]:
        if depth == 0:
            return ()
        return tuple(int(code) for code in np.unravel_index(index, self.cardinalities[:depth]))

    def coordinate(self, depth: int, position: int) -> np.ndarray:
        """Value of variable `position` for every depth-`depth` vertex"""
        stride = math.prod(self.cardinalities[position + 1:depth])
        indices = np.arange(self.n_vertices(depth), dtype=np.int64)
        return (indices // stride) % self.cardinalities[position]

    def label_prefix(self, depth: int, index: int) -> Dict[str, str]:
        return {
            self.variables[position].name: self.variables[position].levels[code]
            for position, code in enumerate(self.prefix_of(depth, index))
        }


def build_event_tree(variables: Sequence[VariableSpec]) -> EventTree:
    tree = EventTree(tuple(variables))
    logger.debug(f"Built event tree over {tree.p} variables with {tree.n_leaves} leaves")
    return tree


@dataclass(frozen=True)
class Staging:
    """Per-depth stage labels; depth i holds one label per depth-i vertex"""

    assignments: Tuple[np.ndarray, ...]

    def __post_init__(self):
        canonical = []
        for depth, labels in enumerate(self.assignments):
            labels = np.asarray(labels)
            if labels.ndim != 1 or labels.size == 0:
                raise InvalidStagingError(f"depth {depth} needs a non-empty 1-d label array")
            if not np.issubdtype(labels.dtype, np.integer):
                raise InvalidStagingError(f"depth {depth} labels must be integers")
            if labels.min() < 0:
                raise InvalidStagingError(f"depth {depth} has negative stage labels")
            canonical.append(_frozen(canonical_labels(labels)[0]))
        if not canonical or canonical[0].size != 1:
            raise InvalidStagingError("depth 0 must consist of the root alone")
        object.__setattr__(self, "assignments", tuple(canonical))

    @property
    def depths(self) -> int:
        return len(self.assignments)

    def n_stages(self, depth: int) -> int:
        return int(self.assignments[depth].max()) + 1

    @property
    def total_stages(self) -> int:
        return sum(self.n_stages(depth) for depth in range(self.depths))

    def stage_members(self, depth: int, stage: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[depth] == stage)

    def merge(self, depth: int, a: int, b: int) -> "Staging":
        labels = np.array(self.assignments[depth])
        labels[labels == b] = a
        assignments = list(self.assignments)
        assignments[depth] = labels
        return Staging(tuple(assignments))

    def same_partition(self, other: "Staging") -> bool:
        # canonical labels make equal partitions byte-identical
        return self.depths == other.depths and all(
            np.array_equal(mine, theirs)
            for mine, theirs in zip(self.assignments, other.assignments)
        )

    def is_coarsening_of(self, other: "Staging") -> bool:
        """True if every stage of `other` lies inside one stage of self"""
        if self.depths != other.depths:
            return False
        for mine, theirs in zip(self.assignments, other.assignments):
            if mine.size != theirs.size:
                return False
            pairs = np.unique(np.stack([theirs, mine]), axis=1)
            if pairs.shape[1] != int(theirs.max()) + 1:
                return False
        return True

    def check_tree(self, tree: EventTree):
        if self.depths != tree.p:
            raise DimensionMismatchError(
                f"staging has {self.depths} depths but the tree has {tree.p} variables"
            )
        for depth, labels in enumerate(self.assignments):
            if labels.size != tree.n_vertices(depth):
                raise DimensionMismatchError(
                    f"depth {depth}: staging covers {labels.size} vertices, "
                    f"tree has {tree.n_vertices(depth)}"
                )

    @classmethod
    def from_raw(cls, labels: Sequence[Sequence[int]]) -> "Staging":
        return cls(tuple(np.asarray(level, dtype=np.int64) for level in labels))


def saturated_staging(tree: EventTree) -> Staging:
    return Staging(tuple(np.arange(tree.n_vertices(depth)) for depth in range(tree.p)))


def independence_staging(tree: EventTree) -> Staging:
    """One stage per depth"""
    return Staging(tuple(np.zeros(tree.n_vertices(depth), dtype=np.int64) for depth in range(tree.p)))


@dataclass(frozen=True)
class StagedTree:
    tree: EventTree
    staging: Staging
    params: Tuple[np.ndarray, ...]

    def __post_init__(self):
        self.staging.check_tree(self.tree)
        if len(self.params) != self.tree.p:
            raise InvalidParametersError(
                f"expected parameters for {self.tree.p} depths, got {len(self.params)}"
            )
        frozen = []
        for depth, matrix in enumerate(self.params):
            matrix = np.asarray(matrix, dtype=np.float64)
            expected = (self.staging.n_stages(depth), self.tree.cardinalities[depth])
            if matrix.shape != expected:
                raise InvalidParametersError(
                    f"depth {depth}: parameter shape {matrix.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(matrix)) or matrix.min() < 0.0 or matrix.max() > 1.0:
                raise InvalidParametersError(f"depth {depth}: probabilities must lie in [0, 1]")
            sums = matrix.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > SUM_TOLERANCE):
                worst = int(np.argmax(np.abs(sums - 1.0)))
                raise InvalidParametersError(
                    f"depth {depth}: stage {worst} sums to {sums[worst]!r}, not 1"
                )
            frozen.append(_frozen(matrix))
        object.__setattr__(self, "params", tuple(frozen))

    @property
    def p(self) -> int:
        return self.tree.p

    def stage_vector(self, depth: int, stage: int) -> np.ndarray:
        return self.params[depth][stage]


def _check_outcome(tree: EventTree, x: Sequence[int]) -> Tuple[int, ...]:
    if len(x) != tree.p:
        raise InvalidOutcomeError(f"outcome has {len(x)} coordinates, tree has {tree.p}")
    for position, code in enumerate(x):
        if not 0 <= int(code) < tree.cardinalities[position]:
            raise InvalidOutcomeError(
                f"code {code} out of range for {tree.variables[position].name!r} "
                f"(cardinality {tree.cardinalities[position]})"
            )
    return tuple(int(code) for code in x)


def atomic_probability(model: StagedTree, x: Sequence[int]) -> float:
    """Product of the p stage-vector entries met on the root-to-leaf path of x"""
    x = _check_outcome(model.tree, x)
    probability = 1.0
    vertex = 0
    for depth, code in enumerate(x):
        stage = model.staging.assignments[depth][vertex]
        probability *= model.params[depth][stage, code]
        vertex = vertex * model.tree.cardinalities[depth] + code
    return float(probability)


def log_probabilities(model: StagedTree, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[1] != model.p:
        raise InvalidOutcomeError(f"expected an (n, {model.p}) code matrix, got {codes.shape}")
    if codes.size and (codes.min() < 0 or np.any(codes.max(axis=0) >= model.tree.cardinalities)):
        raise InvalidOutcomeError("code matrix holds out-of-range level codes")
    with np.errstate(divide="ignore"):
        total = np.zeros(codes.shape[0])
        vertex = np.zeros(codes.shape[0], dtype=np.int64)
        for depth in range(model.p):
            stage = model.staging.assignments[depth][vertex]
            total += np.log(model.params[depth][stage, codes[:, depth]])
            vertex = vertex * model.tree.cardinalities[depth] + codes[:, depth]
    return total


def leaf_distribution(model: StagedTree) -> np.ndarray:
    """Probabilities of all leaves, indexed by the mixed-radix leaf index"""
    probabilities = np.ones(1)
    for depth in range(model.p):
        vectors = model.params[depth][model.staging.assignments[depth]]
        probabilities = (probabilities[:, None] * vectors).ravel()
    return probabilities


def _dependent_coordinates(labels: np.ndarray, shape: Tuple[int, ...]) -> List[int]:
    """Coordinates along which the stage function of one depth varies"""
    if not shape:
        return []
    grid = labels.reshape(shape)
    varying = []
    for axis in range(len(shape)):
        first = np.take(grid, [0], axis=axis)
        if np.any(grid != first):
            varying.append(axis)
    return varying


def marginal_tree(model: StagedTree, keep: Sequence[int]) -> StagedTree:
    """Staged tree over a subset of variables closed under staging dependence"""
    keep = [int(position) for position in keep]
    if not keep:
        raise MarginalizationError("keep must name at least one variable")
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise MarginalizationError(f"keep must be strictly increasing, got {keep}")
    if keep[0] < 0 or keep[-1] >= model.p:
        raise MarginalizationError(f"keep {keep} out of range for {model.p} variables")
    tree = model.tree
    kept = set(keep)
    for position in keep:
        depends = _dependent_coordinates(
            model.staging.assignments[position], tree.cardinalities[:position]
        )
        dropped = [tree.names[axis] for axis in depends if axis not in kept]
        if dropped:
            raise MarginalizationError(
                f"staging of {tree.names[position]!r} depends on dropped variables {dropped}"
            )

    sub_tree = EventTree(tuple(tree.variables[position] for position in keep))
    labels, params = [], []
    for new_depth, position in enumerate(keep):
        # vertex of the original tree with dropped coordinates set to 0
        original = np.zeros(sub_tree.n_vertices(new_depth), dtype=np.int64)
        for new_axis, old_axis in enumerate(keep[:new_depth]):
            stride = math.prod(tree.cardinalities[old_axis + 1:position])
            original += sub_tree.coordinate(new_depth, new_axis) * stride
        canonical, representatives = canonical_labels(model.staging.assignments[position][original])
        labels.append(canonical)
        params.append(model.params[position][representatives])
    return StagedTree(sub_tree, Staging(tuple(labels)), tuple(params))


def stage_contexts(model: StagedTree, depth: int) -> List[Dict[str, object]]:
    """Stages at a depth with their member contexts and conditional distribution"""
    tree = model.tree
    variable = tree.variables[depth]
    described = []
    for stage in range(model.staging.n_stages(depth)):
        members = model.staging.stage_members(depth, stage)
        described.append({
            "stage": stage_id(depth, stage),
            "contexts": [tree.label_prefix(depth, int(vertex)) for vertex in members],
            "distribution": dict(zip(variable.levels, model.params[depth][stage].tolist())),
        })
    return described


# --- canonical JSON model format -------------------------------------------

def stage_id(depth: int, stage: int) -> str:
    return f"{depth}:{stage}"


class VariableDocument(BaseModel):
    name: str = Field(..., description="Variable name")
    levels: List[str] = Field(..., description="Ordered level labels")


class ModelDocument(BaseModel):
    variables: List[VariableDocument] = Field(..., description="Variables in tree order")
    staging: List[List[str]] = Field(..., description="Per depth, stage ID of each vertex")
    params: Dict[str, List[float]] = Field(..., description="Stage ID to probability vector")


def model_to_document(model: StagedTree) -> ModelDocument:
    staging, params = [], {}
    for depth, labels in enumerate(model.staging.assignments):
        staging.append([stage_id(depth, int(label)) for label in labels])
        for stage in range(model.staging.n_stages(depth)):
            params[stage_id(depth, stage)] = model.params[depth][stage].tolist()
    return ModelDocument(
        variables=[VariableDocument(name=v.name, levels=list(v.levels)) for v in model.tree.variables],
        staging=staging,
        params=params,
    )


def model_from_document(document: ModelDocument) -> StagedTree:
    tree = build_event_tree([VariableSpec(v.name, tuple(v.levels)) for v in document.variables])
    if len(document.staging) != tree.p:
        raise InvalidStagingError(f"staging lists {len(document.staging)} depths, expected {tree.p}")
    labels, params = [], []
    for depth, ids in enumerate(document.staging):
        if len(ids) != tree.n_vertices(depth):
            raise InvalidStagingError(
                f"depth {depth} lists {len(ids)} vertices, expected {tree.n_vertices(depth)}"
            )
        order: Dict[str, int] = {}
        raw = np.array([order.setdefault(sid, len(order)) for sid in ids], dtype=np.int64)
        labels.append(raw)
        matrix = []
        for sid in order:
            if sid not in document.params:
                raise InvalidParametersError(f"no parameters for stage {sid!r}")
            if len(document.params[sid]) != tree.cardinalities[depth]:
                raise InvalidParametersError(
                    f"stage {sid!r} has {len(document.params[sid])} probabilities, "
                    f"variable {tree.names[depth]!r} has {tree.cardinalities[depth]} levels"
                )
            matrix.append(document.params[sid])
        params.append(np.array(matrix, dtype=np.float64))
    seen = {sid for ids in document.staging for sid in ids}
    if len(seen) != sum(len(set(ids)) for ids in document.staging):
        raise InvalidStagingError("stage IDs must be unique within the file (never span depths)")
    extra = set(document.params) - seen
    if extra:
        raise InvalidParametersError(f"parameters given for unknown stages {sorted(extra)}")
    return StagedTree(tree, Staging(tuple(labels)), tuple(params))


def save_model(model: StagedTree, path: Union[str, Path]):
    Path(path).write_text(model_to_document(model).model_dump_json(indent=2) + "\n")
    logger.info(f"💾 Model written to {path}")


def load_model(path: Union[str, Path]) -> StagedTree:
    document = ModelDocument.model_validate(json.loads(Path(path).read_text()))
    return model_from_document(document)


def uniform_parameters(tree: EventTree, staging: Staging) -> Tuple[np.ndarray, ...]:
    return tuple(
        np.full((staging.n_stages(depth), tree.cardinalities[depth]), 1.0 / tree.cardinalities[depth])
        for depth in range(tree.p)
    )
