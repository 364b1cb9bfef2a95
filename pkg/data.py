"""
Datasets of fully observed categorical records, sufficient statistics and
two-level discretization of continuous scores.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from staged_tree import (
    EventTree,
    SchemaMismatchError,
    Staging,
    StagedTreeError,
    VariableSpec,
    _frozen,
)

logger = logging.getLogger(__name__)


class DataError(StagedTreeError):
    pass


@dataclass(frozen=True)
class Dataset:
    schema: Tuple[VariableSpec, ...]
    codes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.ndim == 1 and codes.size == 0:
            codes = codes.reshape(0, len(self.schema))
        if codes.ndim != 2 or codes.shape[1] != len(self.schema):
            raise DataError(f"expected an (n, {len(self.schema)}) code matrix, got {codes.shape}")
        if codes.shape[0]:
            cardinalities = np.array([variable.cardinality for variable in self.schema])
            bad = (codes < 0) | (codes >= cardinalities)
            if bad.any():
                row, column = np.argwhere(bad)[0]
                raise DataError(
                    f"row {row}, column {self.schema[column].name!r}: invalid code {codes[row, column]}"
                )
        object.__setattr__(self, "codes", _frozen(codes))

    @property
    def n(self) -> int:
        return int(self.codes.shape[0])

    @property
    def p(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(variable.name for variable in self.schema)

    def select(self, names: Sequence[str]) -> "Dataset":
        """Columns in the given order"""
        positions = []
        for name in names:
            if name not in self.names:
                raise DataError(f"unknown column {name!r}; known: {list(self.names)}")
            positions.append(self.names.index(name))
        return Dataset(tuple(self.schema[i] for i in positions), self.codes[:, positions])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            variable.name: np.asarray(variable.levels, dtype=object)[self.codes[:, column]]
            for column, variable in enumerate(self.schema)
        }, columns=list(self.names))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame,
                   declared_levels: Optional[Dict[str, Sequence[str]]] = None) -> "Dataset":
        declared_levels = declared_levels or {}
        if frame.shape[1] < 1:
            raise DataError("a dataset needs at least one column")
        unknown = set(declared_levels) - set(map(str, frame.columns))
        if unknown:
            raise DataError(f"levels declared for unknown columns {sorted(unknown)}")
        schema, columns = [], []
        for name in frame.columns:
            values = frame[name].astype(str)
            missing = frame[name].isna() | (values.str.strip() == "")
            if missing.any():
                row = int(np.flatnonzero(missing.to_numpy())[0])
                raise DataError(f"row {row + 1}, column {name!r}: missing value (ragged row?)")
            if str(name) in declared_levels:
                levels = tuple(str(level) for level in declared_levels[str(name)])
                lookup = {level: code for code, level in enumerate(levels)}
                mapped = values.map(lookup)
                if mapped.isna().any():
                    row = int(np.flatnonzero(mapped.isna().to_numpy())[0])
                    raise DataError(
                        f"row {row + 1}, column {name!r}: unknown level {values.iloc[row]!r}, "
                        f"declared {list(levels)}"
                    )
                codes = mapped.to_numpy(dtype=np.int64)
            else:
                levels = tuple(sorted(values.unique()))
                if len(levels) < 2:
                    raise DataError(
                        f"column {name!r} has {len(levels)} distinct value(s); declare its levels "
                        f"or drop it (cardinality must be >= 2)"
                    )
                codes = pd.Categorical(values, categories=levels).codes.astype(np.int64)
            schema.append(VariableSpec(str(name), levels))
            columns.append(codes)
        codes = np.column_stack(columns) if len(frame) else np.zeros((0, len(schema)), dtype=np.int64)
        return cls(tuple(schema), codes)


def read_csv(path: Union[str, Path], header: bool = True,
             declared_levels: Optional[Dict[str, Sequence[str]]] = None) -> Dataset:
    """Load a comma-separated UTF-8 file of categorical records"""
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: ragged rows ({e})")
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: no columns")
    if not header:
        frame.columns = [f"X{column + 1}" for column in range(frame.shape[1])]
    dataset = Dataset.from_frame(frame, declared_levels)
    logger.info(f"📊 Loaded {path}: n={dataset.n}, p={dataset.p}")
    return dataset


def write_csv(dataset: Dataset, path: Union[str, Path]):
    dataset.to_frame().to_csv(path, index=False)
    logger.info(f"💾 Dataset written to {path} ({dataset.n} rows)")


def check_schema(data: Dataset, tree: EventTree):
    if data.schema != tree.variables:
        raise SchemaMismatchError(
            f"dataset columns {list(data.names)} do not match tree variables {list(tree.names)} "
            "(names and level orders must agree)"
        )


@dataclass(frozen=True)
class StageCounts:
    vertex_counts: Tuple[np.ndarray, ...]
    stage_counts: Tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return int(self.stage_counts[0].sum())


def vertex_counts(data: Dataset, tree: EventTree) -> Tuple[np.ndarray, ...]:
    """Per depth, an (n_vertices, cardinality) table of child counts, one pass"""
    check_schema(data, tree)
    counts = []
    vertex = np.zeros(data.n, dtype=np.int64)
    for depth, cardinality in enumerate(tree.cardinalities):
        child = data.codes[:, depth]
        flat = np.bincount(vertex * cardinality + child, minlength=tree.n_vertices(depth) * cardinality)
        counts.append(flat.reshape(tree.n_vertices(depth), cardinality).astype(np.int64))
        vertex = vertex * cardinality + child
    return tuple(counts)


def aggregate_counts(per_vertex: Sequence[np.ndarray], staging: Staging) -> Tuple[np.ndarray, ...]:
    stage_counts = []
    for depth, table in enumerate(per_vertex):
        summed = np.zeros((staging.n_stages(depth), table.shape[1]), dtype=np.int64)
        np.add.at(summed, staging.assignments[depth], table)
        stage_counts.append(summed)
    return tuple(stage_counts)


def count_stages(data: Dataset, tree: EventTree, staging: Staging) -> StageCounts:
    staging.check_tree(tree)
    per_vertex = vertex_counts(data, tree)
    return StageCounts(per_vertex, aggregate_counts(per_vertex, staging))


class BinarizationCut(BaseModel):
    lower_max: float = Field(..., description="Largest value coded 0")
    upper_min: float = Field(..., description="Smallest value coded 1")
    threshold: float = Field(..., description="Midpoint between the two clusters")
    within_ss: float = Field(..., description="Within-cluster sum of squares at the cut")
    lower_size: int = Field(..., description="Number of values coded 0")


def binarize_two_means(values: Sequence[float]) -> Tuple[np.ndarray, BinarizationCut]:
    """Exact 1-D 2-means: scan every cut between distinct sorted values"""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise DataError("binarization needs finite values")
    ordered = np.sort(values)
    if ordered[0] == ordered[-1]:
        raise DataError("cannot binarize a constant column")
    n = ordered.size
    sums, squares = np.cumsum(ordered), np.cumsum(ordered ** 2)
    sizes = np.arange(1, n)
    left = squares[:-1] - sums[:-1] ** 2 / sizes
    right_sum, right_squares = sums[-1] - sums[:-1], squares[-1] - squares[:-1]
    right = right_squares - right_sum ** 2 / (n - sizes)
    within = left + right
    # ties are never split across clusters
    within[ordered[:-1] == ordered[1:]] = np.inf
    cut = int(np.argmin(within))
    lower_max, upper_min = float(ordered[cut]), float(ordered[cut + 1])
    codes = (values > lower_max).astype(np.int64)
    return codes, BinarizationCut(
        lower_max=lower_max,
        upper_min=upper_min,
        threshold=(lower_max + upper_min) / 2.0,
        within_ss=float(max(within[cut], 0.0)),
        lower_size=int(cut + 1),
    )


def binarize_frame(frame: pd.DataFrame, columns: Optional[List[str]] = None,
                   labels: Tuple[str, str] = ("low", "high")) -> Tuple[pd.DataFrame, Dict[str, BinarizationCut]]:
    """Two-level labels for numeric columns; other columns pass through"""
    columns = columns or [name for name in frame.columns if pd.api.types.is_numeric_dtype(frame[name])]
    result, cuts = frame.copy(), {}
    for name in columns:
        if name not in frame.columns:
            raise DataError(f"unknown column {name!r}")
        numeric = pd.to_numeric(frame[name], errors="coerce")
        if numeric.isna().any():
            row = int(np.flatnonzero(numeric.isna().to_numpy())[0])
            raise DataError(f"row {row + 1}, column {name!r}: not a number ({frame[name].iloc[row]!r})")
        try:
            codes, cut = binarize_two_means(numeric.to_numpy())
        except DataError as e:
            raise DataError(f"column {name!r}: {e}")
        result[name] = np.asarray(labels, dtype=object)[codes]
        cuts[name] = cut
        logger.debug(f"Binarized {name!r} at {cut.threshold:.4g} ({cut.lower_size} low)")
    return result, cuts
