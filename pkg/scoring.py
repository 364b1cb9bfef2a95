"""
Maximum-likelihood fitting, log-likelihood, free-parameter count and BIC
for staged trees and for DAG models scored family by family.

BIC is -2 * loglik + dof * ln(n) and is minimized everywhere.
"""

import logging
import math
from typing import Dict, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import xlogy

from data import Dataset, StageCounts, count_stages
from staged_tree import EventTree, StagedTree, Staging, StagedTreeError

logger = logging.getLogger(__name__)


class EmptyDatasetError(StagedTreeError):
    pass


class Score(BaseModel):
    loglik: float = Field(..., description="Maximized log-likelihood")
    dof: int = Field(..., ge=0, description="Number of free parameters")
    bic: float = Field(..., description="-2 loglik + dof ln n (lower is better)")
    n: int = Field(..., ge=1, description="Sample size")

    @classmethod
    def from_loglik(cls, loglik: float, dof: int, n: int) -> "Score":
        if n < 1:
            raise EmptyDatasetError("BIC needs at least one record")
        return cls(loglik=loglik, dof=dof, bic=-2.0 * loglik + dof * math.log(n), n=n)


def stage_loglik_terms(counts: np.ndarray) -> np.ndarray:
    """Per-row maximized loglik: sum_v n_v ln n_v - n_s ln n_s (0 ln 0 = 0)"""
    counts = np.asarray(counts, dtype=np.float64)
    return xlogy(counts, counts).sum(axis=-1) - xlogy(counts.sum(axis=-1), counts.sum(axis=-1))


def merge_delta_bic(counts_a: np.ndarray, counts_b: np.ndarray, n: int) -> np.ndarray:
    """BIC change of merging stage(s) a with stage(s) b at one depth (broadcasts)"""
    counts_a = np.asarray(counts_a, dtype=np.float64)
    counts_b = np.asarray(counts_b, dtype=np.float64)
    gain = stage_loglik_terms(counts_a + counts_b) - stage_loglik_terms(counts_a) - stage_loglik_terms(counts_b)
    return -2.0 * gain - (counts_a.shape[-1] - 1) * math.log(n)


def count_dof(tree: EventTree, staging: Staging) -> int:
    return sum(staging.n_stages(depth) * (tree.cardinalities[depth] - 1) for depth in range(tree.p))


def _check_alpha(alpha: float):
    if alpha < 0 or not math.isfinite(alpha):
        raise StagedTreeError(f"smoothing alpha must be a finite number >= 0, got {alpha}")


def parameters_from_counts(stage_counts: Sequence[np.ndarray], alpha: float = 0.0) -> Tuple[np.ndarray, ...]:
    _check_alpha(alpha)
    params = []
    for counts in stage_counts:
        counts = np.asarray(counts, dtype=np.float64) + alpha
        totals = counts.sum(axis=1, keepdims=True)
        uniform = np.full_like(counts, 1.0 / counts.shape[1])
        # empty stages get the uniform vector
        params.append(np.divide(counts, totals, out=uniform, where=totals > 0))
    return tuple(params)


def fit_mle(tree: EventTree, staging: Staging, data: Dataset, alpha: float = 0.0) -> StagedTree:
    _check_alpha(alpha)
    counts = count_stages(data, tree, staging)
    return StagedTree(tree, staging, parameters_from_counts(counts.stage_counts, alpha))


def loglik_from_counts(counts: StageCounts) -> float:
    return float(sum(stage_loglik_terms(table).sum() for table in counts.stage_counts))


def log_likelihood(tree: EventTree, staging: Staging, data: Dataset) -> float:
    return loglik_from_counts(count_stages(data, tree, staging))


def score(tree: EventTree, staging: Staging, data: Dataset) -> Score:
    if data.n == 0:
        raise EmptyDatasetError("cannot score a staging on an empty dataset")
    counts = count_stages(data, tree, staging)
    return Score.from_loglik(loglik_from_counts(counts), count_dof(tree, staging), data.n)


def score_model(model: StagedTree, data: Dataset) -> Score:
    return score(model.tree, model.staging, data)


# --- DAG models --------------------------------------------------------------

def family_counts(codes: np.ndarray, cardinalities: Sequence[int], child: int,
                  parents: Sequence[int]) -> np.ndarray:
    """Contingency table of child values per parent configuration"""
    parents = list(parents)
    configurations = math.prod(cardinalities[q] for q in parents)
    if parents:
        config = np.ravel_multi_index(
            tuple(codes[:, q] for q in parents), tuple(cardinalities[q] for q in parents)
        )
    else:
        config = np.zeros(codes.shape[0], dtype=np.int64)
    flat = np.bincount(config * cardinalities[child] + codes[:, child],
                       minlength=configurations * cardinalities[child])
    return flat.reshape(configurations, cardinalities[child])


def family_bic(data: Dataset, child: int, parents: Sequence[int]) -> float:
    """Decomposable BN family term -2 ll + (|X_child| - 1) |X_parents| ln n"""
    if data.n == 0:
        raise EmptyDatasetError("cannot score a family on an empty dataset")
    cardinalities = [variable.cardinality for variable in data.schema]
    table = family_counts(data.codes, cardinalities, child, parents)
    loglik = float(stage_loglik_terms(table).sum())
    dof = table.shape[0] * (cardinalities[child] - 1)
    return -2.0 * loglik + dof * math.log(data.n)


def dag_score(dag, data: Dataset) -> Score:
    """BN BIC of a Dag whose variable order matches the dataset's columns"""
    if data.n == 0:
        raise EmptyDatasetError("cannot score a DAG on an empty dataset")
    if tuple(dag.names) != data.names:
        data = data.select(dag.names)
    cardinalities = [variable.cardinality for variable in data.schema]
    loglik, dof = 0.0, 0
    for child, parents in enumerate(dag.parent_sets):
        table = family_counts(data.codes, cardinalities, child, parents)
        loglik += float(stage_loglik_terms(table).sum())
        dof += table.shape[0] * (cardinalities[child] - 1)
    return Score.from_loglik(loglik, dof, data.n)


def per_depth_bic(counts: StageCounts, tree: EventTree, staging: Staging, n: int) -> Dict[int, float]:
    """BIC contribution of each depth (sums to the total BIC)"""
    return {
        depth: float(-2.0 * stage_loglik_terms(counts.stage_counts[depth]).sum()
                     + staging.n_stages(depth) * (tree.cardinalities[depth] - 1) * math.log(n))
        for depth in range(tree.p)
    }
