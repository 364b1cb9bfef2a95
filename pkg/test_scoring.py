#!/usr/bin/env python3
"""
Tests for maximum-likelihood fitting and BIC of staged trees and DAGs.
"""

import math
import sys

import numpy as np
import pytest

from dag_bridge import Dag, staged_tree_of_dag
from data import Dataset, count_stages
from scoring import (
    EmptyDatasetError,
    count_dof,
    dag_score,
    family_bic,
    fit_mle,
    log_likelihood,
    merge_delta_bic,
    per_depth_bic,
    score,
    score_model,
    stage_loglik_terms,
)
from simulation import sample
from staged_tree import (
    StagedTreeError,
    Staging,
    VariableSpec,
    build_event_tree,
    log_probabilities,
    saturated_staging,
)


@pytest.fixture
def diamond_data(diamond_model):
    return sample(diamond_model, 400, seed=11)


def test_stage_loglik_terms_treat_zero_counts():
    terms = stage_loglik_terms(np.array([[3, 1], [0, 5], [0, 0]]))
    assert terms[0] == pytest.approx(3 * math.log(3) - 4 * math.log(4))
    assert terms[1] == 0.0
    assert terms[2] == 0.0


def test_fit_mle_uses_stage_frequencies(binary_tree, diamond_staging):
    codes = np.array([[0, 0, 0, 0], [0, 1, 1, 0], [1, 0, 1, 1], [1, 0, 1, 1]])
    data = Dataset(binary_tree.variables, codes)
    model = fit_mle(binary_tree, diamond_staging, data)
    assert model.params[0].tolist() == [[0.5, 0.5]]
    assert model.params[2].tolist() == [[0.5, 0.5], [0.0, 1.0]]
    # no record reaches x2 = 1, x3 = 0: uniform
    assert model.params[3][2].tolist() == [0.5, 0.5]
    smoothed = fit_mle(binary_tree, diamond_staging, data, alpha=1.0)
    assert smoothed.params[2][1].tolist() == pytest.approx([1 / 4, 3 / 4])
    with pytest.raises(StagedTreeError):
        fit_mle(binary_tree, diamond_staging, data, alpha=-1.0)


def test_bic_definition(binary_tree, diamond_staging, diamond_data):
    result = score(binary_tree, diamond_staging, diamond_data)
    assert result.n == 400
    assert result.dof == count_dof(binary_tree, diamond_staging) == 1 + 2 + 2 + 4
    assert result.loglik == pytest.approx(log_likelihood(binary_tree, diamond_staging, diamond_data))
    assert result.bic == pytest.approx(-2 * result.loglik + result.dof * math.log(400))


def test_bic_is_the_log_probability_of_the_fitted_model(binary_tree, diamond_staging, diamond_data):
    model = fit_mle(binary_tree, diamond_staging, diamond_data)
    assert score_model(model, diamond_data).loglik == pytest.approx(
        log_probabilities(model, diamond_data.codes).sum()
    )


def test_merge_delta_matches_rescoring(binary_tree, diamond_staging, diamond_data):
    counts = count_stages(diamond_data, binary_tree, diamond_staging)
    delta = merge_delta_bic(counts.stage_counts[3][0], counts.stage_counts[3][1], diamond_data.n)
    merged = diamond_staging.merge(3, 0, 1)
    expected = score(binary_tree, merged, diamond_data).bic - score(binary_tree, diamond_staging, diamond_data).bic
    assert float(delta) == pytest.approx(expected, abs=1e-8)


def test_per_depth_bic_sums_to_total(binary_tree, diamond_staging, diamond_data):
    counts = count_stages(diamond_data, binary_tree, diamond_staging)
    parts = per_depth_bic(counts, binary_tree, diamond_staging, diamond_data.n)
    assert sorted(parts) == [0, 1, 2, 3]
    assert sum(parts.values()) == pytest.approx(score(binary_tree, diamond_staging, diamond_data).bic)


def test_dag_bic_equals_staged_tree_bic(binary_tree, diamond_dag, diamond_data):
    staging = staged_tree_of_dag(diamond_dag, binary_tree)
    assert dag_score(diamond_dag, diamond_data).bic == pytest.approx(
        score(binary_tree, staging, diamond_data).bic
    )
    families = sum(
        family_bic(diamond_data, child, parents) for child, parents in enumerate(diamond_dag.parent_sets)
    )
    assert families == pytest.approx(dag_score(diamond_dag, diamond_data).bic)


def _random_dataset(seed, n=300):
    """1 to 4 variables with 2 or 3 levels; the last level is twice as likely"""
    rng = np.random.default_rng(seed)
    cardinalities = [int(c) for c in rng.integers(2, 4, size=int(rng.integers(1, 5)))]
    tree = build_event_tree([VariableSpec.numbered(f"X{i}", c) for i, c in enumerate(cardinalities, 1)])
    columns = [np.minimum(rng.integers(0, c + 1, n), c - 1) for c in cardinalities]
    return tree, Dataset(tree.variables, np.column_stack(columns)), rng


@pytest.mark.parametrize("seed", range(10))
def test_saturated_bic_equals_complete_dag_bic(seed):
    tree, data, _ = _random_dataset(seed)
    saturated = score(tree, saturated_staging(tree), data)
    complete = dag_score(Dag.complete(tree.names), data)
    assert saturated.dof == complete.dof
    assert saturated.bic == pytest.approx(complete.bic, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_saturated_loglik_is_the_contingency_table(seed):
    tree, data, _ = _random_dataset(seed)
    _, cells = np.unique(data.codes, axis=0, return_counts=True)
    expected = float(np.sum(cells * np.log(cells / data.n)))
    assert log_likelihood(tree, saturated_staging(tree), data) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_saturated_loglik_bounds_every_staging(seed):
    tree, data, rng = _random_dataset(seed)
    ceiling = log_likelihood(tree, saturated_staging(tree), data)
    for _ in range(5):
        staging = Staging.from_raw([
            rng.integers(0, tree.n_vertices(depth), size=tree.n_vertices(depth)) for depth in range(tree.p)
        ])
        assert log_likelihood(tree, staging, data) <= ceiling + 1e-9


def test_merge_keeps_the_likelihood_only_for_equal_distributions():
    n = 100
    same_a, same_b = np.array([2, 6]), np.array([1, 3])
    gain = stage_loglik_terms(same_a + same_b) - stage_loglik_terms(same_a) - stage_loglik_terms(same_b)
    assert gain == pytest.approx(0.0, abs=1e-9)
    assert float(merge_delta_bic(same_a, same_b, n)) == pytest.approx(-math.log(n))
    # degenerate vectors with the same support also merge for free
    assert float(merge_delta_bic(np.array([0, 5]), np.array([0, 2]), n)) == pytest.approx(-math.log(n))

    other = np.array([3, 1])
    gain = stage_loglik_terms(same_a + other) - stage_loglik_terms(same_a) - stage_loglik_terms(other)
    assert gain < -1e-6
    assert float(merge_delta_bic(same_a, other, n)) > -math.log(n)


def test_dag_score_reorders_columns(diamond_data):
    G = Dag.from_named_edges(("X2", "X1", "X3", "X4"), [("X2", "X1")])
    reordered = diamond_data.select(G.names)
    assert dag_score(G, diamond_data).bic == pytest.approx(dag_score(G, reordered).bic)


def test_empty_dataset_is_rejected(binary_tree, diamond_staging):
    empty = Dataset(binary_tree.variables, np.zeros((0, 4), dtype=int))
    with pytest.raises(EmptyDatasetError):
        score(binary_tree, diamond_staging, empty)
    with pytest.raises(EmptyDatasetError):
        family_bic(empty, 0, [])
    # fitting on no records leaves every stage uniform
    assert fit_mle(binary_tree, diamond_staging, empty).params[3].tolist() == [[0.5, 0.5]] * 4


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
