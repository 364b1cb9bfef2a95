#!/usr/bin/env python3
"""
End-to-end tests of the command-line entry point.
"""

import json
import sys

import numpy as np
import pandas as pd
import pytest

from dag_bridge import is_k_parents, load_dag, save_dag
from main import main
from staged_tree import load_model


def _run(capsys, *argv):
    code = main([str(arg) for arg in argv])
    return code, capsys.readouterr().out


@pytest.fixture
def simulated(tmp_path, capsys):
    model_path, data_path = tmp_path / "truth.json", tmp_path / "data.csv"
    assert _run(capsys, "simulate", "-p", 6, "-k", 2, "--seed", 1, "--out", model_path)[0] == 0
    assert _run(capsys, "sample", "--model", model_path, "-n", 2000, "--seed", 2, "--out", data_path)[0] == 0
    return model_path, data_path


def test_config_command(capsys):
    code, out = _run(capsys, "config")
    assert code == 0
    summary = json.loads(out)
    assert {"max_workers", "saturated_max_leaves", "cli_saturated_max_leaves"} <= set(summary)


def test_simulate_is_deterministic(tmp_path, capsys):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    _run(capsys, "simulate", "-p", 6, "-k", 2, "--seed", 1, "--out", first)
    _run(capsys, "simulate", "-p", 6, "-k", 2, "--seed", 1, "--out", second)
    assert first.read_bytes() == second.read_bytes()
    assert is_k_parents(load_model(first).tree, load_model(first).staging, 2)


def test_simulate_without_parents(tmp_path, capsys):
    model_path, dag_path = tmp_path / "m.json", tmp_path / "g.txt"
    _run(capsys, "simulate", "-p", 5, "-k", 0, "--seed", 3, "--out", model_path)
    assert _run(capsys, "convert", "tree2dag", "--in", model_path, "--out", dag_path)[0] == 0
    assert load_dag(dag_path).n_edges == 0


def test_convert_round_trip(tmp_path, capsys, diamond_dag, diamond_staging):
    dag_path, model_path, back = tmp_path / "g.txt", tmp_path / "t.json", tmp_path / "back.txt"
    save_dag(diamond_dag, dag_path)
    assert _run(capsys, "convert", "dag2tree", "--in", dag_path, "--out", model_path)[0] == 0
    assert load_model(model_path).staging.same_partition(diamond_staging)
    code, out = _run(capsys, "convert", "tree2dag", "--in", model_path, "--out", back)
    assert code == 0
    assert sorted(map(tuple, json.loads(out)["dag_edges"])) == sorted(diamond_dag.named_edges())
    assert load_dag(back) == diamond_dag


def test_learn_modes_and_scores(tmp_path, capsys, simulated):
    _, data_path = simulated
    scores = {}
    for mode in ("kparents", "dag-only"):
        model_path, score_path = tmp_path / f"{mode}.json", tmp_path / f"{mode}-score.json"
        code, out = _run(capsys, "learn", "--data", data_path, "--mode", mode, "-k", 2,
                         "--out-model", model_path, "--out-score", score_path,
                         "--out-trace", tmp_path / f"{mode}-trace.json")
        assert code == 0
        scores[mode] = json.loads(score_path.read_text())["bic"]
        assert json.loads(out)["bic"] == pytest.approx(scores[mode])
    model = load_model(tmp_path / "kparents.json")
    assert is_k_parents(model.tree, model.staging, 2)
    assert scores["kparents"] <= scores["dag-only"] + 1e-9
    trace = json.loads((tmp_path / "kparents-trace.json").read_text())
    assert trace["final_bic"] <= trace["initial_bic"]

    code, out = _run(capsys, "score", "--model", tmp_path / "kparents.json", "--data", data_path, "--per-depth")
    assert code == 0
    rescored = json.loads(out)
    assert rescored["bic"] == pytest.approx(scores["kparents"])
    assert sum(rescored["per_depth"].values()) == pytest.approx(rescored["bic"])


def test_learn_with_a_forced_leaf(tmp_path, capsys, simulated):
    _, data_path = simulated
    dag_path = tmp_path / "dag.txt"
    code, _ = _run(capsys, "learn", "--data", data_path, "--forced-leaf", "X1", "-k", 2,
                   "--out-model", tmp_path / "m.json", "--out-dag", dag_path)
    assert code == 0
    assert all(parent != "X1" for parent, _ in load_dag(dag_path).named_edges())


def test_saturated_learning_rejects_forced_leaves(tmp_path, capsys, caplog, simulated):
    _, data_path = simulated
    code, _ = _run(capsys, "learn", "--data", data_path, "--mode", "bhc-saturated",
                   "--forced-leaf", "X1", "--out-model", tmp_path / "m.json")
    assert code == 1
    assert "forced leaves" in caplog.text
    assert not (tmp_path / "m.json").exists()
    code, _ = _run(capsys, "learn", "--data", data_path, "--mode", "bhc-saturated",
                   "--order", "X6,X5,X4,X3,X2,X1", "--out-model", tmp_path / "m.json")
    assert code == 0
    assert load_model(tmp_path / "m.json").tree.names == ("X6", "X5", "X4", "X3", "X2", "X1")


def test_saturated_learning_is_guarded(tmp_path, capsys, caplog):
    codes = np.random.default_rng(0).integers(0, 2, size=(40, 12))
    codes[0], codes[1] = 0, 1
    data_path = tmp_path / "wide.csv"
    pd.DataFrame(codes, columns=[f"X{i}" for i in range(1, 13)]).to_csv(data_path, index=False)
    code, _ = _run(capsys, "learn", "--data", data_path, "--mode", "bhc-saturated",
                   "--out-model", tmp_path / "m.json")
    assert code == 1
    assert "4096 leaves" in caplog.text and "--force" in caplog.text
    assert not (tmp_path / "m.json").exists()


def test_dist_marginal_and_dot(tmp_path, capsys, simulated):
    model_path, _ = simulated
    code, out = _run(capsys, "dist", model_path, model_path)
    assert code == 0
    assert json.loads(out)["hamming"] == 0.0

    code, out = _run(capsys, "marginal", "--model", model_path, "--keep", "X1")
    assert code == 0
    assert json.loads(out)[0]["variable"] == "X1"

    dot_path = tmp_path / "tree.dot"
    assert _run(capsys, "export-dot", "--in", model_path, "--out", dot_path)[0] == 0
    assert dot_path.read_text().startswith("digraph")


def test_export_dot_of_a_dag(tmp_path, capsys, diamond_dag):
    dag_path, dot_path = tmp_path / "g.txt", tmp_path / "g.dot"
    save_dag(diamond_dag, dag_path)
    assert _run(capsys, "export-dot", "--in", dag_path, "--out", dot_path)[0] == 0
    assert "X1 -> X2" in dot_path.read_text()


def test_binarize_command(tmp_path, capsys):
    data_path, out_path = tmp_path / "numeric.csv", tmp_path / "binary.csv"
    pd.DataFrame({"a": [0.1, 0.2, 3.0, 3.3], "b": [5.0, 1.0, 5.2, 0.9]}).to_csv(data_path, index=False)
    code, out = _run(capsys, "binarize", "--data", data_path, "--out", out_path)
    assert code == 0
    assert json.loads(out)["a"]["lower_size"] == 2
    assert pd.read_csv(out_path)["b"].tolist() == ["high", "low", "high", "low"]


def test_benchmark_commands(tmp_path, capsys):
    recovery_path, summary_path = tmp_path / "recovery.csv", tmp_path / "summary.csv"
    code, _ = _run(capsys, "bench-recovery", "--p", 4, "-k", 2, "-n", 300, "--reps", 2,
                   "--sequential", "--self-check", "--out", recovery_path)
    assert code == 0
    recovery = pd.read_csv(recovery_path)
    assert (recovery.loc[recovery["method"] == "truth", "hamming"] == 0).all()
    assert _run(capsys, "summarize", "--in", recovery_path, "--out", summary_path)[0] == 0
    assert "hamming_mean" in pd.read_csv(summary_path).columns

    timing_path = tmp_path / "timing.csv"
    assert _run(capsys, "bench-time", "--p", "3..4", "-k", 2, "-n", 200, "--reps", 1, "--out", timing_path)[0] == 0
    assert set(pd.read_csv(timing_path)["method"]) == {"kparents", "bhc"}


def test_errors_become_exit_codes(tmp_path, capsys):
    assert _run(capsys, "score", "--model", tmp_path / "missing.json", "--data", tmp_path / "x.csv")[0] == 1
    with pytest.raises(SystemExit) as excinfo:
        main(["learn", "--mode", "exhaustive"])
    assert excinfo.value.code == 2


def test_malformed_model_file_is_a_failed_command(tmp_path, capsys, caplog):
    model_path = tmp_path / "ragged.json"
    model_path.write_text(json.dumps({
        "variables": [{"name": "A", "levels": ["0", "1"]}, {"name": "B", "levels": ["0", "1"]}],
        "staging": [["r"], ["s", "t"]],
        "params": {"r": [0.5, 0.5], "s": [0.4, 0.6], "t": [0.2, 0.3, 0.5]},
    }))
    for argv in (("score", "--model", model_path, "--data", tmp_path / "x.csv"),
                 ("convert", "tree2dag", "--in", model_path, "--out", tmp_path / "g.txt")):
        assert _run(capsys, *argv)[0] == 1
    assert "InvalidParametersError" in caplog.text


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
