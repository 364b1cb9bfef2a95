"""
Simulation campaigns: computation time of k-parents versus saturated-start
BHC, and staging recovery measured by the normalized hamming distance.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import settings
from learning import bhc_saturated, hc_dag, learn_dag_only, learn_k_parents
from metrics import normalized_hamming
from simulation import generate_k_parents, sample

logger = logging.getLogger(__name__)

TIME_COLUMNS = ["method", "p", "k", "rep", "build_seconds", "search_seconds"]
RECOVERY_COLUMNS = ["method", "p", "k", "n", "rep", "hamming"]
SATURATED_MAX_P = 10
MERGE_PROB = 0.5
WARMUP_REP = 10 ** 6


def replicate_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """Independent, reproducible stream per grid cell and replicate"""
    return np.random.SeedSequence(seed, spawn_key=tuple(int(key) for key in keys))


def _simulate(p: int, k: int, n: int, cardinality: int, stream: np.random.SeedSequence):
    model_stream, sample_stream = stream.spawn(2)
    generated = generate_k_parents(p, k, cardinality, MERGE_PROB, model_stream)
    return generated, sample(generated.model, n, sample_stream)


def time_replicate(p: int, k: int, n: int, rep: int, seed: int, cardinality: int = 2,
                   saturated_max_p: int = SATURATED_MAX_P) -> List[Dict]:
    """Oracle-DAG timing: BHC from T_G of the generating DAG and from the saturated tree"""
    generated, data = _simulate(p, k, n, cardinality, replicate_seed(seed, p, k, n, rep))
    _, _, trace = learn_k_parents(data, max(k, 1), dag=generated.dag)
    rows = [{"method": "kparents", "p": p, "k": k, "rep": rep,
             "build_seconds": trace.build_time, "search_seconds": trace.search_time}]
    if p <= saturated_max_p:
        _, trace = bhc_saturated(data, force=True)
        rows.append({"method": "bhc", "p": p, "k": k, "rep": rep,
                     "build_seconds": trace.build_time, "search_seconds": trace.search_time})
    for row in rows:
        elapsed = row["build_seconds"] + row["search_seconds"]
        if elapsed > settings.bench_timeout_seconds:
            logger.warning(
                f"⏱️  {row['method']} p={p} k={k} rep={rep} took {elapsed:.1f}s "
                f"> {settings.bench_timeout_seconds}s"
            )
    return rows


def recovery_replicate(p: int, k: int, n: int, rep: int, seed: int, cardinality: int = 2,
                       saturated_max_p: int = SATURATED_MAX_P, self_check: bool = False) -> List[Dict]:
    """Hamming distance to the generating staging for bhcdag, dag and bhc"""
    generated, data = _simulate(p, k, n, cardinality, replicate_seed(seed, p, k, n, rep))
    truth = generated.model
    # the known order keeps every learned tree comparable with the truth
    learned_dag = hc_dag(data, k, order=truth.tree.names)
    models = {
        "bhcdag": learn_k_parents(data, max(k, 1), dag=learned_dag)[0],
        "dag": learn_dag_only(data, dag=learned_dag)[0],
    }
    if p <= saturated_max_p:
        models["bhc"] = bhc_saturated(data, force=True)[0]
    if self_check:
        models["truth"] = truth
    return [
        {"method": method, "p": p, "k": k, "n": n, "rep": rep,
         "hamming": normalized_hamming(truth.tree, truth.staging, model.staging)}
        for method, model in models.items()
    ]


def _run(worker: Callable[..., List[Dict]], tasks: Sequence[tuple], parallel: bool,
         max_workers: Optional[int]) -> List[Dict]:
    rows: List[Dict] = []
    if not parallel:
        for task in tasks:
            rows.extend(worker(*task))
        return rows
    workers = min(max_workers or settings.max_workers, settings.max_workers)
    logger.info(f"🚀 Running {len(tasks)} replicates on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for result in [executor.submit(worker, *task) for task in tasks]:
            rows.extend(result.result())
    return rows


def run_time_benchmark(p_values: Iterable[int], k_values: Iterable[int], n: int, reps: int,
                       seed: int = 0, cardinality: int = 2, saturated_max_p: int = SATURATED_MAX_P,
                       parallel: bool = False, max_workers: Optional[int] = None) -> pd.DataFrame:
    p_values, k_values = list(p_values), list(k_values)
    # warm-up replicate, discarded
    time_replicate(min(p_values), min(k_values), n, WARMUP_REP, seed, cardinality, saturated_max_p)
    tasks = [(p, k, n, rep, seed, cardinality, saturated_max_p)
             for k in k_values for p in p_values for rep in range(reps)]
    rows = _run(time_replicate, tasks, parallel, max_workers)
    logger.info(f"✅ Timing benchmark finished: {len(rows)} rows")
    return pd.DataFrame(rows, columns=TIME_COLUMNS)


def run_recovery_benchmark(p_values: Iterable[int], k_values: Iterable[int], n_values: Iterable[int],
                           reps: int, seed: int = 0, cardinality: int = 2,
                           saturated_max_p: int = SATURATED_MAX_P, self_check: bool = False,
                           parallel: bool = False, max_workers: Optional[int] = None) -> pd.DataFrame:
    tasks = [(p, k, n, rep, seed, cardinality, saturated_max_p, self_check)
             for p in p_values for k in k_values for n in n_values for rep in range(reps)]
    rows = _run(recovery_replicate, tasks, parallel, max_workers)
    logger.info(f"✅ Recovery benchmark finished: {len(rows)} rows")
    return pd.DataFrame(rows, columns=RECOVERY_COLUMNS)


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard error over replicates for each grid cell"""
    values = [column for column in ("build_seconds", "search_seconds", "hamming") if column in frame]
    keys = [column for column in frame.columns if column not in values and column != "rep"]
    if not values:
        raise ValueError(f"no measurement columns in {list(frame.columns)}")
    grouped = frame.groupby(keys, sort=True)[values]
    summary = grouped.agg(["mean", "sem"])
    summary.columns = [f"{column}_{'se' if stat == 'sem' else stat}" for column, stat in summary.columns]
    summary["reps"] = grouped.size()
    return summary.reset_index()
