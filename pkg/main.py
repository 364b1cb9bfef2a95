#!/usr/bin/env python3
"""
Command-line entry point for the staged tree learning toolkit.

Every subcommand is a thin wrapper over the library: it reads files, calls
one operation, writes its outputs and prints a JSON summary to stdout.
Domain errors are logged and turn into exit code 1.
"""

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd
from pydantic import ValidationError

from benchmark import run_recovery_benchmark, run_time_benchmark, summarize
from config import ConfigurationError, settings
from dag_bridge import Dag, load_dag, minimal_dag, save_dag, staged_tree_of_dag
from data import DataError, binarize_frame, read_csv, write_csv
from dot_export import dag_to_dot, staged_tree_to_dot, write_dot
from learning import METHODS, learn
from metrics import normalized_hamming
from scoring import count_stages, fit_mle, per_depth_bic, score_model
from simulation import generate_k_parents, sample
from staged_tree import (
    DimensionMismatchError,
    InvalidVariableError,
    StagedTree,
    StagedTreeError,
    VariableSpec,
    build_event_tree,
    load_model,
    marginal_tree,
    save_model,
    stage_contexts,
    uniform_parameters,
)

logger = logging.getLogger(__name__)

# Errors reported as a failed command (exit code 1) rather than a crash
HANDLED_ERRORS = (
    StagedTreeError, ConfigurationError, ValidationError, json.JSONDecodeError, OSError,
    pd.errors.ParserError, pd.errors.EmptyDataError,
)


# --- argument helpers ---------------------------------------------------------

def _int_list(raw: str) -> List[int]:
    """"2,3,4" or "3..20" (inclusive)"""
    values: List[int] = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            low, high = part.split("..", 1)
            values.extend(range(int(low), int(high) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError(f"empty integer list {raw!r}")
    return values


def _name_list(raw: str) -> List[str]:
    return [name.strip() for name in raw.split(",") if name.strip()]


def _cardinalities(raw: str) -> Union[int, List[int]]:
    values = _int_list(raw)
    return values[0] if len(values) == 1 else values


def _declared_levels(entries: Sequence[str]) -> Dict[str, List[str]]:
    declared = {}
    for entry in entries or ():
        if "=" not in entry:
            raise DataError(f"--levels expects COLUMN=level1,level2,..., got {entry!r}")
        column, levels = entry.split("=", 1)
        declared[column.strip()] = _name_list(levels)
    return declared


def _output(raw: Union[str, Path]) -> Path:
    path = settings.resolve_output(Path(raw))
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _emit(payload):
    print(json.dumps(payload, indent=2))


def _write_json(payload: str, raw: Union[str, Path]):
    path = _output(raw)
    path.write_text(payload + "\n")
    logger.info(f"💾 Written {path}")


def _model_levels(model: StagedTree) -> Dict[str, List[str]]:
    return {variable.name: list(variable.levels) for variable in model.tree.variables}


def _load_data_for(model: StagedTree, path: str, header: bool = True):
    """Dataset coded with the model's level orders and columns in tree order"""
    return read_csv(path, header, _model_levels(model)).select(model.tree.names)


def _load_graph_source(path: str) -> Union[StagedTree, Dag]:
    """A model JSON file or a DAG file (edge-list text or adjacency JSON)"""
    if Path(path).suffix == ".json" and "staging" in json.loads(Path(path).read_text()):
        return load_model(path)
    return load_dag(path)


# --- commands ---------------------------------------------------------------

def cmd_simulate(args):
    generated = generate_k_parents(args.p, args.k, args.cardinalities, args.merge_prob, args.seed)
    save_model(generated.model, _output(args.out))
    if args.dag_out:
        save_dag(generated.dag, _output(args.dag_out))
    _emit({
        "p": args.p,
        "k": args.k,
        "seed": args.seed,
        "dag_edges": generated.dag.named_edges(),
        "stages": generated.model.staging.total_stages,
    })


def cmd_sample(args):
    model = load_model(args.model)
    dataset = sample(model, args.n, args.seed)
    write_csv(dataset, _output(args.out))
    _emit({"n": dataset.n, "p": dataset.p, "seed": args.seed})


def cmd_learn(args):
    data = read_csv(args.data, not args.no_header, _declared_levels(args.levels))
    max_leaves = settings.cli_saturated_max_leaves if args.mode == "bhc-saturated" else None
    result = learn(
        data,
        args.mode,
        k=args.k,
        forced_leaves=args.forced_leaf or (),
        order=args.order,
        force=args.force,
        max_leaves=max_leaves,
    )
    save_model(result.model, _output(args.out_model))
    if args.out_score:
        _write_json(result.score.model_dump_json(indent=2), args.out_score)
    if args.out_trace:
        _write_json(result.trace.model_dump_json(indent=2), args.out_trace)
    if args.out_dag:
        save_dag(result.dag, _output(args.out_dag))
    logger.info(f"✅ {args.mode} learning finished: BIC {result.score.bic:.3f}")
    _emit({"method": args.mode, **result.score.model_dump(), "dag_edges": result.dag.named_edges()})


def cmd_score(args):
    model = load_model(args.model)
    data = _load_data_for(model, args.data, not args.no_header)
    result = score_model(model, data)
    payload = result.model_dump()
    if args.per_depth:
        counts = count_stages(data, model.tree, model.staging)
        per_depth = per_depth_bic(counts, model.tree, model.staging, data.n)
        payload["per_depth"] = {model.tree.names[depth]: bic for depth, bic in per_depth.items()}
    _emit(payload)


def cmd_convert(args):
    if args.direction == "dag2tree":
        dag = load_dag(args.input)
        if args.data:
            data = read_csv(args.data, not args.no_header).select(dag.names)
            tree = build_event_tree(data.schema)
            model = fit_mle(tree, staged_tree_of_dag(dag, tree), data)
        else:
            cardinalities = args.cardinalities
            if isinstance(cardinalities, int):
                cardinalities = [cardinalities] * dag.p
            if len(cardinalities) != dag.p:
                raise DimensionMismatchError(f"{len(cardinalities)} cardinalities for {dag.p} variables")
            tree = build_event_tree([
                VariableSpec.numbered(name, cardinality) for name, cardinality in zip(dag.names, cardinalities)
            ])
            staging = staged_tree_of_dag(dag, tree)
            model = StagedTree(tree, staging, uniform_parameters(tree, staging))
        save_model(model, _output(args.out))
        _emit({"direction": args.direction, "stages": model.staging.total_stages})
    else:
        model = load_model(args.input)
        dag = minimal_dag(model.tree, model.staging)
        save_dag(dag, _output(args.out))
        _emit({"direction": args.direction, "dag_edges": dag.named_edges()})


def cmd_dist(args):
    model_a, model_b = load_model(args.model_a), load_model(args.model_b)
    if model_a.tree != model_b.tree:
        raise DimensionMismatchError(
            f"models are over different trees: {list(model_a.tree.names)} vs {list(model_b.tree.names)}"
        )
    _emit({"hamming": normalized_hamming(model_a.tree, model_a.staging, model_b.staging)})


def cmd_export_dot(args):
    source = _load_graph_source(args.input)
    if isinstance(source, Dag):
        graph = dag_to_dot(source)
    else:
        graph = staged_tree_to_dot(source)
    write_dot(graph, _output(args.out))


def cmd_marginal(args):
    model = load_model(args.model)
    keep = sorted(model.tree.index_of(name) for name in args.keep)
    if len(set(keep)) != len(keep):
        raise InvalidVariableError(f"--keep repeats a variable: {args.keep}")
    sub_model = marginal_tree(model, keep)
    if args.out:
        save_model(sub_model, _output(args.out))
    _emit([
        {"variable": sub_model.tree.names[depth], "stages": stage_contexts(sub_model, depth)}
        for depth in range(sub_model.p)
    ])


def cmd_binarize(args):
    frame = pd.read_csv(args.data)
    binarized, cuts = binarize_frame(frame, args.columns, (args.low, args.high))
    path = _output(args.out)
    binarized.to_csv(path, index=False)
    logger.info(f"💾 Binarized {len(cuts)} columns into {path}")
    _emit({name: cut.model_dump() for name, cut in cuts.items()})


def cmd_bench_time(args):
    frame = run_time_benchmark(
        args.p, args.k, args.n, args.reps,
        seed=args.seed,
        cardinality=args.cardinality,
        saturated_max_p=args.saturated_max_p,
        parallel=args.parallel,
        max_workers=args.workers,
    )
    path = _output(args.out)
    frame.to_csv(path, index=False)
    logger.info(f"💾 Timing table written to {path}")


def cmd_bench_recovery(args):
    frame = run_recovery_benchmark(
        args.p, args.k, args.n, args.reps,
        seed=args.seed,
        cardinality=args.cardinality,
        saturated_max_p=args.saturated_max_p,
        self_check=args.self_check,
        parallel=not args.sequential,
        max_workers=args.workers,
    )
    path = _output(args.out)
    frame.to_csv(path, index=False)
    logger.info(f"💾 Recovery table written to {path}")


def cmd_summarize(args):
    summary = summarize(pd.read_csv(args.input))
    if args.out:
        path = _output(args.out)
        summary.to_csv(path, index=False)
        logger.info(f"💾 Summary written to {path}")
    else:
        print(summary.to_csv(index=False), end="")


def cmd_config(args):
    _emit(settings.get_config_summary())


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staged-trees",
        description="Learn sparse (k-parents) staged trees from categorical data",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Generate a random k-parents staged tree")
    simulate.add_argument("-p", type=int, required=True, help="Number of variables")
    simulate.add_argument("-k", type=int, required=True, help="Maximum number of parents")
    simulate.add_argument("--cardinalities", type=_cardinalities, default=2,
                          help="One cardinality for all variables or a comma list")
    simulate.add_argument("--merge-prob", type=float, default=0.5)
    simulate.add_argument("--seed", type=int, default=settings.default_seed)
    simulate.add_argument("--out", required=True, help="Model JSON file")
    simulate.add_argument("--dag-out", help="Also write the generating DAG")
    simulate.set_defaults(handler=cmd_simulate)

    sample_cmd = commands.add_parser("sample", help="Sample records from a model")
    sample_cmd.add_argument("--model", required=True)
    sample_cmd.add_argument("-n", type=int, required=True)
    sample_cmd.add_argument("--seed", type=int, default=settings.default_seed)
    sample_cmd.add_argument("--out", required=True, help="CSV file")
    sample_cmd.set_defaults(handler=cmd_sample)

    learn_cmd = commands.add_parser("learn", help="Learn a staged tree from a CSV file")
    learn_cmd.add_argument("--data", required=True)
    learn_cmd.add_argument("--mode", choices=METHODS, default="kparents")
    learn_cmd.add_argument("-k", type=int, default=2, help="Maximum number of parents")
    learn_cmd.add_argument("--forced-leaf", action="append",
                           help="Variable with no children (repeatable; DAG-based modes only)")
    learn_cmd.add_argument("--order", type=_name_list,
                           help="Known variable order, comma separated (the tree order in bhc-saturated)")
    learn_cmd.add_argument("--levels", action="append", help="COLUMN=level1,level2,... (repeatable)")
    learn_cmd.add_argument("--no-header", action="store_true")
    learn_cmd.add_argument("--force", action="store_true", help="Run bhc-saturated above the size guard")
    learn_cmd.add_argument("--out-model", required=True)
    learn_cmd.add_argument("--out-score")
    learn_cmd.add_argument("--out-trace")
    learn_cmd.add_argument("--out-dag")
    learn_cmd.set_defaults(handler=cmd_learn)

    score_cmd = commands.add_parser("score", help="BIC of a model on a dataset")
    score_cmd.add_argument("--model", required=True)
    score_cmd.add_argument("--data", required=True)
    score_cmd.add_argument("--no-header", action="store_true")
    score_cmd.add_argument("--per-depth", action="store_true", help="Also report each variable's BIC share")
    score_cmd.set_defaults(handler=cmd_score)

    convert = commands.add_parser("convert", help="DAG to staged tree or staged tree to minimal DAG")
    convert.add_argument("direction", choices=("dag2tree", "tree2dag"))
    convert.add_argument("--in", dest="input", required=True)
    convert.add_argument("--out", required=True)
    convert.add_argument("--data", help="dag2tree: fit parameters and levels from this CSV")
    convert.add_argument("--no-header", action="store_true")
    convert.add_argument("--cardinalities", type=_cardinalities, default=2,
                         help="dag2tree without --data: variable cardinalities")
    convert.set_defaults(handler=cmd_convert)

    dist = commands.add_parser("dist", help="Normalized hamming distance between two stagings")
    dist.add_argument("model_a")
    dist.add_argument("model_b")
    dist.set_defaults(handler=cmd_dist)

    export = commands.add_parser("export-dot", help="Graphviz DOT of a model or a DAG")
    export.add_argument("--in", dest="input", required=True)
    export.add_argument("--out", required=True)
    export.set_defaults(handler=cmd_export_dot)

    marginal = commands.add_parser("marginal", help="Staged tree over a subset of variables")
    marginal.add_argument("--model", required=True)
    marginal.add_argument("--keep", type=_name_list, required=True, help="Comma separated names")
    marginal.add_argument("--out")
    marginal.set_defaults(handler=cmd_marginal)

    binarize = commands.add_parser("binarize", help="Two-level discretization of numeric columns")
    binarize.add_argument("--data", required=True)
    binarize.add_argument("--columns", type=_name_list)
    binarize.add_argument("--low", default="low")
    binarize.add_argument("--high", default="high")
    binarize.add_argument("--out", required=True)
    binarize.set_defaults(handler=cmd_binarize)

    bench_time = commands.add_parser("bench-time", help="Timing campaign: k-parents vs saturated BHC")
    bench_time.add_argument("--p", type=_int_list, default=list(range(3, 21)), help='e.g. "3..20"')
    bench_time.add_argument("-k", type=_int_list, default=[2, 3, 4])
    bench_time.add_argument("-n", type=int, default=10000)
    bench_time.add_argument("--reps", type=int, default=20)
    bench_time.add_argument("--seed", type=int, default=settings.default_seed)
    bench_time.add_argument("--cardinality", type=int, default=2)
    bench_time.add_argument("--saturated-max-p", type=int, default=10)
    bench_time.add_argument("--parallel", action="store_true", help="Run replicates in worker processes")
    bench_time.add_argument("--workers", type=int)
    bench_time.add_argument("--out", required=True)
    bench_time.set_defaults(handler=cmd_bench_time)

    bench_recovery = commands.add_parser("bench-recovery", help="Staging recovery campaign")
    bench_recovery.add_argument("--p", type=_int_list, default=[6, 10, 20])
    bench_recovery.add_argument("-k", type=_int_list, default=[2, 3, 4])
    bench_recovery.add_argument("-n", type=_int_list, default=[100, 1000, 10000])
    bench_recovery.add_argument("--reps", type=int, default=20)
    bench_recovery.add_argument("--seed", type=int, default=settings.default_seed)
    bench_recovery.add_argument("--cardinality", type=int, default=2)
    bench_recovery.add_argument("--saturated-max-p", type=int, default=10)
    bench_recovery.add_argument("--self-check", action="store_true", help="Add truth-vs-truth rows (always 0)")
    bench_recovery.add_argument("--sequential", action="store_true")
    bench_recovery.add_argument("--workers", type=int)
    bench_recovery.add_argument("--out", required=True)
    bench_recovery.set_defaults(handler=cmd_bench_recovery)

    summarize_cmd = commands.add_parser("summarize", help="Mean and standard error of a benchmark CSV")
    summarize_cmd.add_argument("--in", dest="input", required=True)
    summarize_cmd.add_argument("--out")
    summarize_cmd.set_defaults(handler=cmd_summarize)

    config_cmd = commands.add_parser("config", help="Print the current settings")
    config_cmd.set_defaults(handler=cmd_config)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        parser = build_parser()
    except ConfigurationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return 1
    args = parser.parse_args(argv)
    try:
        args.handler(args)
        return 0
    except HANDLED_ERRORS as e:
        logger.error(f"❌ {args.command} failed: {e}")
        logger.error(f"📋 Error type: {type(e).__name__}")
        logger.debug(f"🔍 Full traceback: {traceback.format_exc()}")
        return 1
    except Exception as e:
        logger.error(f"💥 Unexpected error in {args.command}: {e}")
        logger.error(f"🔍 Full traceback: {traceback.format_exc()}")
        raise


if __name__ == "__main__":
    sys.exit(main())
