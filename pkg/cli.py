#!/usr/bin/env python3
"""
Command line entrypoint

    python cli.py run --data banknote.csv --label-col class --strategies rs,ctal-divrep --seed 7 --out results/
    python cli.py summarize --records results/records.csv
    python cli.py inspect-tree --data banknote.csv --label-col class --n-labeled 40
    python cli.py describe --data banknote.csv --label-col class
    python cli.py compare --summary results/summary.csv --dataset banknote

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from config import CONFIG_KEYS, LOG_LEVEL, RESULTS_DATABASE_URL, ConfigError, parse_bool, read_config_file
from dataset import CategoricalMode, DataError, Dataset, PoolState, load_csv, train_test_split

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError instead of exiting with argparse's code 2"""

    def error(self, message):
        raise ConfigError(message)


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file; flags override it")
    parser.add_argument("--data", help="CSV dataset")
    parser.add_argument("--label-col", dest="label_col", help="Label column name or index (default: last)")
    parser.add_argument("--categorical", choices=[m.value for m in CategoricalMode])
    parser.add_argument("--no-header", dest="no_header", action="store_const", const="true",
                        help="First row is data, not column names")
    parser.add_argument("--dataset-name", dest="dataset_name")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategies", help="Comma-separated: rs, ctal-rs, ctal-divrep, irdm, qbc")
    parser.add_argument("--n-init", dest="n_init")
    parser.add_argument("--batch-size", dest="batch_size")
    parser.add_argument("--max-budget", dest="max_budget")
    parser.add_argument("--n-repeats", dest="n_repeats")
    parser.add_argument("--test-fraction", dest="test_fraction")
    parser.add_argument("--seed")
    parser.add_argument("--out", help="Output directory for records.csv and summary.csv")
    parser.add_argument("--n-trees", dest="n_trees")
    parser.add_argument("--forest-min-samples-leaf", dest="forest_min_samples_leaf")
    parser.add_argument("--bootstrap")
    parser.add_argument("--features-per-split", dest="features_per_split", choices=["all", "sqrt"])
    parser.add_argument("--tree-min-samples-leaf", dest="tree_min_samples_leaf")
    parser.add_argument("--committee-size", dest="committee_size")
    parser.add_argument("--divrep-max-rounds", dest="divrep_max_rounds")
    parser.add_argument("--impurity-weight", dest="impurity_weight")
    parser.add_argument("--allocation-scope", dest="allocation_scope", choices=["per_group", "global"])
    parser.add_argument("--workers")
    parser.add_argument("--record-timing", dest="record_timing")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="ctal-bench", description="Tree-guided active learning benchmark")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment and write records + summary")
    _add_dataset_flags(run)
    _add_experiment_flags(run)
    run.add_argument("--db", nargs="?", const=RESULTS_DATABASE_URL,
                     help="Also store results in this database (default RESULTS_DATABASE_URL)")

    summarize = commands.add_parser("summarize", help="Recompute the summary from stored records")
    source = summarize.add_mutually_exclusive_group(required=True)
    source.add_argument("--records", type=Path, help="records.csv written by run")
    source.add_argument("--db-run", dest="db_run", type=int, help="Id of a stored run")
    summarize.add_argument("--db", default=RESULTS_DATABASE_URL)
    summarize.add_argument("--out", type=Path, help="Directory for summary.csv (default: next to the records)")

    inspect = commands.add_parser("inspect-tree", help="Fit the selection tree and show leaf stats")
    _add_dataset_flags(inspect)
    inspect.add_argument("--n-labeled", dest="n_labeled", type=int, default=20)
    inspect.add_argument("--n-act", dest="n_act", type=int, default=20, help="Labels to allocate")
    inspect.add_argument("--seed", type=int, default=0)
    inspect.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.2)
    inspect.add_argument("--tree-min-samples-leaf", dest="tree_min_samples_leaf", type=int, default=10)
    inspect.add_argument("--impurity-weight", dest="impurity_weight", type=float, default=3.0)
    inspect.add_argument("--allocation-scope", dest="allocation_scope", default="per_group",
                         choices=["per_group", "global"])
    inspect.add_argument("--export", action="store_true", help="Also print the tree")

    describe = commands.add_parser("describe", help="Dataset shape, class counts and imbalance ratio")
    _add_dataset_flags(describe)

    compare = commands.add_parser("compare", help="Compare a summary with published scores")
    compare.add_argument("--summary", type=Path, required=True)
    compare.add_argument("--dataset", required=True, help="Benchmark key, e.g. banknote")
    compare.add_argument("--tolerance", type=float, default=0.03)

    return parser


def _merged_values(args: argparse.Namespace) -> Dict[str, str]:
    """Config file values overridden by the flags that were given"""
    values: Dict[str, str] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)
    return values


def _load_dataset(values: Dict[str, str]) -> Dataset:
    if not values.get("data"):
        raise ConfigError("a dataset is required", key="--data")
    has_header = not parse_bool(values.get("no_header", "false"), "no_header")
    try:
        mode = CategoricalMode(values.get("categorical", CategoricalMode.ORDINAL.value))
    except ValueError:
        raise ConfigError(f"expected one of {[m.value for m in CategoricalMode]}", key="categorical")
    return load_csv(
        values["data"],
        values.get("label_col", "-1"),
        mode,
        has_header=has_header,
        name=values.get("dataset_name", ""),
    )


def _run(args: argparse.Namespace) -> int:
    from harness import experiment_config_from_values, run_experiment, summary_frame, write_outputs
    from show_results import console, summary_table

    values = _merged_values(args)
    config = experiment_config_from_values(values)
    dataset = _load_dataset(values)
    table = run_experiment(config, dataset)
    write_outputs(table, config.output_dir)
    console.print(summary_table(summary_frame(table.summary), title=f"{dataset.name} balanced accuracy"))

    if args.db:
        from database.config import close_db, init_db, make_session_factory
        from database.results_service import ResultsService

        engine, session_factory = make_session_factory(args.db)
        try:
            init_db(engine)
            with session_factory() as session:
                run_id = ResultsService().save_results(session, config, table, dataset_name=dataset.name)
            console.print(f"[dim]Stored as run {run_id} in {args.db}[/dim]")
        finally:
            close_db(engine)
    return EXIT_OK


def _summarize(args: argparse.Namespace) -> int:
    from harness import SUMMARY_FILE, read_records_csv, summarize, summary_frame, write_summary_csv
    from show_results import console, summary_table

    if args.records:
        records = read_records_csv(args.records)
        out_dir = args.out or args.records.parent
    else:
        from database.config import close_db, init_db, make_session_factory
        from database.results_service import ResultsService

        engine, session_factory = make_session_factory(args.db)
        try:
            init_db(engine)
            with session_factory() as session:
                records = ResultsService().load_records(session, args.db_run)
        except KeyError as e:
            raise ConfigError(str(e).strip("'\""), key="--db-run")
        finally:
            close_db(engine)
        out_dir = args.out or Path("results") / f"run_{args.db_run}"

    if not records:
        raise DataError("no records to summarize")
    summary = summarize(records)
    path = write_summary_csv(summary, out_dir / SUMMARY_FILE)
    logger.info(f"Wrote summary to {path}")
    console.print(summary_table(summary_frame(summary)))
    return EXIT_OK


def _inspect_tree(args: argparse.Namespace) -> int:
    from pydantic import ValidationError

    from harness import derive_seed
    from show_results import console, dataset_panel, leaf_stats_table
    from strategies import AllocationScope, allocate_budget, random_select
    from tree import TreeParams, compute_leaf_stats, fit_tree

    dataset = _load_dataset(_merged_values(args))
    if args.n_labeled < 1:
        raise ConfigError("must be at least 1", key="--n-labeled")
    if args.n_act < 0:
        raise ConfigError("must be non-negative", key="--n-act")
    if args.impurity_weight <= 0:
        raise ConfigError("must be positive", key="--impurity-weight")
    try:
        params = TreeParams(min_samples_leaf=args.tree_min_samples_leaf)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], key="--tree-min-samples-leaf")

    # same split and initial labels as repeat 0 of a run with this seed
    repeat_seed = derive_seed(args.seed, "repeat", 0)
    train, _ = train_test_split(dataset, args.test_fraction, derive_seed(repeat_seed, "split"))
    if args.n_labeled >= train.size:
        raise DataError(f"--n-labeled {args.n_labeled} leaves no unlabeled rows in a pool of {train.size}")

    pool = PoolState(train)
    pool.label(random_select(pool, args.n_labeled, derive_seed(repeat_seed, "init")))
    if pool.n_labeled < params.min_samples_leaf:
        raise ConfigError(f"needs at least min_samples_leaf={params.min_samples_leaf}", key="--n-labeled")

    tree = fit_tree(dataset.features, dataset.labels, pool.labeled, params, n_classes=dataset.n_classes)
    stats = compute_leaf_stats(tree, dataset.features, dataset.labels, pool)
    allocation = allocate_budget(stats, args.n_act, args.impurity_weight, AllocationScope(args.allocation_scope))

    console.print(dataset_panel(dataset))
    console.print(leaf_stats_table(stats, allocation))
    if args.export:
        console.print(tree.export_text(dataset.feature_names), markup=False)
    return EXIT_OK


def _describe(args: argparse.Namespace) -> int:
    from benchmarks import get_benchmark
    from show_results import class_counts_table, console, dataset_panel

    dataset = _load_dataset(_merged_values(args))
    console.print(dataset_panel(dataset))
    console.print(class_counts_table(dataset))
    try:
        benchmark = get_benchmark(dataset.name)
    except KeyError:
        return EXIT_OK
    console.print(
        f"[dim]Published {benchmark.title}: D={benchmark.n_features}, N={benchmark.n_samples}, "
        f"c={benchmark.n_classes}, IR={benchmark.imbalance_ratio:.2f}[/dim]"
    )
    return EXIT_OK


def _compare(args: argparse.Namespace) -> int:
    from benchmarks import compare_to_reference
    from harness import SummaryRow, read_summary_csv
    from show_results import comparison_table, console

    frame = read_summary_csv(args.summary)
    rows = [
        SummaryRow(
            strategy=row.strategy,
            budget=int(row.budget),
            mean=float(row.mean),
            std=float(row.std),
            p_vs_best=float(row.p_vs_best),
            is_best=bool(row.is_best),
            is_equivalent=bool(row.is_equivalent),
        )
        for row in frame.itertuples(index=False)
    ]
    try:
        comparisons = compare_to_reference(rows, args.dataset, args.tolerance)
    except KeyError as e:
        raise ConfigError(str(e).strip("'\""), key="--dataset")
    console.print(comparison_table(comparisons, args.tolerance))
    return EXIT_OK


COMMANDS = {
    "run": _run,
    "summarize": _summarize,
    "inspect-tree": _inspect_tree,
    "describe": _describe,
    "compare": _compare,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(cli_main())
