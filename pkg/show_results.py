#!/usr/bin/env python3
"""
Display experiment results as rich tables

    python show_results.py results/summary.csv
    python show_results.py --run 3          # stored run, re-summarized
    python show_results.py --runs           # list stored runs
"""

import sys
from typing import Iterable, List, Sequence

import pandas as pd
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from benchmarks import ReferenceComparison
from dataset import Dataset, imbalance_ratio
from strategies import STRATEGY_LABELS, BudgetAllocation, StrategyKind
from tree import LeafStats

console = Console()


def strategy_label(strategy_id: str) -> str:
    try:
        return STRATEGY_LABELS[StrategyKind(strategy_id)]
    except ValueError:
        return strategy_id


def summary_table(summary: pd.DataFrame, title: str = "Balanced accuracy") -> Table:
    """
    Budget x strategy grid of mean (std); the best strategy per budget is
    starred and every statistically equivalent one is bold
    """
    strategies = list(dict.fromkeys(summary["strategy"]))
    table = Table(title=f"📊 {title}", box=box.ROUNDED)
    table.add_column("Budget", style="cyan", justify="right")
    for strategy in strategies:
        table.add_column(strategy_label(strategy), justify="right")

    for budget, rows in summary.groupby("budget", sort=True):
        cells = []
        by_strategy = {row.strategy: row for row in rows.itertuples(index=False)}
        for strategy in strategies:
            row = by_strategy.get(strategy)
            if row is None:
                cells.append("-")
                continue
            std = "-" if pd.isna(row.std) else f"{row.std:.3f}"
            cell = f"{row.mean:.3f}{'*' if row.is_best else ''} ({std})"
            cells.append(f"[bold green]{cell}[/bold green]" if row.is_equivalent else cell)
        table.add_row(str(budget), *cells)
    return table


def leaf_stats_table(stats: Sequence[LeafStats], allocation: BudgetAllocation) -> Table:
    table = Table(title="🌳 Selection tree leaves", box=box.ROUNDED)
    table.add_column("Leaf", style="cyan", justify="right")
    table.add_column("Labeled", justify="right")
    table.add_column("Unlabeled", justify="right")
    table.add_column("Class probs", style="white")
    table.add_column("Entropy", style="yellow", justify="right")
    table.add_column("Density", justify="right")
    table.add_column("Pure", style="bold")
    table.add_column("Allocated", style="green", justify="right")

    for stat in stats:
        table.add_row(
            str(stat.leaf_id),
            str(stat.labeled_indices.size),
            str(stat.n_unlabeled),
            " ".join(f"{p:.2f}" for p in stat.class_probs),
            f"{stat.entropy:.3f}",
            f"{stat.density:.4f}",
            "✅" if stat.is_pure else "-",
            str(allocation.per_leaf.get(stat.leaf_id, 0)),
        )
    table.caption = (
        f"pure group {allocation.n_pure_group}, impure group {allocation.n_impure_group}, "
        f"allocated {allocation.total} ({allocation.scope.value})"
    )
    return table


def comparison_table(comparisons: Iterable[ReferenceComparison], tolerance: float) -> Table:
    table = Table(title=f"🎯 Published scores (tolerance ±{tolerance:.3f})", box=box.ROUNDED)
    table.add_column("Strategy", style="cyan")
    table.add_column("Budget", justify="right")
    table.add_column("Observed", style="yellow", justify="right")
    table.add_column("Published", style="green", justify="right")
    table.add_column("Diff", justify="right")
    table.add_column("Result", style="bold")

    for c in comparisons:
        observed_std = "-" if pd.isna(c.observed_std) else f"{c.observed_std:.3f}"
        table.add_row(
            strategy_label(c.strategy),
            str(c.budget),
            f"{c.observed_mean:.3f} ({observed_std})",
            f"{c.reference_mean:.3f} ({c.reference_std:.3f})",
            f"{c.difference:+.3f}",
            "✅ PASS" if c.within_tolerance else "❌ FAIL",
        )
    return table


def dataset_panel(dataset: Dataset) -> Panel:
    return Panel.fit(
        f"[bold blue]{dataset.name}[/bold blue]\n"
        f"Samples: {dataset.n_samples}\n"
        f"Features: {dataset.n_features}\n"
        f"Classes: {dataset.n_classes}\n"
        f"Imbalance ratio: {imbalance_ratio(dataset):.2f}",
        box=box.ROUNDED,
    )


def class_counts_table(dataset: Dataset) -> Table:
    table = Table(title="Class counts", box=box.ROUNDED)
    table.add_column("Id", style="cyan", justify="right")
    table.add_column("Label", style="white")
    table.add_column("Count", style="yellow", justify="right")
    names = dataset.decode_labels(range(dataset.n_classes))
    for class_id, (name, count) in enumerate(zip(names, dataset.class_counts())):
        table.add_row(str(class_id), name, str(int(count)))
    return table


def runs_table(runs: List[dict]) -> Table:
    table = Table(title="Stored runs", box=box.ROUNDED)
    table.add_column("Id", style="cyan", justify="right")
    table.add_column("Dataset", style="white")
    table.add_column("Strategies")
    table.add_column("Repeats", justify="right")
    table.add_column("Seed", justify="right")
    table.add_column("Records", justify="right")
    table.add_column("Created", style="dim")
    for run in runs:
        created = run["created_at"].strftime("%Y-%m-%d %H:%M") if run["created_at"] else "-"
        table.add_row(
            str(run["id"]),
            run["dataset"],
            ", ".join(run["strategies"]),
            str(run["n_repeats"]),
            str(run["master_seed"]),
            str(run["n_records"]),
            created,
        )
    return table


def _stored(args: List[str]) -> None:
    from database.config import init_db, make_session_factory, close_db
    from database.results_service import ResultsService
    from harness import summarize, summary_frame

    engine, session_factory = make_session_factory()
    init_db(engine)
    service = ResultsService()
    try:
        with session_factory() as session:
            if args[0] == "--runs":
                console.print(runs_table(service.list_runs(session)))
                return
            run_id = int(args[1])
            records = service.load_records(session, run_id)
        console.print(summary_table(summary_frame(summarize(records)), title=f"Run {run_id}"))
    finally:
        close_db(engine)


def main(args: List[str]) -> int:
    from harness import read_summary_csv

    if not args:
        console.print(__doc__)
        return 1
    try:
        if args[0] in ("--run", "--runs"):
            _stored(args)
        else:
            console.print(summary_table(read_summary_csv(args[0]), title=args[0]))
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
