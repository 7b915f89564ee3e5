"""
Experiment runner: initial random labels, batched active selection with
retraining, forest evaluation at every budget, repeated over train/test
splits, then summary statistics and significance flags
"""

import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import ConfigError, parse_bool, worker_count
from dataset import (
    CategoricalMode,
    DataError,
    Dataset,
    PoolState,
    fit_standardizer,
    load_csv,
    train_test_split,
)
from forest import ForestParams, fit_forest
from metrics import SIGNIFICANCE_LEVEL, balanced_accuracy, wilcoxon_rank_sum
from strategies import (
    SEQUENTIAL_STRATEGIES,
    SelectionContext,
    StrategyConfig,
    StrategyKind,
    irdm_select,
    random_select,
    select_batch,
    valid_strategy_names,
)

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["strategy", "repeat", "budget", "balanced_accuracy", "wall_time_s"]
SUMMARY_COLUMNS = ["strategy", "budget", "mean", "std", "p_vs_best", "is_best", "is_equivalent"]
RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.csv"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    data_path: Optional[Path] = Field(None, description="CSV file with the dataset")
    label_column: str = Field("-1", description="Label column name or 0-based index")
    categorical_mode: CategoricalMode = CategoricalMode.ORDINAL
    has_header: bool = True
    dataset_name: str = ""
    strategies: List[StrategyConfig] = Field(..., min_length=1)
    n_init: int = Field(20, ge=1, description="Random labels before the first active step")
    batch_size: int = Field(20, ge=1, description="Labels added per active step")
    max_budget: int = Field(200, ge=1, description="Largest training set evaluated")
    n_repeats: int = Field(100, ge=1, description="Train/test splits")
    test_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    forest_params: ForestParams = Field(default_factory=ForestParams)
    master_seed: int = Field(0, ge=0)
    output_dir: Path = Path("results")
    workers: Optional[int] = Field(None, ge=1, description="Worker processes; None reads CTAL_WORKERS")
    record_timing: bool = Field(True, description="Write wall time per budget; False writes 0.0")

    @model_validator(mode="after")
    def check_schedule(self) -> "ExperimentConfig":
        if self.n_init > self.max_budget:
            raise ValueError(f"n_init ({self.n_init}) exceeds max_budget ({self.max_budget})")
        if (self.max_budget - self.n_init) % self.batch_size:
            raise ValueError("max_budget - n_init must be a multiple of batch_size")
        ids = [s.id for s in self.strategies]
        if len(set(ids)) != len(ids):
            raise ValueError(f"strategies listed more than once: {ids}")
        return self

    @property
    def budgets(self) -> List[int]:
        return list(range(self.n_init, self.max_budget + 1, self.batch_size))


# config-file / CLI keys that are passed straight to ExperimentConfig fields
_DIRECT_KEYS = {
    "data": "data_path",
    "label_col": "label_column",
    "categorical": "categorical_mode",
    "dataset_name": "dataset_name",
    "n_init": "n_init",
    "batch_size": "batch_size",
    "max_budget": "max_budget",
    "n_repeats": "n_repeats",
    "test_fraction": "test_fraction",
    "seed": "master_seed",
    "out": "output_dir",
    "workers": "workers",
    "record_timing": "record_timing",
}
_FOREST_KEYS = {
    "n_trees": "n_trees",
    "forest_min_samples_leaf": "min_samples_leaf",
    "bootstrap": "bootstrap",
    "features_per_split": "features_per_split",
}
_STRATEGY_KEYS = {
    "committee_size": "qbc_committee_size",
    "divrep_max_rounds": "divrep_max_rounds",
    "impurity_weight": "impurity_weight",
    "allocation_scope": "allocation_scope",
}


def _config_error(error: ValidationError, field_to_key: Mapping[str, str]) -> ConfigError:
    first = error.errors()[0]
    location = [str(part) for part in first["loc"]]
    key = next((field_to_key[part] for part in location if part in field_to_key), ".".join(location))
    return ConfigError(first["msg"], key=key)


def experiment_config_from_values(values: Mapping[str, str]) -> ExperimentConfig:
    """
    Assemble an ExperimentConfig from flat string values (config file merged
    with CLI overrides)
    """
    fields: Dict[str, object] = {
        field: values[key] for key, field in _DIRECT_KEYS.items() if values.get(key) not in (None, "")
    }
    if "no_header" in values:
        fields["has_header"] = not parse_bool(values["no_header"], "no_header")

    forest = {field: values[key] for key, field in _FOREST_KEYS.items() if key in values}
    strategy_fields: Dict[str, object] = {
        field: values[key] for key, field in _STRATEGY_KEYS.items() if key in values
    }
    if "tree_min_samples_leaf" in values:
        strategy_fields["tree_params"] = {"min_samples_leaf": values["tree_min_samples_leaf"]}

    names = [name.strip() for name in values.get("strategies", "").split(",") if name.strip()]
    if not names:
        raise ConfigError("at least one strategy is required", key="strategies")
    unknown = [name for name in names if name not in valid_strategy_names()]
    if unknown:
        raise ConfigError(
            f"unknown strategy {unknown[0]!r}; valid identifiers: {', '.join(valid_strategy_names())}",
            key="strategies",
        )

    field_to_key = {field: key for key, field in _DIRECT_KEYS.items()}
    field_to_key.update({field: key for key, field in _FOREST_KEYS.items()})
    field_to_key.update({field: key for key, field in _STRATEGY_KEYS.items()})
    field_to_key["tree_params"] = "tree_min_samples_leaf"
    try:
        strategies = [StrategyConfig(kind=StrategyKind(name), **strategy_fields) for name in names]
        return ExperimentConfig(
            strategies=strategies,
            forest_params=ForestParams(**forest),
            **fields,
        )
    except ValidationError as e:
        raise _config_error(e, field_to_key)


def _seed_word(key: Union[int, str]) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"seed keys must be non-negative, got {key}")
    return int(key)


def derive_seed(*keys: Union[int, str]) -> int:
    """
    Independent seed for a (master seed, repeat, strategy, stage, ...) path

    Adding a strategy or a stage never changes the seeds of another path.
    """
    sequence = np.random.SeedSequence([_seed_word(key) for key in keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RunRecord:
    strategy: str
    repeat: int
    budget: int
    balanced_accuracy: float
    wall_time: float = 0.0


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    budget: int
    mean: float
    std: float
    p_vs_best: float
    is_best: bool
    is_equivalent: bool


@dataclass(eq=False)
class ResultsTable:
    records: List[RunRecord]
    summary: List[SummaryRow]

    def records_frame(self) -> pd.DataFrame:
        return records_frame(self.records)

    def summary_frame(self) -> pd.DataFrame:
        return summary_frame(self.summary)


def _evaluate(dataset: Dataset, training: np.ndarray, test: np.ndarray,
              params: ForestParams, seed: int) -> float:
    forest = fit_forest(dataset.features, dataset.labels, training, params, seed, n_classes=dataset.n_classes)
    predictions = forest.predict_batch(dataset.features[test])
    return balanced_accuracy(dataset.labels[test], predictions, dataset.n_classes)


def run_single(
    dataset: Dataset,
    strategy: StrategyConfig,
    config: ExperimentConfig,
    repeat_seed: int,
    repeat: int = 0,
) -> List[RunRecord]:
    """
    One learning curve: one strategy on one train/test split

    The split, the standardizer and the initial random labels depend only on
    repeat_seed, so every strategy of a repeat sees the same ones. Sequential
    strategies grow one labeled set batch by batch; iRDM picks a fresh
    training set of each size from the same pool.

    Returns:
        One RunRecord per budget level, n_init to max_budget
    """
    train, test = train_test_split(dataset, config.test_fraction, derive_seed(repeat_seed, "split"))
    if config.max_budget > train.size:
        raise DataError(f"max_budget {config.max_budget} exceeds the training pool of {train.size}")

    standardizer = fit_standardizer(dataset, train)
    context = SelectionContext(
        features=dataset.features,
        distance_features=standardizer.apply(dataset.features),
        labels=dataset.labels,
        n_classes=dataset.n_classes,
    )
    pool = PoolState(train)
    sequential = strategy.kind in SEQUENTIAL_STRATEGIES
    if sequential:
        pool.label(random_select(pool, config.n_init, derive_seed(repeat_seed, "init")))

    records: List[RunRecord] = []
    for budget in config.budgets:
        started = time.perf_counter()
        select_seed = derive_seed(repeat_seed, strategy.id, "select", budget)
        if sequential:
            missing = budget - pool.n_labeled
            if missing > 0:
                pool.label(select_batch(strategy, context, pool, missing, select_seed))
            training = pool.labeled
        else:
            training = np.asarray(
                irdm_select(context.distance_features, pool, budget, select_seed, strategy.divrep_max_rounds),
                dtype=np.int64,
            )

        if training.size != budget:
            raise RuntimeError(f"{strategy.label} produced {training.size} rows for budget {budget}")
        if np.intersect1d(training, test).size:
            raise RuntimeError(f"{strategy.label} selected test rows")

        score = _evaluate(dataset, training, test, config.forest_params,
                          derive_seed(repeat_seed, strategy.id, "forest", budget))
        elapsed = time.perf_counter() - started
        records.append(RunRecord(
            strategy=strategy.id,
            repeat=repeat,
            budget=budget,
            balanced_accuracy=score,
            wall_time=elapsed if config.record_timing else 0.0,
        ))
        logger.debug(f"{strategy.label} repeat {repeat} budget {budget}: {score:.3f}")
    return records


def _run_repeat(dataset: Dataset, config: ExperimentConfig, repeat: int) -> List[RunRecord]:
    repeat_seed = derive_seed(config.master_seed, "repeat", repeat)
    records: List[RunRecord] = []
    for strategy in config.strategies:
        records.extend(run_single(dataset, strategy, config, repeat_seed, repeat))
    return records


def _sort_records(records: Sequence[RunRecord], strategy_order: Sequence[str]) -> List[RunRecord]:
    rank = {strategy: position for position, strategy in enumerate(strategy_order)}
    return sorted(records, key=lambda r: (rank[r.strategy], r.repeat, r.budget))


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> ResultsTable:
    """
    All strategies over n_repeats paired train/test splits

    Repeats run in worker processes; records are merged by
    (strategy, repeat, budget), so the table does not depend on completion
    order.

    Args:
        config: Experiment configuration
        dataset: Already loaded dataset; loaded from config.data_path when None

    Returns:
        ResultsTable with every record and the summary
    """
    if dataset is None:
        if config.data_path is None:
            raise ConfigError("no dataset given", key="data")
        dataset = load_csv(
            config.data_path,
            config.label_column,
            config.categorical_mode,
            has_header=config.has_header,
            name=config.dataset_name,
        )

    workers = min(config.workers or worker_count(), config.n_repeats)
    logger.info(
        f"Running {len(config.strategies)} strategies x {config.n_repeats} repeats on {dataset.name} "
        f"(budgets {config.n_init}..{config.max_budget}, {workers} workers)"
    )

    records: List[RunRecord] = []
    if workers == 1:
        for repeat in range(config.n_repeats):
            records.extend(_run_repeat(dataset, config, repeat))
            logger.info(f"Repeat {repeat + 1}/{config.n_repeats} done")
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(_run_repeat, dataset, config, repeat): repeat
                for repeat in range(config.n_repeats)
            }
            for done, future in enumerate(as_completed(futures), start=1):
                records.extend(future.result())
                logger.info(f"Repeat {futures[future] + 1} done ({done}/{config.n_repeats})")

    records = _sort_records(records, [s.id for s in config.strategies])
    return ResultsTable(records=records, summary=summarize(records))


def summarize(records: Sequence[RunRecord], alpha: float = SIGNIFICANCE_LEVEL) -> List[SummaryRow]:
    """
    Mean, sample std (ddof=1) and significance per (strategy, budget)

    At every budget the strategy with the highest mean is best (first listed
    wins a tie). Any other strategy whose scores are not significantly
    different from the best one's (two-sided rank-sum p >= alpha) is flagged
    equivalent; the best is equivalent to itself and has no p-value.
    """
    groups: Dict[Tuple[str, int], List[Tuple[int, float]]] = {}
    strategy_order: List[str] = []
    for record in records:
        if record.strategy not in strategy_order:
            strategy_order.append(record.strategy)
        groups.setdefault((record.strategy, record.budget), []).append((record.repeat, record.balanced_accuracy))

    scores = {
        key: np.array([value for _, value in sorted(pairs)], dtype=float)
        for key, pairs in groups.items()
    }

    rows: List[SummaryRow] = []
    for budget in sorted({budget for _, budget in groups}):
        present = [s for s in strategy_order if (s, budget) in scores]
        means = {s: float(np.mean(scores[s, budget])) for s in present}
        best = max(present, key=lambda s: means[s])
        for strategy in present:
            values = scores[strategy, budget]
            std = float(np.std(values, ddof=1)) if values.size > 1 else float("nan")
            if strategy == best:
                p_value, equivalent = float("nan"), True
            else:
                p_value = wilcoxon_rank_sum(scores[best, budget], values).p_value
                equivalent = p_value >= alpha
            rows.append(SummaryRow(
                strategy=strategy,
                budget=budget,
                mean=means[strategy],
                std=std,
                p_vs_best=p_value,
                is_best=strategy == best,
                is_equivalent=equivalent,
            ))
    return rows


def records_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.strategy, r.repeat, r.budget, r.balanced_accuracy, r.wall_time) for r in records],
        columns=RECORD_COLUMNS,
    )


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(row) for row in rows], columns=SUMMARY_COLUMNS)
    frame["is_best"] = frame["is_best"].astype(int)
    frame["is_equivalent"] = frame["is_equivalent"].astype(int)
    return frame


def write_records_csv(records: Sequence[RunRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, lineterminator="\n")
    return path


def write_summary_csv(rows: Sequence[SummaryRow], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary_frame(rows).to_csv(path, index=False, lineterminator="\n")
    return path


def read_records_csv(path: Path) -> List[RunRecord]:
    """Records written by write_records_csv, floats read back exactly"""
    try:
        frame = pd.read_csv(path, dtype={"strategy": str}, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"{path}: cannot read records ({e})")
    if list(frame.columns) != RECORD_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(RECORD_COLUMNS)}")
    return [
        RunRecord(
            strategy=row.strategy,
            repeat=int(row.repeat),
            budget=int(row.budget),
            balanced_accuracy=float(row.balanced_accuracy),
            wall_time=float(row.wall_time_s),
        )
        for row in frame.itertuples(index=False)
    ]


def read_summary_csv(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"strategy": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"{path}: cannot read summary ({e})")
    if list(frame.columns) != SUMMARY_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(SUMMARY_COLUMNS)}")
    return frame


def write_outputs(table: ResultsTable, output_dir: Path) -> Tuple[Path, Path]:
    """records.csv and summary.csv under output_dir"""
    output_dir = Path(output_dir)
    records_path = write_records_csv(table.records, output_dir / RECORDS_FILE)
    summary_path = write_summary_csv(table.summary, output_dir / SUMMARY_FILE)
    logger.info(f"Wrote {len(table.records)} records to {records_path} and summary to {summary_path}")
    return records_path, summary_path
