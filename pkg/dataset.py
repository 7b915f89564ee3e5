"""
Dataset ingestion, train/test splitting, standardization and pool bookkeeping
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Problem with the input data: unreadable, ragged, unparsable or degenerate"""


class CategoricalMode(Enum):
    """How non-numeric feature columns are encoded"""
    ORDINAL = "ordinal"
    ONEHOT = "onehot"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus contiguous integer labels; immutable ground truth"""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: Tuple[str, ...]
    name: str
    class_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x D matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must have one entry per feature row")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.n_classes < 2:
            raise DataError(f"dataset has a single class ({self.n_classes}); at least 2 are required")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise DataError("labels must lie in 0..n_classes-1")
        if np.unique(self.labels).size != self.n_classes:
            raise DataError("every class id must appear at least once")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError("feature_names must match the number of columns")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def decode_labels(self, ids: Sequence[int]) -> List[str]:
        """Map class ids back to the label strings seen in the file"""
        names = self.class_names or tuple(str(i) for i in range(self.n_classes))
        return [names[int(i)] for i in ids]


def imbalance_ratio(dataset: Dataset) -> float:
    """Majority-class count over minority-class count"""
    counts = dataset.class_counts()
    return float(counts.max() / counts.min())


def _resolve_label_column(frame: pd.DataFrame, label_column: Union[str, int]) -> str:
    columns = list(frame.columns)
    if isinstance(label_column, str) and label_column in columns:
        return label_column
    try:
        position = int(label_column)
    except (TypeError, ValueError):
        raise DataError(f"label column {label_column!r} not found; columns are {columns}")
    if position < 0:
        position += len(columns)
    if not 0 <= position < len(columns):
        raise DataError(f"label column index {position} out of range for {len(columns)} columns")
    return columns[position]


def _encode_column(name: str, column: pd.Series, mode: CategoricalMode) -> Tuple[np.ndarray, List[str]]:
    """
    Encode one feature column as one or more real-valued columns

    A column where every cell parses as a number is numeric. A column where no
    cell parses is categorical. A mix of the two means a bad numeric cell.
    """
    numeric = pd.to_numeric(column, errors="coerce")
    parsed = numeric.notna()

    if parsed.all():
        values = numeric.to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            row = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"non-finite value in column {name!r} at data row {row}")
        return values.reshape(-1, 1), [name]

    if parsed.any():
        row = int(np.flatnonzero(~parsed.to_numpy())[0])
        raise DataError(f"non-parsable numeric cell {column.iloc[row]!r} in column {name!r} at data row {row}")

    codes, categories = pd.factorize(column, sort=False)
    if mode is CategoricalMode.ORDINAL:
        return codes.astype(float).reshape(-1, 1), [name]

    onehot = np.zeros((len(column), len(categories)), dtype=float)
    onehot[np.arange(len(column)), codes] = 1.0
    return onehot, [f"{name}={category}" for category in categories]


def load_csv(
    path: Union[str, Path],
    label_column: Union[str, int],
    categorical_mode: Union[str, CategoricalMode] = CategoricalMode.ORDINAL,
    has_header: bool = True,
    name: str = "",
) -> Dataset:
    """
    Load a comma separated file into a Dataset

    Labels are re-encoded to 0..c-1 in order of first appearance. Numeric
    columns are parsed as reals; categorical columns are encoded per
    categorical_mode.

    Args:
        path: CSV file (UTF-8, comma separator, '.' decimal point)
        label_column: Column name, or 0-based column index (negative counts from the end)
        categorical_mode: "ordinal" or "onehot"
        has_header: Whether the first row holds column names
        name: Dataset name; defaults to the file stem

    Returns:
        The loaded Dataset
    """
    path = Path(path)
    mode = CategoricalMode(categorical_mode)

    try:
        # the header is read as a plain row so the parser holds every row to its width
        frame = pd.read_csv(
            path,
            header=None,
            index_col=False,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: no data rows")
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: ragged rows ({e})")
    except OSError as e:
        raise DataError(f"{path}: cannot read file ({e})")

    if has_header and not frame.empty:
        header = [str(name) for name in frame.iloc[0]]
        frame = frame.iloc[1:].reset_index(drop=True)
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header {header}")
        frame.columns = header
    else:
        frame.columns = [str(column) for column in frame.columns]

    if frame.empty:
        raise DataError(f"{path}: no data rows")
    # rows shorter than the first one come back with missing cells
    if frame.isna().to_numpy().any():
        row = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataError(f"{path}: ragged rows (data row {row} has too few fields)")

    label_name = _resolve_label_column(frame, label_column)

    label_codes, class_names = pd.factorize(frame[label_name], sort=False)
    if len(class_names) < 2:
        raise DataError(f"{path}: single-class dataset (only {list(class_names)})")

    blocks, feature_names = [], []
    for column_name in frame.columns:
        if column_name == label_name:
            continue
        block, names = _encode_column(column_name, frame[column_name], mode)
        blocks.append(block)
        feature_names.extend(names)

    if not blocks:
        raise DataError(f"{path}: no feature columns besides the label column")

    dataset = Dataset(
        features=np.hstack(blocks),
        labels=label_codes.astype(np.int64),
        n_classes=len(class_names),
        feature_names=tuple(feature_names),
        name=name or path.stem,
        class_names=tuple(str(c) for c in class_names),
    )
    logger.info(
        f"Loaded {dataset.name}: N={dataset.n_samples}, D={dataset.n_features}, c={dataset.n_classes}"
    )
    return dataset


def train_test_split(dataset: Dataset, test_fraction: float, rng_seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Uniform split of row indices into a training pool and a test set

    The test size is N * test_fraction rounded half-up. Both index arrays are
    returned sorted.

    Raises:
        DataError: test_fraction outside (0, 1), fewer than 2 samples, or a
            rounded test size that leaves either side empty (N=2 with
            fraction 0.2 gives 0 test rows)
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = dataset.n_samples
    if n < 2:
        raise DataError("at least 2 samples are required to split")

    n_test = int(np.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test >= n:
        raise DataError(f"test_fraction {test_fraction} leaves an empty side for N={n}")

    order = np.random.default_rng(rng_seed).permutation(n)
    return np.sort(order[n_test:]), np.sort(order[:n_test])


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature z-score fitted on the training pool"""

    mean: np.ndarray
    std: np.ndarray

    @property
    def _active(self) -> np.ndarray:
        return self.std > 0

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        safe_std = np.where(self._active, self.std, 1.0)
        return np.where(self._active, (matrix - self.mean) / safe_std, 0.0)

    def inverse(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        return np.where(self._active, matrix * self.std + self.mean, self.mean)


def fit_standardizer(dataset: Dataset, train_indices: np.ndarray) -> Standardizer:
    """Statistics come from the training rows only"""
    train_indices = np.asarray(train_indices)
    if train_indices.size == 0:
        raise DataError("cannot fit a standardizer on an empty pool")
    pool = dataset.features[train_indices]
    return Standardizer(mean=pool.mean(axis=0), std=pool.std(axis=0))


@dataclass(eq=False)
class PoolState:
    """
    Labeled / unlabeled split of the training pool

    Owned by a single running experiment. The labeled set only grows; the
    order in which indices were labeled is kept.
    """

    pool_indices: np.ndarray
    _labeled: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.pool_indices = np.asarray(self.pool_indices, dtype=np.int64)
        if np.unique(self.pool_indices).size != self.pool_indices.size:
            raise DataError("pool indices must be distinct")
        self._labeled_set = set(self._labeled)

    @property
    def labeled(self) -> np.ndarray:
        return np.asarray(self._labeled, dtype=np.int64)

    @property
    def unlabeled(self) -> np.ndarray:
        if not self._labeled_set:
            return self.pool_indices.copy()
        mask = np.isin(self.pool_indices, self.labeled, invert=True)
        return self.pool_indices[mask]

    @property
    def pool_size(self) -> int:
        return int(self.pool_indices.size)

    @property
    def n_labeled(self) -> int:
        return len(self._labeled)

    def label(self, indices: Sequence[int]) -> None:
        """Move unlabeled pool indices into the labeled set"""
        new = [int(i) for i in indices]
        if len(set(new)) != len(new):
            raise ValueError("indices to label must be distinct")
        unlabeled = set(self.unlabeled.tolist())
        stray = [i for i in new if i not in unlabeled]
        if stray:
            raise ValueError(f"indices {stray[:5]} are not unlabeled pool members")
        self._labeled.extend(new)
        self._labeled_set.update(new)

    def copy(self) -> "PoolState":
        return PoolState(self.pool_indices.copy(), list(self._labeled))
