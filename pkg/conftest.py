"""
Shared fixtures: synthetic datasets, CSV files and an in-memory results store
"""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from dataset import Dataset


def make_blobs(n_per_class: int = 60, n_classes: int = 2, spread: float = 0.5,
               gap: float = 6.0, seed: int = 0, name: str = "blobs") -> Dataset:
    """Well-separated Gaussian blobs along the diagonal"""
    rng = np.random.default_rng(seed)
    centers = np.array([[gap * c, gap * c] for c in range(n_classes)], dtype=float)
    features = np.vstack([rng.normal(center, spread, size=(n_per_class, 2)) for center in centers])
    labels = np.repeat(np.arange(n_classes), n_per_class)
    return Dataset(
        features=features,
        labels=labels,
        n_classes=n_classes,
        feature_names=("x0", "x1"),
        name=name,
    )


def make_noisy(n_samples: int = 300, n_features: int = 3, n_classes: int = 2, seed: int = 0) -> Dataset:
    """Overlapping classes so trees grow several impure leaves"""
    rng = np.random.default_rng(seed)
    labels = np.arange(n_samples) % n_classes
    features = rng.normal(size=(n_samples, n_features)) + labels[:, None] * 0.8
    return Dataset(
        features=features,
        labels=labels,
        n_classes=n_classes,
        feature_names=tuple(f"f{i}" for i in range(n_features)),
        name="noisy",
    )


@pytest.fixture
def blobs() -> Dataset:
    return make_blobs()


@pytest.fixture
def noisy() -> Dataset:
    return make_noisy()


@pytest.fixture
def write_csv(tmp_path) -> Callable[[str, str], Path]:
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture
def blobs_csv(tmp_path) -> Path:
    dataset = make_blobs(n_per_class=100, seed=3)
    lines = ["x0,x1,class"]
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(f"{row[0]!r},{row[1]!r},{'genuine' if label == 0 else 'forged'}")
    path = tmp_path / "blobs.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def results_session():
    from database.config import close_db, init_db, make_session_factory

    engine, session_factory = make_session_factory("sqlite://")
    init_db(engine)
    with session_factory() as session:
        yield session
    close_db(engine)
