"""
Runtime settings and experiment config files
"""

import logging
import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# load environment variables, this is optional, only used for local development
load_dotenv(dotenv_path=".env.local")

LOG_LEVEL = os.getenv("CTAL_LOG_LEVEL", "INFO")
RESULTS_DATABASE_URL = os.getenv("RESULTS_DATABASE_URL", "sqlite:///results/ctal_results.db")


class ConfigError(ValueError):
    """Invalid configuration value, config file line or CLI flag"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


# Keys accepted in a config file; values are kept as strings until the
# experiment config is assembled.
CONFIG_KEYS = (
    "data",
    "label_col",
    "categorical",
    "no_header",
    "dataset_name",
    "strategies",
    "n_init",
    "batch_size",
    "max_budget",
    "n_repeats",
    "test_fraction",
    "seed",
    "out",
    "n_trees",
    "forest_min_samples_leaf",
    "bootstrap",
    "features_per_split",
    "tree_min_samples_leaf",
    "committee_size",
    "divrep_max_rounds",
    "impurity_weight",
    "allocation_scope",
    "workers",
    "record_timing",
)

TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


def worker_count() -> int:
    """Worker processes for running repeats, from CTAL_WORKERS or the core count"""
    raw = os.getenv("CTAL_WORKERS")
    if raw:
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", key="CTAL_WORKERS")
        if workers < 1:
            raise ConfigError("must be at least 1", key="CTAL_WORKERS")
        return workers
    return os.cpu_count() or 1


def parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in TRUE_VALUES:
        return True
    if lowered in FALSE_VALUES:
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", key=key)


def read_config_file(path: Path) -> Dict[str, str]:
    """
    Read a flat ``key = value`` config file

    Blank lines and lines starting with ``#`` are skipped. Keys must be one of
    CONFIG_KEYS; a repeated key keeps the last value.

    Args:
        path: Config file location

    Returns:
        Mapping of key to raw string value
    """
    values: Dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}", key=str(path))

    for line_number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_number} is not 'key = value'", key=str(path))
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key (line {line_number})", key=key)
        values[key] = value

    logger.debug(f"Read {len(values)} keys from {path}")
    return values
