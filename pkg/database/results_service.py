"""
Service for storing and reading back experiment results
"""

import logging
from typing import Any, Dict, List

from sqlalchemy import func, select
from sqlalchemy.orm import Session

from database.models import ExperimentRun, RunRecordRow
from harness import ExperimentConfig, ResultsTable, RunRecord

logger = logging.getLogger(__name__)


class ResultsService:
    """Service for all results table operations"""

    def save_results(self, session: Session, config: ExperimentConfig, table: ResultsTable,
                     dataset_name: str = "") -> int:
        """
        Store one experiment run with all of its records

        Args:
            session: Database session
            config: Configuration the run was made with
            table: Records and summary from run_experiment
            dataset_name: Name of the dataset; falls back to config.dataset_name

        Returns:
            Id of the new ExperimentRun
        """
        try:
            run = ExperimentRun(
                dataset_name=dataset_name or config.dataset_name or str(config.data_path or ""),
                master_seed=config.master_seed,
                n_repeats=config.n_repeats,
                strategies=",".join(s.id for s in config.strategies),
                config=config.model_dump(mode="json"),
            )
            run.records = [
                RunRecordRow(
                    strategy=r.strategy,
                    repeat=r.repeat,
                    budget=r.budget,
                    balanced_accuracy=r.balanced_accuracy,
                    wall_time_s=r.wall_time,
                )
                for r in table.records
            ]
            session.add(run)
            session.commit()

            logger.info(f"Stored run {run.id} with {len(table.records)} records")
            return run.id

        except Exception as e:
            logger.error(f"Error storing results: {e}")
            session.rollback()
            raise

    def load_records(self, session: Session, run_id: int) -> List[RunRecord]:
        """Records of one run in the order they were stored; KeyError if the run does not exist"""
        try:
            if session.get(ExperimentRun, run_id) is None:
                raise KeyError(f"no stored run with id {run_id}")
            rows = session.execute(
                select(RunRecordRow).where(RunRecordRow.run_id == run_id).order_by(RunRecordRow.id)
            ).scalars()
            return [
                RunRecord(
                    strategy=row.strategy,
                    repeat=row.repeat,
                    budget=row.budget,
                    balanced_accuracy=row.balanced_accuracy,
                    wall_time=row.wall_time_s,
                )
                for row in rows
            ]

        except Exception as e:
            logger.error(f"Error loading records of run {run_id}: {e}")
            raise

    def list_runs(self, session: Session) -> List[Dict[str, Any]]:
        """All stored runs, newest first"""
        try:
            query = (
                select(ExperimentRun, func.count(RunRecordRow.id))
                .outerjoin(RunRecordRow)
                .group_by(ExperimentRun.id)
                .order_by(ExperimentRun.id.desc())
            )
            return [
                {
                    "id": run.id,
                    "dataset": run.dataset_name,
                    "strategies": run.strategies.split(","),
                    "n_repeats": run.n_repeats,
                    "master_seed": run.master_seed,
                    "n_records": n_records,
                    "created_at": run.created_at,
                }
                for run, n_records in session.execute(query)
            ]

        except Exception as e:
            logger.error(f"Error listing runs: {e}")
            raise
