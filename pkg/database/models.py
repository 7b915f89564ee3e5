"""
Database models for stored experiment runs
"""

from datetime import datetime

from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class ExperimentRun(Base):
    """One run_experiment invocation"""
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True)
    dataset_name = Column(String, nullable=False, index=True)
    master_seed = Column(Integer, nullable=False)
    n_repeats = Column(Integer, nullable=False)
    strategies = Column(String, nullable=False)  # comma-separated ids, in config order
    config = Column(JSON, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)

    records = relationship("RunRecordRow", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<ExperimentRun(id={self.id}, dataset={self.dataset_name}, repeats={self.n_repeats})>"


class RunRecordRow(Base):
    __tablename__ = "run_records"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id"), nullable=False, index=True)
    strategy = Column(String, nullable=False)
    repeat = Column(Integer, nullable=False)
    budget = Column(Integer, nullable=False)
    balanced_accuracy = Column(Float, nullable=False)
    wall_time_s = Column(Float, nullable=False, default=0.0)

    run = relationship("ExperimentRun", back_populates="records")

    def __repr__(self):
        return f"<RunRecordRow(run={self.run_id}, {self.strategy}, repeat={self.repeat}, budget={self.budget})>"
