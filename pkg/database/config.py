"""
Database configuration for the optional results store (sync SQLAlchemy)
"""

import logging
from pathlib import Path
from typing import Optional, Tuple

from sqlalchemy import create_engine, text
from sqlalchemy.engine import Engine, make_url
from sqlalchemy.orm import Session, sessionmaker

from config import RESULTS_DATABASE_URL

logger = logging.getLogger(__name__)


def make_session_factory(database_url: str = RESULTS_DATABASE_URL) -> Tuple[Engine, sessionmaker]:
    """Engine plus session factory for one database URL"""
    engine = create_engine(
        database_url,
        echo=False,  # Set to True for SQL debugging
    )
    factory = sessionmaker(
        bind=engine,
        class_=Session,
        expire_on_commit=False,
        autoflush=False,
    )
    return engine, factory


def _ensure_sqlite_directory(engine: Engine) -> None:
    url = make_url(str(engine.url))
    if url.get_backend_name() == "sqlite" and url.database and url.database != ":memory:":
        Path(url.database).parent.mkdir(parents=True, exist_ok=True)


def init_db(engine: Optional[Engine] = None) -> Engine:
    """Create the result tables if needed and check the connection"""
    from database.models import Base

    if engine is None:
        engine, _ = make_session_factory()
    try:
        _ensure_sqlite_directory(engine)
        Base.metadata.create_all(engine)
        with engine.connect() as conn:
            conn.execute(text("SELECT 1"))
        logger.info(f"Results database ready at {engine.url}")
    except Exception as e:
        logger.error(f"Failed to initialise results database: {e}")
        raise
    return engine


def close_db(engine: Engine) -> None:
    engine.dispose()
    logger.info("Database connection closed")
