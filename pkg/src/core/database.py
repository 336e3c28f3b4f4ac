#db engine for the optional run store, using SQLModel on top of SQLAlchemy.
# Runs are written once at the end of a CLI command, so a synchronous engine is enough.
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator, Optional

from sqlalchemy.engine import Engine
from sqlmodel import Session, SQLModel, create_engine

from src.core.config import settings


# one engine per database URL, created lazily so importing the package never touches disk
@lru_cache(maxsize=None)
def get_engine(url: Optional[str] = None) -> Engine:
    url = url or settings.DATABASE_URL
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    return create_engine(url, echo=False, connect_args=connect_args)


# create the tables defined in src.model if they don't exist yet
def init_db(url: Optional[str] = None) -> Engine:
    import src.model  # noqa: F401  registers the tables on SQLModel.metadata

    engine = get_engine(url)
    SQLModel.metadata.create_all(engine)
    return engine


# one session per CLI command, tables created on first use
@contextmanager
def get_session(url: Optional[str] = None) -> Iterator[Session]:
    with Session(init_db(url)) as session:
        yield session
