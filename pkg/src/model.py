# tables for stored experiment runs: one ExperimentRun per `wbary simulate --db`,
# one ReplicateRecord per (n, replicate) row of its report.

from typing import List, Optional
from datetime import datetime, timezone
from sqlmodel import SQLModel, Field, Relationship
from sqlalchemy import JSON, Column


def utc_now():
    return datetime.now(timezone.utc)


# created_at / updated_at shared by every table
class TimestampMixin(SQLModel):
    created_at: datetime = Field(
        default_factory=utc_now,
        nullable=False
    )
    updated_at: datetime = Field(
        default_factory=utc_now,
        sa_column_kwargs={
            "onupdate": utc_now,
        },
        nullable=False
    )


class ExperimentRun(TimestampMixin, table=True):
    __tablename__ = "experiment_runs"

    id: Optional[int] = Field(default=None, primary_key=True)

    family_kind: str = Field(index=True)
    seed: int
    # config echo of the run (family spec, n grid, replicates, quadrature size)
    config: dict = Field(default_factory=dict, sa_column=Column(JSON))
    checksum: str

    # rate fit; null when the report has too few n values / replicates
    slope: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    # "ok" when every acceptance flag passed, "flagged" otherwise
    status: str = Field(default="ok")

    replicates: List["ReplicateRecord"] = Relationship(
        back_populates="run",
        sa_relationship_kwargs={"cascade": "all, delete-orphan"},
    )


class ReplicateRecord(SQLModel, table=True):
    __tablename__ = "replicate_records"

    id: Optional[int] = Field(default=None, primary_key=True)
    run_id: int = Field(foreign_key="experiment_runs.id", index=True)

    n: int
    replicate: int
    seed: int
    d2: float
    wall_time: float = 0.0

    run: Optional[ExperimentRun] = Relationship(back_populates="replicates")
