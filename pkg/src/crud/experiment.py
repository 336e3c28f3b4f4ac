from typing import List, Optional
from sqlmodel import Session, select

from src.core.experiments import ExperimentReport, RateFit
from src.model import ExperimentRun, ReplicateRecord


def save_report(
    session: Session,
    report: ExperimentReport,
    fit: Optional[RateFit] = None,
    status: str = "ok",
) -> ExperimentRun:
    """
    store one experiment report as an ExperimentRun with one ReplicateRecord per record, and return the run.
    """
    run = ExperimentRun(
        family_kind=str(report.config.get("family", "unknown")),
        seed=int(report.config.get("seed", 0)),
        config=dict(report.config),
        checksum=report.checksum,
        slope=fit.slope if fit else None,
        ci_low=fit.ci_low if fit else None,
        ci_high=fit.ci_high if fit else None,
        status=status,
    )
    run.replicates = [
        ReplicateRecord(n=r.n, replicate=r.replicate, seed=r.seed, d2=r.d2, wall_time=r.wall_time)
        for r in report.records
    ]
    session.add(run)
    session.commit()
    session.refresh(run)
    return run


def get_run(session: Session, run_id: int) -> Optional[ExperimentRun]:
    return session.get(ExperimentRun, run_id)


def get_run_records(session: Session, run_id: int) -> List[ReplicateRecord]:
    """
    replicate rows of a run in the order they were produced (n, then replicate id).
    """
    statement = (
        select(ReplicateRecord)
        .where(ReplicateRecord.run_id == run_id)
        .order_by(ReplicateRecord.n, ReplicateRecord.replicate)
    )
    return list(session.exec(statement).all())


def list_runs(session: Session, limit: int = 20) -> List[ExperimentRun]:
    """
    most recent runs first.
    """
    statement = (
        select(ExperimentRun)
        .order_by(ExperimentRun.created_at.desc(), ExperimentRun.id.desc())
        .limit(limit)
    )
    return list(session.exec(statement).all())
